"""Hörmander's telescoping Nash–Moser iteration on a fixed spectral lattice.

Starting from ``u_0 = 0`` the loop computes, for ``j = 0, 1, ...``::

    v_j = S_j u_j
    h_j = Psi(v_j)(g_j + y_j),          g_j = R_j g
    e_j = [Phi(u_j + h_j) - Phi(u_j) - Phi'(u_j) h_j] + [Phi'(u_j) - Phi'(v_j)] h_j
    u_{j+1} = u_j + h_j

with ``y_0 = 0`` and ``y_j = -S_j e_{j-1} - R_{j-1} sum_{i<=j-2} e_i``.  The
corrections make the accumulated error telescope::

    Phi(u_{k+1}) - Phi(0) = S_{k+1} g + e_k + r_k,   r_k = (I - S_k) sum_{j<k} e_j.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .hypotheses import DerivedConstants, IterationParams
from .problems.instances import PsiFailure, TameProblem
from .scale import SpectralFunction, sobolev_norm, wavenumber_norm
from .smoothing import SmoothingFamily, apply_R, apply_S

__all__ = [
    "ConvergenceError",
    "DivergenceError",
    "SolverFailure",
    "BallViolation",
    "SmallnessWarning",
    "IterationState",
    "RunReport",
    "decompose_g",
    "build_y",
    "step",
    "run",
    "check_residual_identity",
    "monitor_bounds",
    "ROW_COLUMNS",
]

DIVERGENCE_FACTOR = 10.0
DIVERGENCE_WINDOW = 5
RESIDUAL_MARGIN = 0.5


class ConvergenceError(RuntimeError):
    """The iteration stopped abnormally; ``report`` holds the rows so far."""

    def __init__(self, message: str, report: "RunReport | None" = None):
        super().__init__(message)
        self.report = report


class DivergenceError(ConvergenceError):
    pass


class SolverFailure(ConvergenceError):
    pass


class BallViolation(ConvergenceError):
    pass


class SmallnessWarning(UserWarning):
    """``||g||_beta`` exceeds the configured smallness threshold."""


ROW_COLUMNS = (
    "j",
    "h_a1",
    "h_a2",
    "v_a1_beta",
    "u_minus_v_a2",
    "u_alpha",
    "v_a1",
    "y_0",
    "e_0",
    "e_a2_mu",
    "g_j_beta",
    "residual",
    "residual_high",
    "ratio_h_a1",
    "ratio_h_a2",
    "ratio_v",
    "ratio_u_minus_v",
    "ratio_u",
)

# summary keys of the four monitored bounds
BOUND_KEYS = ("K1_hat", "K2_hat", "K3_hat", "K4_hat")


def _ratio(num: float, den: float) -> float:
    """``num/den`` with 0/0 mapped to NaN (skipped by the monitors)."""
    if den == 0.0:
        return math.nan if num == 0.0 else math.inf
    return num / den


@dataclass
class RunReport:
    params: IterationParams
    g_beta: float = 0.0
    rows: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def append(self, row: dict) -> None:
        if self.rows and row["j"] <= self.rows[-1]["j"]:
            raise ValueError("rows must be appended in increasing j")
        self.rows.append(row)

    @property
    def residuals(self) -> list[float]:
        return [r["residual"] for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(ROW_COLUMNS)
        for r in self.rows:
            w.writerow([r["j"]] + [repr(float(r[c])) for c in ROW_COLUMNS[1:]])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.summary), sort_keys=True, indent=2) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


@dataclass
class IterationState:
    g: SpectralFunction
    u: SpectralFunction
    j: int = 0
    e_list: list[SpectralFunction] = field(default_factory=list)
    g_blocks: list[SpectralFunction] = field(default_factory=list)
    u_hist: list[SpectralFunction] = field(default_factory=list)
    h_list: list[SpectralFunction] = field(default_factory=list)
    y_list: list[SpectralFunction] = field(default_factory=list)
    phi0: SpectralFunction | None = None

    @classmethod
    def initial(cls, problem: TameProblem, g: SpectralFunction) -> "IterationState":
        u0 = problem.zero()
        return cls(g=g, u=u0, u_hist=[u0], phi0=problem.phi(u0))


def _lattice_cover_index(fam: SmoothingFamily, dim: int, nmax: int) -> int:
    return fam.first_index_covering(float(np.max(wavenumber_norm(dim, nmax))))


def decompose_g(
    g: SpectralFunction, fam: SmoothingFamily, jmax: int | None = None, a: float = 0.0
) -> tuple[list[SpectralFunction], float]:
    """Blocks ``R_j g`` for ``j <= jmax`` and the smallest admissible ``A`` in the ``a`` norm.

    By default ``jmax`` is the last index before ``S_j`` becomes the identity on
    the lattice, so the blocks sum to ``g``.  ``A = 1`` when ``g = 0``.
    """
    if jmax is None:
        jmax = max(0, _lattice_cover_index(fam, g.dim, g.nmax) - 1)
    blocks = [apply_R(fam, j, g) for j in range(jmax + 1)]
    total = sobolev_norm(g, a)
    if total == 0.0:
        return blocks, 1.0
    return blocks, math.sqrt(sum(sobolev_norm(b, a) ** 2 for b in blocks)) / total


def build_y(state: IterationState, fam: SmoothingFamily, j: int) -> SpectralFunction:
    """Correction ``y_j`` from the stored errors ``e_0 .. e_{j-1}``."""
    if j < 0:
        raise ValueError("j must be nonnegative")
    if len(state.e_list) < j:
        raise ValueError(f"y_{j} needs e_0..e_{j - 1}, only {len(state.e_list)} stored")
    if j == 0:
        return state.g.with_coeffs(np.zeros_like(state.g.coeffs))
    y = -apply_S(fam, j, state.e_list[j - 1])
    if j >= 2:
        acc = state.e_list[0]
        for e in state.e_list[1 : j - 1]:
            acc = acc + e
        y = y - apply_R(fam, j - 1, acc)
    return y


def step(
    problem: TameProblem,
    state: IterationState,
    fam: SmoothingFamily,
    params: IterationParams | None = None,
    strict_ball: bool = False,
) -> dict:
    """Advance ``state`` from ``u_j`` to ``u_{j+1}`` in place; returns the diagnostics row."""
    p = params or problem.params
    j = state.j
    u = state.u
    v = apply_S(fam, j, u)
    v_a1 = sobolev_norm(v, p.a1)
    if v_a1 > problem.delta1 and strict_ball:
        raise BallViolation(f"step {j}: ||v_j||_a1 = {v_a1:.3e} exceeds delta1 = {problem.delta1:g}")
    g_j = apply_R(fam, j, state.g)
    y = build_y(state, fam, j)
    try:
        h = problem.psi(v, g_j + y)
    except PsiFailure as exc:
        raise SolverFailure(f"step {j}: {exc}") from exc
    u_next = u + h
    e1 = problem.phi(u_next) - problem.phi(u) - problem.dphi(u, h)
    e2 = problem.dphi(u, h) - problem.dphi(v, h)
    e = e1 + e2

    state.e_list.append(e)
    state.g_blocks.append(g_j)
    state.h_list.append(h)
    state.y_list.append(y)
    state.u = u_next
    state.u_hist.append(u_next)
    state.j = j + 1

    res_vec = problem.phi(u_next) - state.phi0 - state.g
    gb = sobolev_norm(state.g, p.beta)
    gamma = p.resolved_gamma()
    gjb = sobolev_norm(g_j, p.beta)
    xi = gb * 2.0 ** (-j * gamma) + gjb
    row = {
        "j": j,
        "h_a1": sobolev_norm(h, p.a1),
        "h_a2": sobolev_norm(h, p.a2),
        "v_a1_beta": sobolev_norm(v, p.a1 + p.beta),
        "u_minus_v_a2": sobolev_norm(u - v, p.a2),
        "u_alpha": sobolev_norm(u, p.alpha),
        "v_a1": v_a1,
        "y_0": sobolev_norm(y, 0.0),
        "e_0": sobolev_norm(e, 0.0),
        "e_a2_mu": sobolev_norm(e, max(p.a2 - p.mu, 0.0)),
        "g_j_beta": gjb,
        "residual": sobolev_norm(res_vec, 0.0),
        "residual_high": sobolev_norm(res_vec, max(min(p.alpha - p.mu, p.beta) - RESIDUAL_MARGIN, 0.0)),
    }
    row["ratio_h_a1"] = _ratio(row["h_a1"], xi * 2.0 ** (j * (p.a1 - p.alpha)))
    row["ratio_h_a2"] = _ratio(row["h_a2"], xi * 2.0 ** (j * (p.a2 - p.alpha)))
    row["ratio_v"] = _ratio(row["v_a1_beta"], gb * 2.0 ** (j * (p.a1 + p.beta - p.alpha)))
    row["ratio_u_minus_v"] = _ratio(row["u_minus_v_a2"], gb * 2.0 ** (j * (p.a2 - p.alpha)))
    row["ratio_u"] = _ratio(row["u_alpha"], gb)
    return row


def _diverging(residuals: list[float]) -> bool:
    if not math.isfinite(residuals[-1]):
        return True
    if len(residuals) <= DIVERGENCE_WINDOW:
        return False
    window = residuals[-DIVERGENCE_WINDOW - 1 :]
    return window[-1] > DIVERGENCE_FACTOR * window[0]


def run(
    problem: TameProblem,
    g: SpectralFunction,
    params: IterationParams | None = None,
    fam: SmoothingFamily | None = None,
    max_steps: int = 40,
    residual_tol: float = 1e-10,
    delta: float | None = None,
    strict_ball: bool = False,
    return_state: bool = False,
):
    """Iterate until ``||Phi(u_k) - Phi(0) - g||_0 <= residual_tol`` or ``max_steps``.

    Returns ``(u, report)`` or, with ``return_state``, ``(u, report, state)``.
    ``delta`` is the smallness threshold for ``||g||_beta``; exceeding it only
    warns.  Divergence, solver failure and (if ``strict_ball``) leaving the
    ``delta1`` ball raise subclasses of :class:`ConvergenceError`.
    """
    from .hypotheses import validate

    p = params or problem.params
    fam = fam or SmoothingFamily()
    bad = validate(p)
    if bad:
        raise ValueError("invalid parameters: " + "; ".join(map(str, bad)))
    if (g.dim, g.nmax) != (problem.dim, problem.nmax):
        g = g.resize(problem.nmax)
    gb = sobolev_norm(g, p.beta)
    if delta is not None and gb > delta:
        warnings.warn(f"||g||_beta = {gb:.3e} exceeds delta = {delta:.3e}", SmallnessWarning, stacklevel=2)

    report = RunReport(params=p, g_beta=gb)
    state = IterationState.initial(problem, g)
    _, A = decompose_g(g, fam, a=p.beta)
    summary = {
        "problem": problem.metadata(),
        "smoothing": fam.describe(),
        "params": p.to_dict() if not callable(p.C_ac) else {**p.to_dict(), "C_ac": None},
        "gamma": p.resolved_gamma(),
        "g_beta": gb,
        "g_0": sobolev_norm(g, 0.0),
        "A": A,
        "delta": delta,
        "smallness_ok": delta is None or gb <= delta,
        "max_steps": max_steps,
        "residual_tol": residual_tol,
    }
    if p.c > 0:
        _, A_c = decompose_g(g, fam, a=p.beta + p.c)
        summary["A_c"] = A_c
        summary["g_beta_c"] = sobolev_norm(g, p.beta + p.c)
    report.summary = summary

    converged = g.is_zero()
    stop = "zero data" if converged else "max_steps"
    ball_violations = 0
    while not converged and state.j < max_steps:
        try:
            row = step(problem, state, fam, p, strict_ball=strict_ball)
        except ConvergenceError as exc:
            _finish(report, state, p, converged=False, stop=type(exc).__name__, ball=ball_violations)
            report.summary["failure_step"] = state.j
            exc.report = report
            raise
        report.append(row)
        ball_violations += row["v_a1"] > problem.delta1
        if _diverging(report.residuals):
            _finish(report, state, p, converged=False, stop="divergence", ball=ball_violations)
            report.summary["failure_step"] = row["j"]
            raise DivergenceError(
                f"residual grew from {report.residuals[max(0, len(report.rows) - 1 - DIVERGENCE_WINDOW)]:.3e} "
                f"to {row['residual']:.3e} by step {row['j']}",
                report,
            )
        if row["residual"] <= residual_tol:
            converged, stop = True, "residual_tol"
    _finish(report, state, p, converged=converged, stop=stop, ball=ball_violations)
    if return_state:
        return state.u, report, state
    return state.u, report


def _finish(report: RunReport, state: IterationState, p: IterationParams, converged: bool, stop: str, ball: int):
    s = report.summary
    s["converged"] = bool(converged)
    s["stop_reason"] = stop
    s["steps"] = state.j
    s["final_residual"] = report.rows[-1]["residual"] if report.rows else 0.0
    s["ball_violations"] = int(ball)
    s["u_alpha"] = sobolev_norm(state.u, p.alpha)
    if p.c > 0:
        s["u_alpha_c"] = sobolev_norm(state.u, p.alpha + p.c)
        denom = s["g_beta"] + s["g_beta_c"]
        s["highnorm_ratio"] = _ratio(s["u_alpha_c"], denom)
    s.update(monitor_bounds(report, p))


def check_residual_identity(problem: TameProblem, state: IterationState, fam: SmoothingFamily, k: int) -> float:
    """``||Phi(u_{k+1}) - Phi(u_0) - S_{k+1} g - e_k - r_k||_0``."""
    if k < 0 or k + 1 >= len(state.u_hist):
        raise ValueError(f"state holds u_0..u_{len(state.u_hist) - 1}; cannot check k = {k}")
    lhs = problem.phi(state.u_hist[k + 1]) - problem.phi(state.u_hist[0])
    rhs = apply_S(fam, k + 1, state.g) + state.e_list[k]
    if k >= 1:
        acc = state.e_list[0]
        for e in state.e_list[1:k]:
            acc = acc + e
        rhs = rhs + (acc - apply_S(fam, k, acc))
    return sobolev_norm(lhs - rhs, 0.0)


def monitor_bounds(
    report: RunReport, params: IterationParams | None = None, constants: DerivedConstants | None = None
) -> dict:
    """Sup over steps of each measured ratio; these are the empirical K constants.

    Ratios of the form 0/0 are skipped; a bound with no usable step is left
    out of the table.  When ``constants`` is given the proof constants are
    listed next to the measured ones.
    """
    p = params or report.params
    cols = {
        "K1_hat_a1": "ratio_h_a1",
        "K1_hat_a2": "ratio_h_a2",
        "K2_hat": "ratio_v",
        "K3_hat": "ratio_u_minus_v",
        "K4_hat": "ratio_u",
    }
    out = {}
    for key, col in cols.items():
        vals = [r[col] for r in report.rows if not math.isnan(r[col])]
        if key == "K4_hat" and "u_alpha" in report.summary and report.g_beta > 0:
            vals.append(report.summary["u_alpha"] / report.g_beta)
        if vals:
            out[key] = max(vals)
    if "K1_hat_a1" in out or "K1_hat_a2" in out:
        out["K1_hat"] = max(out.get("K1_hat_a1", -math.inf), out.get("K1_hat_a2", -math.inf))
    if constants is not None:
        for i, key in enumerate(BOUND_KEYS, start=1):
            if key in out:
                out[f"K{i}"] = getattr(constants, f"K{i}")
    return out

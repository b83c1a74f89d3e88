"""Explicit functions showing where the weak space and the classical hypotheses part ways.

``a11_counterexample`` builds ``u = int_1^inf u_theta d theta`` on the circle,
where ``u_theta`` has flat Fourier coefficients ``theta^{-beta}`` on the shell
``theta/2 <= |k| <= 3 theta/2``.  Each ``u_theta`` satisfies the power bounds
``||u_theta||_{a_i} <= M theta^{b_i - 1}``, yet the sum is not in ``H^a`` at
``a = beta - d/2 - 1``.

``weak_space_example`` is ``u = sum_k <k>^{-a-1/2} e^{ikx}``: its dyadic blocks
are uniformly bounded in ``H^a`` while the full ``H^a`` norm diverges.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from ..scale import SpectralFunction

__all__ = [
    "CounterexampleFunction",
    "a11_coefficients",
    "a11_counterexample",
    "weak_space_example",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ("family", "series", "exponent", "index", "value", "fitted_slope", "predicted_slope")


@dataclass
class CounterexampleFunction:
    family: str  # "HormanderA11" or "WeakSpace"
    exponents: dict
    u: SpectralFunction
    rows: list[tuple] = field(default_factory=list)
    fits: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([r[0], r[1], repr(float(r[2])), r[3], repr(float(r[4])), repr(float(r[5])), repr(float(r[6]))])
        return buf.getvalue()

    def summary(self) -> dict:
        return {"family": self.family, "exponents": self.exponents, "nmax": self.u.nmax, "fits": self.fits}


def _slope(x, y) -> float:
    return float(np.polyfit(np.asarray(x, float), np.asarray(y, float), 1)[0])


def _add_series(cf: CounterexampleFunction, series: str, exponent: float, index, values, fitted, predicted):
    for i, v in zip(index, values):
        cf.rows.append((cf.family, series, exponent, i, v, fitted, predicted))


def a11_coefficients(kabs: np.ndarray, beta: float) -> np.ndarray:
    """``int_{2|k|/3}^{2|k|} theta^{-beta} d theta`` in closed form; 0 at k = 0."""
    kabs = np.asarray(kabs, dtype=float)
    out = np.zeros_like(kabs)
    nz = kabs > 0
    if beta == 1.0:
        out[nz] = math.log(3.0)
    else:
        lo, hi = 2.0 * kabs[nz] / 3.0, 2.0 * kabs[nz]
        out[nz] = (lo ** (1.0 - beta) - hi ** (1.0 - beta)) / (beta - 1.0)
    return out


def _shell_norm(theta: float, beta: float, a: float) -> float:
    """``||u_theta||_a`` for the flat shell ``theta/2 <= |k| <= 3 theta/2`` in d = 1."""
    k = np.arange(math.ceil(theta / 2.0), math.floor(1.5 * theta) + 1, dtype=float)
    mult = np.where(k == 0, 1.0, 2.0)  # +k and -k
    return float(theta ** (-beta) * math.sqrt(np.sum(mult * (1.0 + k**2) ** a)))


def a11_counterexample(
    nmax: int = 1 << 14,
    beta: float = 2.0,
    a0: float = 0.0,
    a1: float = 1.0,
    dim: int = 1,
    a: float | None = None,
    N_range: tuple[int, int] = (1 << 8, 1 << 14),
    theta_range: tuple[float, float] = (16.0, 4096.0),
) -> CounterexampleFunction:
    """Counterexample on the circle with fitted power laws.

    ``a`` defaults to the critical exponent ``beta - d/2 - 1``; other values
    are accepted to contrast with subcritical behaviour.
    """
    if dim != 1:
        raise ValueError("the counterexample is implemented on the circle only (d = 1)")
    crit = beta - dim / 2.0 - 1.0
    if not crit > 0:
        raise ValueError(f"need beta > d/2 + 1, got beta = {beta}")
    if not 0 <= a0 < crit < a1:
        raise ValueError(f"need 0 <= a0 < beta - d/2 - 1 = {crit:g} < a1, got a0 = {a0}, a1 = {a1}")
    if N_range[1] > nmax or 1.5 * theta_range[1] > nmax:
        raise ValueError("fit windows exceed the lattice")
    a = crit if a is None else a

    k = np.arange(-nmax, nmax + 1)
    coeffs = a11_coefficients(np.abs(k), beta)
    u = SpectralFunction(1, nmax, coeffs.astype(complex), real_valued=True)
    cf = CounterexampleFunction("HormanderA11", {"beta": beta, "a0": a0, "a1": a1, "a": a}, u)

    # power bounds on the shells
    thetas = np.geomspace(theta_range[0], theta_range[1], 2 * int(round(math.log2(theta_range[1] / theta_range[0]))) + 1)
    for name, ai in (("a0", a0), ("a1", a1)):
        norms = [_shell_norm(t, beta, ai) for t in thetas]
        fitted = _slope(np.log(thetas), np.log(norms))
        predicted = ai - beta + dim / 2.0  # b_i - 1
        cf.fits[f"shell_{name}"] = {"fitted": fitted, "predicted": predicted}
        _add_series(cf, f"shell_norm_{name}", ai, thetas, norms, fitted, predicted)

    # partial sums of ||u||_a^2 over |k| <= N
    kpos = np.arange(1, nmax + 1, dtype=float)
    terms = 2.0 * a11_coefficients(kpos, beta) ** 2 * (1.0 + kpos**2) ** a
    P = np.cumsum(terms)  # P[N-1] = sum_{1<=|k|<=N}
    Ns = 2 ** np.arange(int(math.log2(N_range[0])), int(math.log2(N_range[1])) + 1)
    PN = P[Ns - 1]
    fitted = _slope(np.log(Ns), PN)
    c = ((1.5) ** (beta - 1.0) - 2.0 ** (1.0 - beta)) / (beta - 1.0)
    predicted = 2.0 * c**2 if math.isclose(a, crit) else 0.0
    cf.fits["partial_sum"] = {"fitted": fitted, "predicted": predicted}
    _add_series(cf, "partial_sum", a, Ns, PN, fitted, predicted)

    # dyadic increments: ratio -> 1 when critical, -> 2^{2(a - crit)} below
    inc = np.diff(PN)
    ratios = inc[1:] / inc[:-1]
    cf.fits["increment_ratio"] = {"fitted": float(ratios[-1]), "predicted": 2.0 ** (2.0 * (a - crit))}
    cf.fits["partial_sum_ratio"] = {"fitted": float(PN[-1] / PN[-2]), "predicted": 1.0}
    return cf


def weak_space_example(nmax: int = 1 << 13, a: float = 1.0, dim: int = 1, j_range: tuple[int, int] = (3, 12)) -> CounterexampleFunction:
    """``u_k = <k>^{-a-1/2}`` with sharp dyadic blocks ``2^j < |k| <= 2^{j+1}``."""
    if dim != 1:
        raise ValueError("the weak-space example is implemented on the circle only (d = 1)")
    if a < 0:
        raise ValueError("a must be nonnegative")
    jlo, jhi = j_range
    if 2 ** (jhi + 1) > nmax:
        raise ValueError(f"nmax = {nmax} cannot hold block j = {jhi}")
    k = np.arange(-nmax, nmax + 1)
    br2 = 1.0 + k.astype(float) ** 2
    u = SpectralFunction(1, nmax, (br2 ** (-(a + 0.5) / 2.0)).astype(complex), real_valued=True)
    cf = CounterexampleFunction("WeakSpace", {"a": a}, u)

    dens = np.abs(u.coeffs) ** 2 * br2**a  # = <k>^{-1}
    kabs = np.abs(k)
    js = np.arange(jlo, jhi + 1)
    blocks = np.array([math.sqrt(np.sum(dens[(kabs > 2**j) & (kabs <= 2 ** (j + 1))])) for j in js])
    spread = float(blocks.max() / blocks.min())
    cf.fits["block_spread"] = {"fitted": spread, "predicted": 1.0}
    _add_series(cf, "block_norm", a, js, blocks, spread, 1.0)

    jfit = js[js >= max(jlo, 6)]
    partial = np.array([np.sum(dens[kabs <= 2**j]) for j in jfit])
    fitted = _slope(jfit, partial)
    predicted = 2.0 * math.log(2.0)
    cf.fits["partial_sum_slope"] = {"fitted": fitted, "predicted": predicted}
    cf.fits["partial_sum_per_j"] = {"fitted": float(partial[-1] / jfit[-1]), "predicted": predicted}
    _add_series(cf, "partial_sum", a, jfit, partial, fitted, predicted)
    return cf

"""Exponent constraints and the constant ledger of the Nash-Moser-Hormander scheme.

Exponents ``a0 <= mu <= a1 < alpha < a1 + beta`` and ``a2`` must satisfy

    a1 + beta/2 < alpha < a1 + beta,     2 alpha < a1 + a2.

The ledger turns the tame constants ``M_i`` (second derivative of Phi) and
``L_i`` (right inverse Psi) into the induction constants ``K_1..K_4``, the
smallness radius ``delta = 1/B`` and, for higher regularity ``c > 0``, the
coefficients of the bound on ``||u||_{alpha+c}``.

Anonymous constants of the proof (``C_*``, ``C'``, ``C_c``, ``C_{a,c}``)
are plain inputs defaulting to 1.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "IterationParams",
    "PiecewiseLinear",
    "TameConstants",
    "DerivedConstants",
    "Violation",
    "NoAdmissibleGamma",
    "validate",
    "choose_gamma",
    "compute_delta",
    "fix_K_constants",
    "higher_regularity_steps",
    "highnorm_coeffs",
    "highnorm_bound",
    "derive_constants",
]


class NoAdmissibleGamma(ValueError):
    """Raised when 2*alpha <= 2*a1 + beta leaves no room for gamma > 0."""


@dataclass
class IterationParams:
    a0: float
    mu: float
    a1: float
    alpha: float
    beta: float
    a2: float
    gamma: float | None = None  # None -> maximal admissible value
    c: float = 0.0
    A: float = 1.0
    A_c: float = 1.0
    Cstar: float = 1.0
    C_c: float = 1.0
    C_ac: float = 1.0

    @property
    def loss(self) -> float:
        return self.beta - self.alpha

    def resolved_gamma(self) -> float:
        return choose_gamma(self) if self.gamma is None else self.gamma

    @classmethod
    def from_dict(cls, d: dict) -> "IterationParams":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown parameter(s): {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


class PiecewiseLinear:
    """Increasing positive function given by a table, evaluated with ``np.interp``.

    A scalar builds a constant function.  Outside the table the end values
    are held, which keeps the function nondecreasing.
    """

    def __init__(self, points, values=None):
        if values is None and np.isscalar(points):
            xs, ys = np.array([0.0]), np.array([float(points)])
        elif values is None:
            pts = np.asarray(points, dtype=float)
            xs, ys = pts[:, 0], pts[:, 1]
        else:
            xs, ys = np.asarray(points, dtype=float), np.asarray(values, dtype=float)
        order = np.argsort(xs)
        self.xs, self.ys = xs[order], ys[order]
        if np.any(self.ys <= 0):
            raise ValueError("tame constants must be positive")
        if np.any(np.diff(self.ys) < 0):
            raise ValueError("tame constants must be nondecreasing")

    def __call__(self, a: float) -> float:
        return float(np.interp(a, self.xs, self.ys))

    def __add__(self, other: "PiecewiseLinear") -> "PiecewiseLinear":
        xs = np.union1d(self.xs, other.xs)
        return PiecewiseLinear(xs, [self(x) + other(x) for x in xs])

    def to_json(self):
        if self.xs.size == 1:
            return float(self.ys[0])
        return [[float(x), float(y)] for x, y in zip(self.xs, self.ys)]

    def __repr__(self):
        return f"PiecewiseLinear({self.to_json()!r})"


def _pl(v) -> PiecewiseLinear:
    return v if isinstance(v, PiecewiseLinear) else PiecewiseLinear(v)


@dataclass
class TameConstants:
    """``M_1..M_3`` on ``[0, a2 + c - mu]``; ``L_4..L_6`` on ``[a1, a2 + c]``."""

    M1: PiecewiseLinear = field(default_factory=lambda: PiecewiseLinear(1.0))
    M2: PiecewiseLinear = field(default_factory=lambda: PiecewiseLinear(1.0))
    M3: PiecewiseLinear = field(default_factory=lambda: PiecewiseLinear(1.0))
    L4: PiecewiseLinear = field(default_factory=lambda: PiecewiseLinear(1.0))
    L5: PiecewiseLinear = field(default_factory=lambda: PiecewiseLinear(1.0))
    L6: PiecewiseLinear = field(default_factory=lambda: PiecewiseLinear(1.0))
    delta1: float = 1.0

    def __post_init__(self):
        for name in ("M1", "M2", "M3", "L4", "L5", "L6"):
            setattr(self, name, _pl(getattr(self, name)))
        if self.delta1 <= 0:
            raise ValueError("delta1 must be positive")

    def M123(self, a: float) -> float:
        return self.M1(a) + self.M2(a) + self.M3(a)

    def M12(self, a: float) -> float:
        return self.M1(a) + self.M2(a)

    def L456(self, a: float) -> float:
        return self.L4(a) + self.L5(a) + self.L6(a)

    def L45(self, a: float) -> float:
        return self.L4(a) + self.L5(a)

    @classmethod
    def from_dict(cls, d: dict) -> "TameConstants":
        return cls(**d)

    def to_dict(self) -> dict:
        out = {n: getattr(self, n).to_json() for n in ("M1", "M2", "M3", "L4", "L5", "L6")}
        out["delta1"] = self.delta1
        return out


@dataclass
class Violation:
    name: str
    lhs: float
    rhs: float

    def __str__(self):
        return f"{self.name}: {self.lhs:g} vs {self.rhs:g}"


def validate(p: IterationParams) -> list[Violation]:
    """Every violated hypothesis on the exponents, with both sides evaluated."""
    checks = [
        ("0 <= a0", 0.0, p.a0, lambda l, r: l <= r),
        ("a0 <= mu", p.a0, p.mu, lambda l, r: l <= r),
        ("mu <= a1", p.mu, p.a1, lambda l, r: l <= r),
        ("a1+beta/2 < alpha", p.a1 + p.beta / 2, p.alpha, lambda l, r: l < r),
        ("alpha < a1+beta", p.alpha, p.a1 + p.beta, lambda l, r: l < r),
        ("2*alpha < a1+a2", 2 * p.alpha, p.a1 + p.a2, lambda l, r: l < r),
    ]
    out = [Violation(name, lhs, rhs) for name, lhs, rhs, ok in checks if not ok(lhs, rhs)]
    if p.c < 0:
        out.append(Violation("c >= 0", p.c, 0.0))
    if p.gamma is not None:
        if p.gamma <= 0:
            out.append(Violation("gamma > 0", p.gamma, 0.0))
        if 2 * p.a1 + p.beta + p.gamma > 2 * p.alpha:
            out.append(Violation("2*a1+beta+gamma <= 2*alpha", 2 * p.a1 + p.beta + p.gamma, 2 * p.alpha))
    return out


def choose_gamma(p: IterationParams) -> float:
    """Largest admissible gamma, ``2*alpha - 2*a1 - beta``."""
    gamma = 2 * p.alpha - 2 * p.a1 - p.beta
    if gamma <= 0:
        raise NoAdmissibleGamma(f"2*alpha = {2 * p.alpha:g} <= 2*a1 + beta = {2 * p.a1 + p.beta:g}")
    return gamma


def compute_delta(p: IterationParams, t: TameConstants, Cprime: float = 1.0) -> tuple[float, float]:
    """``B = C' L456(a2) max{1/delta1, 1+A, (1+A) L456(a2) M123(a2-mu)}`` and ``delta = 1/B``."""
    if t.delta1 <= 0:
        raise ValueError("delta1 must be positive")
    L = t.L456(p.a2)
    B = Cprime * L * max(1.0 / t.delta1, 1.0 + p.A, (1.0 + p.A) * L * t.M123(p.a2 - p.mu))
    return B, 1.0 / B


def fix_K_constants(p: IterationParams, t: TameConstants) -> tuple[float, float, float, float]:
    K1 = p.Cstar * t.L456(p.a2)
    K = p.Cstar * K1 * (1.0 + p.A)
    return K1, K, K, K


def higher_regularity_steps(p: IterationParams) -> tuple[int, float]:
    """``N`` = smallest positive integer >= 2c/gamma and ``lambda = c/N``."""
    if p.c <= 0:
        raise ValueError("higher regularity needs c > 0")
    gamma = p.resolved_gamma()
    N = max(1, math.ceil(2 * p.c / gamma - 1e-12))
    return N, p.c / N


def _tilde(p: IterationParams, t: TameConstants) -> dict:
    top = p.a2 + p.c
    return {
        "L6": t.L6(top),
        "L45": t.L45(top),
        "M12": t.M12(top - p.mu),
        "M3": t.M3(top - p.mu),
        "L456_a1": t.L456(p.a1),
        "L456_a2": t.L456(p.a2),
        "M123_0": t.M123(0.0),
    }


def _C_ac(p: IterationParams) -> Callable[[float], float]:
    return p.C_ac if callable(p.C_ac) else (lambda a, v=p.C_ac: v)


def highnorm_coeffs(
    p: IterationParams,
    t: TameConstants,
    n: int,
    a: float,
    mode: str = "recursive",
) -> tuple[float, float, float, float]:
    """Coefficients ``(A_n(a), B_n(a), E_n, F_n)`` of the higher-regularity bounds.

    ``mode="recursive"`` runs the four coupled recursions from
    ``A_1 = E_1 = 0``, ``B_1 = L45(a) C_{a,c}``, ``F_1 = L456(a1) C_c``;
    ``mode="closed"`` evaluates the geometric-sum formulas.
    """
    N, _ = higher_regularity_steps(p)
    if n < 1 or n > N:
        raise ValueError(f"n must be in [1, {N}], got {n}")
    tl = _tilde(p, t)
    Cac = _C_ac(p)
    top = p.a2 + p.c
    X = tl["L6"] * tl["M12"] + tl["L456_a2"] * tl["M3"]
    if mode == "closed":
        Z = tl["L456_a1"] * p.C_c * tl["M123_0"] + tl["L45"] * Cac(top) * tl["M12"]
        s_short = sum(Z**j for j in range(n - 1))  # j = 0..n-2
        s_long = sum(Z**j for j in range(n))  # j = 0..n-1
        return (
            t.L45(a) * Cac(a) * X * s_short,
            t.L45(a) * Cac(a) * s_long,
            tl["L456_a1"] * p.C_c * X * s_short,
            tl["L456_a1"] * p.C_c * s_long,
        )
    if mode != "recursive":
        raise ValueError(f"unknown mode {mode!r}")
    # the recursion needs A_n, B_n at a and at the top exponent a2 + c
    A_a, B_a = 0.0, t.L45(a) * Cac(a)
    A_t, B_t = 0.0, t.L45(top) * Cac(top)
    E, F = 0.0, tl["L456_a1"] * p.C_c
    for _ in range(n - 1):
        inner_A = A_t * tl["M12"] + tl["L6"] * tl["M12"] + tl["L456_a2"] * tl["M3"] + E * tl["M123_0"]
        inner_B = 1.0 + B_t * tl["M12"] + F * tl["M123_0"]
        A_a, B_a = t.L45(a) * Cac(a) * inner_A, t.L45(a) * Cac(a) * inner_B
        A_t, B_t = t.L45(top) * Cac(top) * inner_A, t.L45(top) * Cac(top) * inner_B
        E, F = tl["L456_a1"] * p.C_c * inner_A, tl["L456_a1"] * p.C_c * inner_B
    return A_a, B_a, E, F


def _G_constants(p: IterationParams, t: TameConstants) -> tuple[float, float, float]:
    N, _ = higher_regularity_steps(p)
    tl = _tilde(p, t)
    z = tl["L456_a1"] * tl["M123_0"] + tl["L45"] * tl["M12"]
    X = tl["L6"] * tl["M12"] + tl["L456_a2"] * tl["M3"]
    G1 = tl["L6"] + tl["L45"] * X * sum(z**j for j in range(N - 1))
    G2 = tl["L45"] * sum(z**j for j in range(N))
    return G1, G2, z


def highnorm_bound(p: IterationParams, t: TameConstants, g_beta: float, g_beta_c: float) -> float:
    """``C_c {G1 (1+A) ||g||_beta + G2 (1+A_c) ||g||_{beta+c}}``."""
    G1, G2, _ = _G_constants(p, t)
    return p.C_c * (G1 * (1.0 + p.A) * g_beta + G2 * (1.0 + p.A_c) * g_beta_c)


@dataclass
class DerivedConstants:
    K1: float
    K2: float
    K3: float
    K4: float
    B: float
    delta: float
    delta_proof: float
    gamma: float
    G1: float | None = None
    G2: float | None = None
    z: float | None = None
    X: float | None = None
    Z: float | None = None
    N: int | None = None
    lam: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def derive_constants(p: IterationParams, t: TameConstants, Cprime: float = 1.0) -> DerivedConstants:
    """Full ledger for a valid parameter set."""
    problems = validate(p)
    if problems:
        raise ValueError("invalid parameters: " + "; ".join(map(str, problems)))
    gamma = p.resolved_gamma()
    K1, K2, K3, K4 = fix_K_constants(p, t)
    B, delta = compute_delta(p, t, Cprime)
    # radius from the induction's closing conditions
    proof = max(K1, K2, p.Cstar * K1 / t.delta1, p.Cstar * t.M123(p.a2 - p.mu) * t.L456(p.a2) * (K1 + K3))
    out = DerivedConstants(K1, K2, K3, K4, B, delta, 1.0 / proof, gamma)
    if p.c > 0:
        N, lam = higher_regularity_steps(p)
        G1, G2, z = _G_constants(p, t)
        tl = _tilde(p, t)
        out.G1, out.G2, out.z, out.N, out.lam = G1, G2, z, N, lam
        out.X = tl["L6"] * tl["M12"] + tl["L456_a2"] * tl["M3"]
        out.Z = tl["L456_a1"] * p.C_c * tl["M123_0"] + tl["L45"] * _C_ac(p)(p.a2 + p.c) * tl["M12"]
    return out

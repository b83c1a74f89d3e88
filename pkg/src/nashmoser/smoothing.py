"""Fourier-multiplier smoothing operators S_j and dyadic blocks R_j.

A family is a cutoff shape (sharp indicator or smooth profile psi) plus a
velocity law ``j -> theta_j``.  ``S_j`` multiplies ``u_k`` by ``1[|k| <= theta_j]``
or ``psi(|k| / theta_j)``; ``R_0 = S_1`` and ``R_j = S_{j+1} - S_j`` for
``j >= 1``.

Besides applying the operators, this module measures the constants in the
smoothing inequalities (contraction, inverse and direct Bernstein bounds,
block bounds), the orthogonality constant
``sup ||u||_a^2 / sum_j ||R_j u||_a^2`` and the extra loss produced by
fast-growing ``theta_j``.  All measurements exploit that the operators are
diagonal: norms only need the power spectrum ``|u_k|^2`` of each test
function.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import sparse

from .scale import SpectralFunction, sobolev_weights, wavenumber_norm

__all__ = [
    "Dyadic",
    "Geometric",
    "Polynomial",
    "DoublyExponential",
    "SmoothingFamily",
    "bump_profile",
    "ModeSet",
    "apply_S",
    "apply_R",
    "AxiomConstants",
    "measure_axiom_constants",
    "measure_orthogonality",
    "block_weights",
    "VelocityFit",
    "velocity_loss_exponent",
    "default_jmax",
    "rows_to_csv",
]


# -- velocities --------------------------------------------------------------


@dataclass(frozen=True)
class Dyadic:
    """theta_j = 2^j."""

    name = "dyadic"

    def theta(self, j):
        return np.power(2.0, j)

    def inverse(self, t: float) -> float:
        return math.log2(t) if t > 0 else -math.inf


@dataclass(frozen=True)
class Geometric:
    """theta_j = c^j with c > 1."""

    c: float
    name = "geometric"

    def __post_init__(self):
        if self.c <= 1:
            raise ValueError("geometric velocity needs c > 1")

    def theta(self, j):
        return np.power(self.c, j, dtype=float)

    def inverse(self, t: float) -> float:
        return math.log(t) / math.log(self.c) if t > 0 else -math.inf


@dataclass(frozen=True)
class Polynomial:
    """theta_j = (a + j)^eps with a > 0, eps > 0."""

    a: float
    eps: float
    name = "polynomial"

    def __post_init__(self):
        if self.a <= 0 or self.eps <= 0:
            raise ValueError("polynomial velocity needs a > 0 and eps > 0")

    def theta(self, j):
        return np.power(self.a + np.asarray(j, dtype=float), self.eps)

    def inverse(self, t: float) -> float:
        return t ** (1.0 / self.eps) - self.a if t > 0 else -math.inf


@dataclass(frozen=True)
class DoublyExponential:
    """theta_j = theta0^(chi^j) with theta0 > 1, chi > 1."""

    theta0: float
    chi: float
    name = "doubly_exponential"

    def __post_init__(self):
        if self.theta0 <= 1 or self.chi <= 1:
            raise ValueError("doubly exponential velocity needs theta0 > 1 and chi > 1")

    def theta(self, j):
        return np.power(self.theta0, np.power(self.chi, np.asarray(j, dtype=float)))

    def inverse(self, t: float) -> float:
        if t <= 1:
            return -math.inf
        return math.log(math.log(t) / math.log(self.theta0)) / math.log(self.chi)


Velocity = Dyadic | Geometric | Polynomial | DoublyExponential


def bump_profile(t):
    """C^infinity nonincreasing profile: 1 on [0, 1], 0 on [2, inf).

    Uses the standard ratio ``f(2 - t) / (f(2 - t) + f(t - 1))`` with
    ``f(s) = exp(-1/s)`` for ``s > 0``.
    """
    t = np.asarray(t, dtype=float)
    out = np.where(t <= 1.0, 1.0, 0.0)
    mid = (t > 1.0) & (t < 2.0)
    if np.any(mid):
        tm = t[mid]
        f_hi = np.exp(-1.0 / (2.0 - tm))
        f_lo = np.exp(-1.0 / (tm - 1.0))
        out[mid] = f_hi / (f_hi + f_lo)
    return out


@dataclass(frozen=True)
class SmoothingFamily:
    """Cutoff shape plus velocity.

    ``shape`` is ``"sharp"`` or ``"smooth"``; ``profile`` is only used by
    smooth families and must vanish on ``[2, inf)`` and equal 1 on ``[0, 1]``.
    """

    shape: str = "sharp"
    velocity: Velocity = field(default_factory=Dyadic)
    profile: Callable = bump_profile

    def __post_init__(self):
        if self.shape not in ("sharp", "smooth"):
            raise ValueError(f"unknown cutoff shape {self.shape!r}")

    @property
    def support_factor(self) -> float:
        """Multipliers of S_j vanish for |k| > support_factor * theta_j."""
        return 1.0 if self.shape == "sharp" else 2.0

    def theta(self, j):
        return self.velocity.theta(j)

    def cutoff(self, kabs, theta):
        """Multiplier of S_theta at wavenumber length ``kabs``."""
        kabs = np.asarray(kabs, dtype=float)
        if self.shape == "sharp":
            return (kabs <= theta).astype(float)
        return self.profile(kabs / theta)

    def s_multiplier(self, j: int, kabs) -> np.ndarray:
        if j < 0:
            raise ValueError("smoothing index must be nonnegative")
        return self.cutoff(kabs, float(self.theta(j)))

    def r_multiplier(self, j: int, kabs) -> np.ndarray:
        if j < 0:
            raise ValueError("block index must be nonnegative")
        if j == 0:
            return self.s_multiplier(1, kabs)
        return self.s_multiplier(j + 1, kabs) - self.s_multiplier(j, kabs)

    def first_index_covering(self, kabs: float) -> int:
        """Smallest j with theta_j >= kabs, i.e. S_j acts as identity on |k| <= kabs."""
        if kabs <= 0:
            return 0
        j = max(0, int(math.floor(self.velocity.inverse(kabs))) - 1)
        while float(self.theta(j)) < kabs:
            j += 1
        return j

    def describe(self) -> dict:
        vel = self.velocity
        params = {k: getattr(vel, k) for k in getattr(vel, "__dataclass_fields__", {})}
        return {"shape": self.shape, "velocity": vel.name, **params}


def default_jmax(fam: SmoothingFamily, nmax: int) -> int:
    """Largest j with theta_{j+1} <= nmax (no cutoff straddles the lattice edge)."""
    j = 0
    while float(fam.theta(j + 2)) <= nmax:
        j += 1
    return j


def apply_S(fam: SmoothingFamily, j: int, u: SpectralFunction) -> SpectralFunction:
    m = fam.s_multiplier(j, wavenumber_norm(u.dim, u.nmax))
    return u.with_coeffs(u.coeffs * m)


def apply_R(fam: SmoothingFamily, j: int, u: SpectralFunction) -> SpectralFunction:
    m = fam.r_multiplier(j, wavenumber_norm(u.dim, u.nmax))
    return u.with_coeffs(u.coeffs * m)


# -- test sets ---------------------------------------------------------------


@dataclass(frozen=True)
class ModeSet:
    """Implicit test set of unit single modes ``exp(i k.x)``.

    For d = 1 only ``k >= 0`` is scanned (multipliers and norms depend on
    ``|k|``); for d = 2 every lattice point is used.  Storing tens of
    thousands of dense single-mode arrays would be wasteful, so the
    measurement routines accept this object in place of a list.
    """

    dim: int
    nmax: int
    kmin: float = 0.0

    def power_matrix(self) -> sparse.csr_matrix:
        kabs = wavenumber_norm(self.dim, self.nmax).ravel()
        if self.dim == 1:
            ks = np.arange(-self.nmax, self.nmax + 1)
            cols = np.flatnonzero((ks >= 0) & (kabs >= self.kmin))
        else:
            cols = np.flatnonzero(kabs >= self.kmin)
        data = np.ones(cols.size)
        rows = np.arange(cols.size)
        return sparse.csr_matrix((data, (rows, cols)), shape=(cols.size, kabs.size))

    def __len__(self) -> int:
        return self.power_matrix().shape[0]


TestSet = Sequence[SpectralFunction] | ModeSet


def _power_matrix(testset: TestSet) -> tuple[sparse.csr_matrix, int, int]:
    """Rows are |u_k|^2 (flattened) for each test function; zero rows dropped."""
    if isinstance(testset, ModeSet):
        pm = testset.power_matrix()
        if pm.shape[0] == 0:
            raise ValueError("empty test set")
        return pm, testset.dim, testset.nmax
    funcs = list(testset)
    if not funcs:
        raise ValueError("empty test set")
    dim = funcs[0].dim
    if any(f.dim != dim for f in funcs):
        raise ValueError("test functions must share the dimension")
    nmax = max(f.nmax for f in funcs)
    rows = [np.abs(f.resize(nmax).coeffs.ravel()) ** 2 for f in funcs if not f.is_zero()]
    if not rows:
        raise ValueError("test set contains only zero functions")
    return sparse.csr_matrix(np.vstack(rows)), dim, nmax


def _ratio_sup(num_sq: np.ndarray, den_sq: np.ndarray, den_scale: float = 1.0) -> float:
    """sup of sqrt(num_sq) / (den_scale * sqrt(den_sq)) skipping 0/0 entries."""
    mask = den_sq > 0
    if not np.any(mask):
        return float("nan")
    return float(np.max(np.sqrt(num_sq[mask] / den_sq[mask]))) / den_scale


# -- axiom constants ---------------------------------------------------------


@dataclass
class AxiomConstants:
    """Measured suprema of left side over right side without C.

    ``C_S2`` uses the pair ``(lo, hi) = (min(a, b), max(a, b))`` and
    ``C_S3`` the reversed pair, so one call measures all four inequalities.
    ``rows`` holds per-j maxima as ``(axiom, a, b, j, ratio)``.
    """

    C_S1: float
    C_S2: float
    C_S3: float
    C_S4: float
    jmax: int
    rows: list[tuple] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"C_S1": self.C_S1, "C_S2": self.C_S2, "C_S3": self.C_S3, "C_S4": self.C_S4, "jmax": self.jmax}


def measure_axiom_constants(
    fam: SmoothingFamily,
    testset: TestSet,
    a: float,
    b: float,
    jmax: int | None = None,
) -> AxiomConstants:
    """Scan j = 0..jmax and the test set for the smoothing inequalities.

    The powers of two use dyadic indexing (``2^{j(b-a)}``) for
    every velocity, so non-dyadic velocities show up as drifting constants.
    """
    if a == b:
        raise ValueError("need a != b to measure the Bernstein-type constants")
    power, dim, nmax = _power_matrix(testset)
    if jmax is None:
        jmax = default_jmax(fam, nmax)
    lo, hi = min(a, b), max(a, b)
    kabs = wavenumber_norm(dim, nmax).ravel()
    w = {s: sobolev_weights(dim, nmax, s).ravel() for s in (lo, hi)}
    rows: list[tuple] = []
    best = {"S1": 0.0, "S2": 0.0, "S3": 0.0, "S4": 0.0}

    def record(axiom, aa, bb, j, value):
        if np.isnan(value):
            return
        rows.append((axiom, aa, bb, j, value))
        best[axiom] = max(best[axiom], value)

    full = {s: power @ w[s] for s in (lo, hi)}
    for j in range(jmax + 1):
        m = fam.s_multiplier(j, kabs)
        m2 = m**2
        s_lo, s_hi = power @ (m2 * w[lo]), power @ (m2 * w[hi])
        # (S1): ||S_j u||_s <= C ||u||_s, at both exponents
        record("S1", lo, lo, j, max(_ratio_sup(s_lo, full[lo]), _ratio_sup(s_hi, full[hi])))
        # (S2): ||S_j u||_hi <= C 2^{j(hi-lo)} ||S_j u||_lo
        record("S2", lo, hi, j, _ratio_sup(s_hi, s_lo, 2.0 ** (j * (hi - lo))))
        # (S3): ||u - S_j u||_lo <= C 2^{-j(hi-lo)} ||u - S_j u||_hi
        q2 = (1.0 - m) ** 2
        r_lo, r_hi = power @ (q2 * w[lo]), power @ (q2 * w[hi])
        record("S3", hi, lo, j, _ratio_sup(r_lo, r_hi, 2.0 ** (-j * (hi - lo))))
        # (S4): ||(S_{j+1} - S_j) u||_b <= C 2^{j(b-a)} ||(S_{j+1} - S_j) u||_a, both orders
        d2 = (fam.s_multiplier(j + 1, kabs) - m) ** 2
        d_lo, d_hi = power @ (d2 * w[lo]), power @ (d2 * w[hi])
        up = _ratio_sup(d_hi, d_lo, 2.0 ** (j * (hi - lo)))
        down = _ratio_sup(d_lo, d_hi, 2.0 ** (-j * (hi - lo)))
        record("S4", lo, hi, j, np.nanmax([up, down]) if not (np.isnan(up) and np.isnan(down)) else float("nan"))
    return AxiomConstants(best["S1"], best["S2"], best["S3"], best["S4"], jmax, rows)


# -- orthogonality -----------------------------------------------------------


def block_weights(fam: SmoothingFamily, kabs: Iterable[float]) -> np.ndarray:
    """``sum_{j>=0} r_j(|k|)^2`` for each wavenumber length, summed exactly.

    Only the blocks whose multiplier can be nonzero at ``|k|`` are
    evaluated; all other terms vanish identically.
    """
    kabs = np.atleast_1d(np.asarray(kabs, dtype=float))
    out = np.empty(kabs.size)
    for i, kk in enumerate(kabs):
        out[i] = _block_weight(fam, float(kk))
    return out


_CHUNK = 1 << 20


def _block_weight(fam: SmoothingFamily, kk: float) -> float:
    # S_j is identity at kk for j >= j_hi; zero for theta_j < kk / support_factor
    j_hi = max(fam.first_index_covering(kk), 1)
    j_lo = max(fam.first_index_covering(kk / fam.support_factor) - 1, 1)
    total = float(fam.cutoff(kk, float(fam.theta(1)))) ** 2  # R_0 = S_1
    # R_j = S_{j+1} - S_j for j in [j_lo, j_hi - 1]
    start = j_lo
    while start < j_hi:
        stop = min(start + _CHUNK, j_hi)
        js = np.arange(start, stop + 1, dtype=float)
        m = fam.cutoff(kk, fam.theta(js))
        total += float(np.sum(np.diff(m) ** 2))
        start = stop
    return total


def measure_orthogonality(fam: SmoothingFamily, testset: TestSet, a: float) -> float:
    """``sup_u ||u||_a^2 / sum_j ||R_j u||_a^2`` over the nonzero test functions."""
    power, dim, nmax = _power_matrix(testset)
    w = sobolev_weights(dim, nmax, a).ravel()
    kabs = wavenumber_norm(dim, nmax).ravel()
    used = np.flatnonzero(np.asarray(power.sum(axis=0)).ravel() > 0)
    uniq, inverse = np.unique(kabs[used], return_inverse=True)
    bw = np.zeros(kabs.size)
    bw[used] = block_weights(fam, uniq)[inverse]
    num = power @ w
    den = power @ (w * bw)
    mask = num > 0
    return float(np.max(num[mask] / den[mask]))


# -- velocity benchmark ------------------------------------------------------


@dataclass
class VelocityFit:
    """Log-log fit of the normalized block difference against theta_j."""

    sigma: float
    slope: float
    expected_slope: float
    js: np.ndarray
    thetas: np.ndarray
    measured: np.ndarray

    def rows(self, fam: SmoothingFamily, a: float, b: float) -> list[tuple]:
        return [("velocity", a, b, int(j), float(m)) for j, m in zip(self.js, self.measured)]


def velocity_loss_exponent(
    fam: SmoothingFamily,
    a: float,
    b: float,
    jrange: Iterable[int],
    nmax: int | None = None,
) -> VelocityFit:
    """Empirical extra loss sigma of ``(S_{theta_{j+1}} - S_{theta_j}) / (theta_{j+1} - theta_j)``.

    For each j the supremum over single modes of
    ``||(S_{j+1} - S_j) u||_b / ((theta_{j+1} - theta_j) ||u||_a)`` is
    computed; the slope of its logarithm against ``log theta_j`` minus
    ``b - a - 1`` is returned as ``sigma``.  Blocks that contain no lattice
    mode (possible for slow sharp families) are skipped.
    """
    if b <= a + 1:
        raise ValueError("need b > a + 1")
    js = np.array(sorted(set(int(j) for j in jrange)))
    if nmax is None:
        nmax = int(math.ceil(fam.support_factor * float(fam.theta(js[-1] + 1)))) + 1
    ks = np.arange(0, nmax + 1, dtype=float)
    gain = np.sqrt(1.0 + ks**2) ** (b - a)
    keep_j, thetas, measured = [], [], []
    for j in js:
        t0, t1 = float(fam.theta(j)), float(fam.theta(j + 1))
        if fam.support_factor * t1 > nmax + 1:
            raise ValueError(f"lattice radius {nmax} too small for j = {j}")
        diff = np.abs(fam.cutoff(ks, t1) - fam.cutoff(ks, t0)) * gain
        peak = float(np.max(diff))
        if peak > 0:
            keep_j.append(j)
            thetas.append(t0)
            measured.append(peak / (t1 - t0))
    if len(keep_j) < 4:
        raise ValueError("fewer than 4 usable points in the fit window")
    thetas, measured = np.array(thetas), np.array(measured)
    slope = float(np.polyfit(np.log(thetas), np.log(measured), 1)[0])
    expected = b - a - 1
    return VelocityFit(slope - expected, slope, expected, np.array(keep_j), thetas, measured)


def rows_to_csv(fam: SmoothingFamily, rows: Iterable[tuple]) -> str:
    """CSV with columns family, velocity, axiom, a, b, j, ratio."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["family", "velocity", "axiom", "a", "b", "j", "ratio"])
    for axiom, a, b, j, ratio in rows:
        writer.writerow([fam.shape, fam.velocity.name, axiom, a, b, j, repr(float(ratio))])
    return buf.getvalue()

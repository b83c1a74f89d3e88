"""Tame problems ``(Phi, Psi)`` on a fixed spectral lattice.

Each instance supplies ``phi``, its first two derivatives and an exact
right inverse ``psi(v, g)`` of ``Phi'(v)`` on the lattice, together with
metadata used by the iteration (exponents, loss of derivatives, radius of
the ball where ``Psi`` is available).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal
from scipy.sparse import linalg as spla

from ..hypotheses import IterationParams, TameConstants
from ..scale import SpectralFunction, bracket, lattice, pointwise_product, sobolev_norm

__all__ = [
    "PsiFailure",
    "TameProblem",
    "LinearMultiplierProblem",
    "QuadraticProblem",
    "SmallDivisorProblem",
    "linear_multiplier_problem",
    "quadratic_problem",
    "small_divisor_problem",
    "GOLDEN_MEAN",
    "smooth_random",
]

GOLDEN_MEAN = (math.sqrt(5.0) - 1.0) / 2.0
DENSE_LIMIT = 1200
SOLVE_RTOL = 1e-13


class PsiFailure(ArithmeticError):
    """The linearized operator could not be inverted at the given point."""


@dataclass
class TameProblem:
    """Base class: subclasses implement ``phi``, ``dphi``, ``d2phi``, ``psi``.

    ``mu`` and ``a0`` describe the second-derivative estimate, ``loss`` is
    the derivative loss ``beta - alpha`` of ``Psi`` and ``delta1`` the
    radius (in the ``a1`` norm) of the ball where ``Psi`` is trusted.
    """

    dim: int
    nmax: int
    mu: float = 0.0
    a0: float = 0.0
    loss: float = 0.0
    delta1: float = 1.0
    params: IterationParams | None = None
    tame: TameConstants | None = None
    name: str = field(default="problem", init=False)

    def phi(self, u: SpectralFunction) -> SpectralFunction:
        raise NotImplementedError

    def dphi(self, u: SpectralFunction, h: SpectralFunction) -> SpectralFunction:
        raise NotImplementedError

    def d2phi(self, u: SpectralFunction, h: SpectralFunction, w: SpectralFunction) -> SpectralFunction:
        raise NotImplementedError

    def psi(self, v: SpectralFunction, g: SpectralFunction) -> SpectralFunction:
        raise NotImplementedError

    def zero(self) -> SpectralFunction:
        return SpectralFunction.zeros(self.dim, self.nmax)

    def metadata(self) -> dict:
        return {"name": self.name, "dim": self.dim, "nmax": self.nmax, "mu": self.mu, "a0": self.a0,
                "loss": self.loss, "delta1": self.delta1}


# -- linear solves for diag(D) + 2 * (multiplication by v) -------------------


def _product_matrix(v: SpectralFunction) -> np.ndarray:
    """Dense matrix of ``h -> truncation of v*h`` on the flattened lattice."""
    n, d = v.nmax, v.dim
    big = v.resize(2 * n).coeffs  # radius 2n covers every difference k - m
    ks = [k.ravel() for k in lattice(d, n)]
    idx = tuple((kp[:, None] - kp[None, :]) + 2 * n for kp in ks)
    return big[idx]


def _solve_diag_plus_product(diag: np.ndarray, v: SpectralFunction, g: SpectralFunction) -> SpectralFunction:
    """Solve ``diag * h + 2 * v * h = g`` exactly on the lattice."""
    shape = g.coeffs.shape
    size = g.coeffs.size
    rhs = g.coeffs.ravel()
    dflat = diag.ravel()
    if v.is_zero():
        if np.any(dflat == 0):
            raise PsiFailure("singular diagonal")
        h = rhs / dflat
    elif size <= DENSE_LIMIT:
        mat = 2.0 * _product_matrix(v)
        mat[np.diag_indices(size)] += dflat
        try:
            h = np.linalg.solve(mat, rhs)
        except np.linalg.LinAlgError as exc:
            raise PsiFailure(str(exc)) from exc
    else:
        h = _gmres(dflat, v, rhs, shape)
    if not np.all(np.isfinite(h)):
        raise PsiFailure("non-finite solution")
    out = g.with_coeffs(h.reshape(shape), real_valued=False)
    resid = np.linalg.norm(dflat * h + 2.0 * _conv(v, out).ravel() - rhs)
    if resid > 1e-11 * max(np.linalg.norm(rhs), 1e-300):
        raise PsiFailure(f"linear solve residual {resid:.3e} too large")
    return out.project_real() if (v.real_valued and g.real_valued) else out


def _conv(v: SpectralFunction, h: SpectralFunction) -> np.ndarray:
    n = h.nmax
    full = signal.fftconvolve(v.coeffs, h.coeffs)
    return full[tuple(slice(n, 3 * n + 1) for _ in range(h.dim))]


def _gmres(dflat: np.ndarray, v: SpectralFunction, rhs: np.ndarray, shape) -> np.ndarray:
    if np.any(dflat == 0):
        raise PsiFailure("singular diagonal")

    def matvec(x):
        hx = SpectralFunction(v.dim, v.nmax, x.reshape(shape))
        return dflat * x + 2.0 * _conv(v, hx).ravel()

    op = spla.LinearOperator((rhs.size, rhs.size), matvec=matvec, dtype=complex)
    prec = spla.LinearOperator((rhs.size, rhs.size), matvec=lambda x: x / dflat, dtype=complex)
    h, info = spla.gmres(op, rhs, x0=rhs / dflat, rtol=SOLVE_RTOL, atol=0.0, restart=80, maxiter=20, M=prec)
    if info != 0:
        raise PsiFailure(f"GMRES did not converge (info={info})")
    return h


# -- instances ---------------------------------------------------------------


@dataclass
class LinearMultiplierProblem(TameProblem):
    """``Phi(u) = L u`` with ``(Lu)_k = symbol_k u_k``; ``Psi = L^{-1}``."""

    symbol: np.ndarray | None = None

    def __post_init__(self):
        self.name = "linear"
        sym = np.asarray(self.symbol, dtype=complex)
        if sym.shape != (2 * self.nmax + 1,) * self.dim:
            raise ValueError("symbol must live on the lattice")
        if np.any(sym == 0):
            raise ValueError("symbol has a zero entry; L is not invertible")
        self.symbol = sym

    def measured_loss(self) -> float:
        """Smallest tau with ``|symbol_k|^{-1} <= <k>^tau`` for k != 0."""
        br = bracket(self.dim, self.nmax)
        mask = br > 1.0
        return float(np.max(-np.log(np.abs(self.symbol[mask])) / np.log(br[mask])))

    def _apply(self, u, factor):
        rv = u.real_valued and _hermitian_symbol(factor)
        return u.with_coeffs(u.coeffs * factor, real_valued=rv)

    def phi(self, u):
        return self._apply(u, self.symbol)

    def dphi(self, u, h):
        return self._apply(h, self.symbol)

    def d2phi(self, u, h, w):
        return SpectralFunction.zeros(self.dim, self.nmax, real_valued=h.real_valued and w.real_valued)

    def psi(self, v, g):
        return self._apply(g, 1.0 / self.symbol)


def _hermitian_symbol(sym: np.ndarray) -> bool:
    flipped = np.conj(sym[(slice(None, None, -1),) * sym.ndim])
    return bool(np.allclose(sym, flipped, rtol=1e-14, atol=0.0))


def linear_multiplier_problem(dim: int, nmax: int, symbol) -> LinearMultiplierProblem:
    """``symbol`` is an array on the lattice or a callable of the bracket ``<k>``."""
    sym = symbol(bracket(dim, nmax)) if callable(symbol) else symbol
    prob = LinearMultiplierProblem(dim, nmax, symbol=sym)
    prob.loss = prob.measured_loss()
    prob.params = IterationParams(a0=1, mu=3, a1=5, alpha=11, beta=11, a2=18)
    prob.delta1 = math.inf
    prob.tame = TameConstants(delta1=math.inf)
    return prob


@dataclass
class QuadraticProblem(TameProblem):
    """``Phi(u) = u + u^2`` with the product truncated to the lattice."""

    def __post_init__(self):
        self.name = "quadratic"
        self._diag = np.ones((2 * self.nmax + 1,) * self.dim, dtype=complex)

    def phi(self, u):
        return u + pointwise_product(u, u)

    def dphi(self, u, h):
        return h + 2.0 * pointwise_product(u, h)

    def d2phi(self, u, h, w):
        return 2.0 * pointwise_product(h, w)

    def psi(self, v, g):
        return _solve_diag_plus_product(self._diag, v, g)


def quadratic_problem(dim: int = 1, nmax: int = 64) -> QuadraticProblem:
    """``|1 + 2v| >= 1/2`` pointwise as long as ``sup|v| <= 1/4``; hence delta1 = 0.25."""
    prob = QuadraticProblem(dim, nmax, mu=1.0, a0=1.0, loss=0.0, delta1=0.25)
    prob.params = IterationParams(a0=1, mu=3, a1=5, alpha=11, beta=11, a2=18)
    prob.tame = TameConstants(delta1=0.25)
    return prob


@dataclass
class SmallDivisorProblem(TameProblem):
    """``Phi(u) = D u + u^2`` on T^2 with ``(Du)_k = i (omega.k) u_k``, ``(Du)_0 = d0 u_0``."""

    omega: tuple[float, float] = (1.0, GOLDEN_MEAN)
    tau: float = 1.0
    gamma0: float | None = None
    d0: float = 1.0

    def __post_init__(self):
        self.name = "small_divisor"
        if self.dim != 2:
            raise ValueError("the small-divisor instance lives on T^2")
        if self.d0 == 0:
            raise ValueError("d0 must be nonzero to invert the zero mode")
        k1, k2 = lattice(2, self.nmax)
        wk = self.omega[0] * k1 + self.omega[1] * k2
        diag = 1j * wk
        diag[self.nmax, self.nmax] = self.d0
        self._diag = diag
        self._divisors = wk

    def divisor_floor(self) -> float:
        """``min |omega.k| |k|`` over nonzero lattice points."""
        kabs = np.sqrt(1.0 * sum(k**2 for k in lattice(2, self.nmax)))
        mask = kabs > 0
        return float(np.min(np.abs(self._divisors[mask]) * kabs[mask]))

    def condition_number(self) -> float:
        mags = np.abs(self._diag)
        return float(np.max(mags) / np.min(mags))

    def fitted_loss(self) -> float:
        """Slope of ``-log min_{0<|k|_inf<=R} |omega.k|`` against ``log R``."""
        k1, k2 = lattice(2, self.nmax)
        radius = np.maximum(np.abs(k1), np.abs(k2))
        rs = [r for r in (2**i for i in range(1, 20)) if r <= self.nmax]
        if len(rs) < 2:
            return float("nan")
        mins = [np.min(np.abs(self._divisors[(radius > 0) & (radius <= r)])) for r in rs]
        return float(-np.polyfit(np.log(rs), np.log(mins), 1)[0])

    def phi(self, u):
        return u.with_coeffs(self._diag * u.coeffs) + pointwise_product(u, u)

    def dphi(self, u, h):
        return h.with_coeffs(self._diag * h.coeffs) + 2.0 * pointwise_product(u, h)

    def d2phi(self, u, h, w):
        return 2.0 * pointwise_product(h, w)

    def psi(self, v, g):
        return _solve_diag_plus_product(self._diag, v, g)


def small_divisor_problem(
    nmax: int = 32,
    omega: tuple[float, float] = (1.0, GOLDEN_MEAN),
    tau: float = 1.0,
    gamma0: float | None = None,
    d0: float = 1.0,
    delta1: float = 0.05,
) -> SmallDivisorProblem:
    """Prescribed-divisor model of a quasi-periodic transport equation.

    ``gamma0`` defaults to the measured divisor floor; if given, the
    Diophantine bound ``|omega.k| >= gamma0 |k|^{-tau}`` is checked on the
    lattice.
    """
    prob = SmallDivisorProblem(2, nmax, mu=1.5, a0=1.5, loss=tau, delta1=delta1,
                               omega=tuple(omega), tau=tau, gamma0=gamma0, d0=d0)
    k1, k2 = lattice(2, nmax)
    kabs = np.sqrt(1.0 * (k1**2 + k2**2))
    mask = kabs > 0
    floor = float(np.min(np.abs(prob._divisors[mask]) * kabs[mask] ** tau))
    if gamma0 is None:
        prob.gamma0 = floor
    elif floor < gamma0:
        raise ValueError(f"omega violates |omega.k| >= {gamma0} |k|^-{tau} on the lattice (floor {floor:.3g})")
    cond = prob.condition_number()
    if not cond < 1e12:
        raise PsiFailure(f"linearization at 0 too ill-conditioned (cond = {cond:.3e})")
    # loss beta - alpha = tau: a1 + beta/2 < alpha = beta - tau < a1 + beta, 2 alpha < a1 + a2
    prob.params = IterationParams(a0=1.5, mu=1.5, a1=2, alpha=6, beta=6 + tau, a2=11)
    prob.tame = TameConstants(delta1=delta1)
    return prob


def smooth_random(
    dim: int,
    nmax: int,
    rng: np.random.Generator,
    decay: float = 2.0,
    kmax: float | None = None,
    real: bool = True,
) -> SpectralFunction:
    """Random trigonometric polynomial with coefficients of size ``<k>^{-decay}``."""
    br = bracket(dim, nmax)
    coeffs = (rng.standard_normal(br.shape) + 1j * rng.standard_normal(br.shape)) * br ** (-decay)
    if kmax is not None:
        kabs = np.sqrt(br**2 - 1.0)
        coeffs[kabs > kmax] = 0.0
    u = SpectralFunction(dim, nmax, coeffs)
    return u.project_real() if real else u


def tame_ratio(problem: TameProblem, v: SpectralFunction, a: float, kmax: float | None = None) -> float:
    """``sup ||Psi(v) g||_a / ||g||_{a + loss}`` over unit single modes g."""
    ks = [k.ravel() for k in lattice(problem.dim, problem.nmax)]
    kabs = np.sqrt(sum(1.0 * k**2 for k in ks))
    best = 0.0
    for i in range(kabs.size):
        if kmax is not None and kabs[i] > kmax:
            continue
        k = tuple(int(c[i]) for c in ks)
        if problem.dim == 1 and k[0] < 0:
            continue
        g = SpectralFunction.from_modes(problem.dim, problem.nmax, {k: 1.0})
        h = problem.psi(v, g)
        best = max(best, sobolev_norm(h, a) / sobolev_norm(g, a + max(problem.loss, 0.0)))
    return best

"""Discretized periodic Sobolev spaces H^a(T^d).

A function on the torus is stored by its Fourier coefficients on the
truncated lattice ``{k in Z^d : |k|_inf <= nmax}``::

    u(x) = sum_k u_k exp(i k.x),    ||u||_a^2 = sum_k |u_k|^2 <k>^(2a),

with ``<k> = (1 + |k|^2)^(1/2)`` and ``|k|`` the Euclidean length.
The coefficient array has shape ``(2*nmax + 1,) * dim`` and the entry for
lattice point ``k`` lives at index ``k + nmax``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy import signal

__all__ = [
    "SpectralFunction",
    "lattice",
    "wavenumber_norm",
    "bracket",
    "sobolev_norm",
    "sobolev_weights",
    "pointwise_product",
    "axpy",
]

HERMITIAN_RTOL = 1e-9


@lru_cache(maxsize=64)
def lattice(dim: int, nmax: int) -> tuple[np.ndarray, ...]:
    """Integer wavenumber grids ``(k_1, ..., k_d)`` in ``indexing='ij'`` order."""
    _check_dim(dim)
    axis = np.arange(-nmax, nmax + 1)
    grids = np.meshgrid(*([axis] * dim), indexing="ij")
    for g in grids:
        g.setflags(write=False)
    return tuple(grids)


@lru_cache(maxsize=64)
def wavenumber_norm(dim: int, nmax: int) -> np.ndarray:
    """Euclidean length ``|k|`` at every lattice point."""
    ks = lattice(dim, nmax)
    out = np.sqrt(sum(k.astype(float) ** 2 for k in ks))
    out.setflags(write=False)
    return out


@lru_cache(maxsize=64)
def bracket(dim: int, nmax: int) -> np.ndarray:
    """Japanese bracket ``<k> = (1 + |k|^2)^(1/2)`` at every lattice point."""
    out = np.sqrt(1.0 + wavenumber_norm(dim, nmax) ** 2)
    out.setflags(write=False)
    return out


def sobolev_weights(dim: int, nmax: int, a: float) -> np.ndarray:
    """Weights ``<k>^(2a)`` so that ``||u||_a^2 = sum |u_k|^2 * weights``."""
    return bracket(dim, nmax) ** (2.0 * a)


def _check_dim(dim: int) -> None:
    if dim not in (1, 2):
        raise ValueError(f"only d = 1 or d = 2 is supported, got d = {dim}")


@dataclass(frozen=True, eq=False)
class SpectralFunction:
    """Trigonometric polynomial on T^d with coefficients on a truncated lattice.

    Instances are immutable: the coefficient array is copied and marked
    read-only at construction.
    """

    dim: int
    nmax: int
    coeffs: np.ndarray = field(repr=False)
    real_valued: bool = False

    def __post_init__(self):
        _check_dim(self.dim)
        if self.nmax < 0:
            raise ValueError("nmax must be nonnegative")
        arr = np.array(self.coeffs, dtype=complex)
        shape = (2 * self.nmax + 1,) * self.dim
        if arr.shape != shape:
            raise ValueError(f"coefficient array has shape {arr.shape}, expected {shape}")
        if self.real_valued:
            scale = np.max(np.abs(arr), initial=0.0)
            if np.max(np.abs(arr - np.conj(_flip(arr))), initial=0.0) > HERMITIAN_RTOL * max(scale, 1e-300):
                raise ValueError("real_valued function must satisfy u_{-k} = conj(u_k)")
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    @classmethod
    def _derived(cls, dim: int, nmax: int, arr: np.ndarray, real_valued: bool) -> "SpectralFunction":
        """Result of arithmetic on validated inputs: no check, Hermitian part taken if real."""
        if real_valued:
            arr = 0.5 * (arr + np.conj(_flip(arr)))
        obj = object.__new__(cls)
        arr = np.array(arr, dtype=complex)
        arr.setflags(write=False)
        for name, val in (("dim", dim), ("nmax", nmax), ("coeffs", arr), ("real_valued", real_valued)):
            object.__setattr__(obj, name, val)
        return obj

    # -- constructors -----------------------------------------------------

    @classmethod
    def zeros(cls, dim: int, nmax: int, real_valued: bool = True) -> "SpectralFunction":
        return cls(dim, nmax, np.zeros((2 * nmax + 1,) * dim, dtype=complex), real_valued)

    @classmethod
    def constant(cls, dim: int, nmax: int, value: complex) -> "SpectralFunction":
        arr = np.zeros((2 * nmax + 1,) * dim, dtype=complex)
        arr[(nmax,) * dim] = value
        return cls(dim, nmax, arr, real_valued=np.imag(value) == 0)

    @classmethod
    def from_modes(
        cls,
        dim: int,
        nmax: int,
        modes: dict[tuple[int, ...] | int, complex] | Iterable[tuple],
        real_valued: bool = False,
    ) -> "SpectralFunction":
        """Build from ``{k: amplitude}``; integer keys are accepted for d = 1.

        Modes outside the lattice are dropped, which is the truncation rule
        used everywhere in the package.
        """
        items = modes.items() if isinstance(modes, dict) else modes
        arr = np.zeros((2 * nmax + 1,) * dim, dtype=complex)
        for k, amp in items:
            k = (k,) if np.isscalar(k) else tuple(k)
            if len(k) != dim:
                raise ValueError(f"mode {k} does not match dimension {dim}")
            if max(abs(int(c)) for c in k) <= nmax:
                arr[tuple(int(c) + nmax for c in k)] += amp
        return cls(dim, nmax, arr, real_valued)

    @classmethod
    def from_json(cls, record: dict) -> "SpectralFunction":
        dim, nmax = int(record["dim"]), int(record["nmax"])
        arr = np.zeros((2 * nmax + 1,) * dim, dtype=complex)
        for k, re, im in record["coeffs"]:
            arr[tuple(int(c) + nmax for c in k)] = complex(re, im)
        return cls(dim, nmax, arr, bool(record.get("real_valued", False)))

    def to_json(self) -> dict:
        idx = np.argwhere(self.coeffs != 0)
        coeffs = []
        for row in idx:
            val = self.coeffs[tuple(row)]
            coeffs.append([[int(c) - self.nmax for c in row], float(val.real), float(val.imag)])
        return {"dim": self.dim, "nmax": self.nmax, "real_valued": self.real_valued, "coeffs": coeffs}

    # -- access -----------------------------------------------------------

    def coeff(self, k: int | Sequence[int]) -> complex:
        k = (k,) if np.isscalar(k) else tuple(k)
        if max(abs(c) for c in k) > self.nmax:
            return 0j
        return complex(self.coeffs[tuple(c + self.nmax for c in k)])

    def resize(self, nmax: int) -> "SpectralFunction":
        """Embed into (or truncate onto) the lattice of radius ``nmax``."""
        if nmax == self.nmax:
            return self
        arr = np.zeros((2 * nmax + 1,) * self.dim, dtype=complex)
        m = min(nmax, self.nmax)
        src = tuple(slice(self.nmax - m, self.nmax + m + 1) for _ in range(self.dim))
        dst = tuple(slice(nmax - m, nmax + m + 1) for _ in range(self.dim))
        arr[dst] = self.coeffs[src]
        return SpectralFunction._derived(self.dim, nmax, arr, self.real_valued)

    def with_coeffs(self, arr: np.ndarray, real_valued: bool | None = None) -> "SpectralFunction":
        rv = self.real_valued if real_valued is None else real_valued
        if arr.shape != self.coeffs.shape:
            raise ValueError("coefficient array does not match the lattice")
        return SpectralFunction._derived(self.dim, self.nmax, arr, rv)

    def project_real(self) -> "SpectralFunction":
        """Hermitian symmetrization, i.e. the real part of the function."""
        return SpectralFunction._derived(self.dim, self.nmax, self.coeffs, True)

    def norm(self, a: float = 0.0) -> float:
        return sobolev_norm(self, a)

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def to_grid(self, npoints: int | None = None) -> np.ndarray:
        """Values on the uniform grid of ``npoints`` per axis (default ``4 * nmax``)."""
        n = npoints or max(4 * self.nmax, 2)
        if n < 2 * self.nmax + 1:
            raise ValueError("grid too coarse for the lattice")
        full = np.zeros((n,) * self.dim, dtype=complex)
        idx = np.arange(-self.nmax, self.nmax + 1) % n
        full[np.ix_(*([idx] * self.dim))] = self.coeffs
        vals = np.fft.ifftn(full) * n**self.dim
        return vals.real if self.real_valued else vals

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other: "SpectralFunction") -> "SpectralFunction":
        return axpy(1.0, other, self)

    def __sub__(self, other: "SpectralFunction") -> "SpectralFunction":
        return axpy(-1.0, other, self)

    def __neg__(self) -> "SpectralFunction":
        return self.with_coeffs(-self.coeffs)

    def __mul__(self, other):
        if isinstance(other, SpectralFunction):
            return pointwise_product(self, other)
        return self.with_coeffs(self.coeffs * other, self.real_valued and np.isreal(other))

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"SpectralFunction(dim={self.dim}, nmax={self.nmax}, real_valued={self.real_valued}, ||u||_0={self.norm(0):.6g})"


def _flip(arr: np.ndarray) -> np.ndarray:
    return arr[(slice(None, None, -1),) * arr.ndim]


def sobolev_norm(u: SpectralFunction, a: float) -> float:
    """``(sum_k |u_k|^2 (1 + |k|^2)^a)^(1/2)``; ``a`` must be nonnegative."""
    if a < 0:
        raise ValueError(f"Sobolev exponent must be nonnegative, got {a}")
    power = np.abs(u.coeffs) ** 2
    return float(np.sqrt(np.sum(power * sobolev_weights(u.dim, u.nmax, a))))


def _common(u: SpectralFunction, v: SpectralFunction) -> int:
    if u.dim != v.dim:
        raise ValueError(f"dimension mismatch: {u.dim} vs {v.dim}")
    return max(u.nmax, v.nmax)


def pointwise_product(u: SpectralFunction, v: SpectralFunction) -> SpectralFunction:
    """Product ``u * v``: discrete convolution of coefficients, truncated.

    The result lives on the larger of the two input lattices.
    """
    n = _common(u, v)
    full = signal.convolve(u.resize(n).coeffs, v.resize(n).coeffs)
    # full has radius 2n; keep |k|_inf <= n
    sl = tuple(slice(n, 3 * n + 1) for _ in range(u.dim))
    return SpectralFunction._derived(u.dim, n, full[sl], u.real_valued and v.real_valued)


def axpy(alpha: complex, u: SpectralFunction, v: SpectralFunction) -> SpectralFunction:
    """Coefficientwise ``alpha * u + v`` on the larger lattice."""
    n = _common(u, v)
    arr = alpha * u.resize(n).coeffs + v.resize(n).coeffs
    rv = u.real_valued and v.real_valued and np.imag(alpha) == 0
    return SpectralFunction._derived(u.dim, n, arr, rv)

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nashmoser.scale import SpectralFunction, axpy, bracket, pointwise_product, sobolev_norm


def mode(k, nmax=8, dim=1, amp=1.0):
    return SpectralFunction.from_modes(dim, nmax, {k: amp})


def random_function(seed, dim=1, nmax=12, real=True):
    r = np.random.default_rng(seed)
    shape = (2 * nmax + 1,) * dim
    u = SpectralFunction(dim, nmax, r.standard_normal(shape) + 1j * r.standard_normal(shape))
    return u.project_real() if real else u


class TestNormExamples:
    def test_single_mode(self):
        assert sobolev_norm(mode(3), 1.0) == pytest.approx(math.sqrt(10), rel=1e-15)

    def test_zero(self):
        for a in (0.0, 0.5, 7.0):
            assert sobolev_norm(SpectralFunction.zeros(1, 5), a) == 0.0

    def test_two_modes(self):
        u = SpectralFunction.from_modes(1, 8, {1: 1.0, 2: 1.0})
        assert u.norm(1) == pytest.approx(math.sqrt(7), rel=1e-15)

    def test_two_dimensional_bracket(self):
        # <(1, 2)> = sqrt(6)
        u = SpectralFunction.from_modes(2, 4, {(1, 2): 2.0})
        assert u.norm(1) == pytest.approx(2 * math.sqrt(6), rel=1e-15)

    def test_negative_exponent_rejected(self):
        with pytest.raises(ValueError):
            sobolev_norm(mode(1), -0.5)

    def test_bracket_definition(self):
        br = bracket(1, 3)
        assert np.allclose(br, np.sqrt(1 + np.arange(-3, 4) ** 2.0))


class TestConstruction:
    def test_shape_checked(self):
        with pytest.raises(ValueError):
            SpectralFunction(1, 3, np.zeros(5))

    def test_dimension_checked(self):
        with pytest.raises(ValueError):
            SpectralFunction.zeros(3, 2)

    def test_hermitian_checked(self):
        with pytest.raises(ValueError):
            SpectralFunction.from_modes(1, 4, {1: 1.0}, real_valued=True)

    def test_real_function_has_real_grid_values(self):
        u = SpectralFunction.from_modes(1, 4, {1: 1 + 2j, -1: 1 - 2j}, real_valued=True)
        x = 2 * np.pi * np.arange(16) / 16
        assert np.allclose(u.to_grid(16), 2 * np.cos(x) - 4 * np.sin(x))

    def test_modes_outside_lattice_dropped(self):
        u = SpectralFunction.from_modes(1, 2, {5: 1.0, 1: 2.0})
        assert u.coeff(1) == 2.0 and u.coeff(5) == 0.0

    def test_immutable(self):
        u = mode(1)
        with pytest.raises(ValueError):
            u.coeffs[0] = 1.0

    def test_json_roundtrip(self):
        u = random_function(3, dim=2, nmax=3)
        v = SpectralFunction.from_json(u.to_json())
        assert v.real_valued and np.array_equal(u.coeffs, v.coeffs)

    def test_resize_keeps_norm_when_growing(self):
        u = random_function(4)
        assert u.resize(20).norm(2) == pytest.approx(u.norm(2), rel=1e-14)


class TestProductExamples:
    def test_constant_is_identity(self):
        v = random_function(1)
        one = SpectralFunction.constant(1, 12, 1.0)
        assert np.allclose(pointwise_product(one, v).coeffs, v.coeffs, atol=1e-15)

    def test_mode_squared(self):
        out = pointwise_product(mode(1, nmax=4), mode(1, nmax=4))
        assert np.allclose(out.coeffs, mode(2, nmax=4).coeffs)

    def test_truncation(self):
        n = 6
        assert pointwise_product(mode(1, n), mode(n, n)).is_zero()

    def test_matches_physical_space_product(self):
        u, v = random_function(5, nmax=6), random_function(6, nmax=6)
        big_u, big_v = u.resize(12), v.resize(12)
        w = pointwise_product(big_u, big_v)
        assert np.allclose(w.to_grid(64), big_u.to_grid(64) * big_v.to_grid(64), atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            pointwise_product(mode(1), SpectralFunction.zeros(2, 8))


class TestAxpyExamples:
    def test_add_zero(self):
        u = random_function(2)
        assert np.array_equal(axpy(1.0, u, SpectralFunction.zeros(1, 12)).coeffs, u.coeffs)

    def test_cancel(self):
        u = random_function(2)
        assert axpy(-1.0, u, u).is_zero()

    def test_three(self):
        assert np.allclose(axpy(2.0, mode(1), mode(1)).coeffs, mode(1, amp=3.0).coeffs)

    def test_result_on_larger_lattice(self):
        assert axpy(1.0, mode(1, nmax=3), mode(2, nmax=7)).nmax == 7


exponents = st.floats(min_value=0.0, max_value=6.0, allow_nan=False)


class TestProperties:
    @given(seed=st.integers(0, 10**6), a=exponents, b=exponents)
    def test_monotone_in_exponent(self, seed, a, b):
        u = random_function(seed, nmax=10)
        lo, hi = sorted((a, b))
        assert sobolev_norm(u, lo) <= sobolev_norm(u, hi)

    @given(seed=st.integers(0, 10**6), a=exponents, b=exponents, lam=st.floats(0.01, 0.99))
    def test_log_convex(self, seed, a, b, lam):
        u = random_function(seed, nmax=10)
        mid = sobolev_norm(u, lam * a + (1 - lam) * b)
        assert mid <= sobolev_norm(u, a) ** lam * sobolev_norm(u, b) ** (1 - lam) * (1 + 1e-12)

    @given(s1=st.integers(0, 10**6), s2=st.integers(0, 10**6), dim=st.sampled_from([1, 2]))
    def test_product_commutes(self, s1, s2, dim):
        u, v = random_function(s1, dim, 5), random_function(s2, dim, 5)
        assert np.allclose(pointwise_product(u, v).coeffs, pointwise_product(v, u).coeffs, rtol=0, atol=1e-12)

    @given(s=st.integers(0, 10**6))
    def test_product_associative_without_truncation(self, s):
        # supports of radius 3, lattice radius 9: no product leaves the lattice
        u, v, w = (random_function(s + i, 1, 3).resize(9) for i in range(3))
        left = pointwise_product(pointwise_product(u, v), w)
        right = pointwise_product(u, pointwise_product(v, w))
        assert np.max(np.abs(left.coeffs - right.coeffs)) <= 1e-12 * np.max(np.abs(left.coeffs))

    @given(s=st.integers(0, 10**6), alpha=st.floats(-3, 3).filter(lambda x: x == 0 or abs(x) > 1e-100))
    def test_axpy_linear_in_norm_zero(self, s, alpha):
        u = random_function(s)
        assert axpy(alpha, u, SpectralFunction.zeros(1, 12)).norm(0) == pytest.approx(abs(alpha) * u.norm(0), rel=1e-12, abs=1e-300)

    @given(s1=st.integers(0, 10**6), s2=st.integers(0, 10**6))
    def test_real_closed_under_product(self, s1, s2):
        w = pointwise_product(random_function(s1), random_function(s2))
        assert w.real_valued
        assert np.max(np.abs(w.to_grid(64).imag)) == 0.0

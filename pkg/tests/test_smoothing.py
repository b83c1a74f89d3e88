import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nashmoser.scale import SpectralFunction
from nashmoser.smoothing import (
    DoublyExponential,
    Dyadic,
    Geometric,
    ModeSet,
    Polynomial,
    SmoothingFamily,
    apply_R,
    apply_S,
    block_weights,
    bump_profile,
    default_jmax,
    measure_axiom_constants,
    measure_orthogonality,
    rows_to_csv,
    velocity_loss_exponent,
)

SHARP = SmoothingFamily("sharp", Dyadic())
SMOOTH = SmoothingFamily("smooth", Dyadic())


def mode(k, nmax=16):
    return SpectralFunction.from_modes(1, nmax, {k: 1.0})


def random_function(seed, dim=1, nmax=40):
    r = np.random.default_rng(seed)
    shape = (2 * nmax + 1,) * dim
    return SpectralFunction(dim, nmax, r.standard_normal(shape) + 1j * r.standard_normal(shape)).project_real()


class TestApplyExamples:
    def test_s1_kills_mode_three(self):
        assert apply_S(SHARP, 1, mode(3)).is_zero()

    def test_s2_keeps_mode_three(self):
        assert np.array_equal(apply_S(SHARP, 2, mode(3)).coeffs, mode(3).coeffs)

    def test_smooth_keeps_constants(self):
        c = SpectralFunction.constant(1, 16, 2.5)
        for j in range(6):
            assert np.array_equal(apply_S(SMOOTH, j, c).coeffs, c.coeffs)

    def test_r0_is_s1(self):
        assert np.array_equal(apply_R(SHARP, 0, mode(2)).coeffs, mode(2).coeffs)

    def test_r1_block(self):
        assert np.array_equal(apply_R(SHARP, 1, mode(3)).coeffs, mode(3).coeffs)
        assert apply_R(SHARP, 1, mode(1)).is_zero()

    def test_euclidean_threshold_in_2d(self):
        # |(3, 3)| = 4.24 > 4 although |k|_inf = 3
        u = SpectralFunction.from_modes(2, 8, {(3, 3): 1.0})
        assert apply_S(SHARP, 2, u).is_zero()
        assert not apply_S(SHARP, 3, u).is_zero()

    def test_negative_index(self):
        with pytest.raises(ValueError):
            apply_S(SHARP, -1, mode(1))


class TestProfile:
    def test_plateau_and_support(self):
        assert np.all(bump_profile(np.linspace(0, 1, 11)) == 1.0)
        assert np.all(bump_profile(np.linspace(2, 9, 11)) == 0.0)

    def test_range_and_monotone(self):
        t = np.linspace(0, 2.5, 2001)
        v = bump_profile(t)
        assert np.all((v >= 0) & (v <= 1))
        assert np.all(np.diff(v) <= 0)

    def test_symmetry_about_midpoint(self):
        t = np.linspace(1.01, 1.99, 50)
        assert np.allclose(bump_profile(t) + bump_profile(3 - t), 1.0)


velocities = st.sampled_from([Dyadic(), Geometric(1.5), Polynomial(1.0, 0.5), Polynomial(4.0, 0.5), DoublyExponential(2.0, 1.5)])


class TestVelocities:
    @given(vel=velocities, j=st.integers(0, 12))  # theta0^(chi^j) overflows doubles near j = 18
    def test_strictly_increasing(self, vel, j):
        assert vel.theta(j + 1) > vel.theta(j)

    @given(vel=velocities, j=st.integers(1, 12))
    def test_inverse(self, vel, j):
        assert vel.inverse(float(vel.theta(j))) == pytest.approx(j, rel=1e-9)

    def test_invalid(self):
        with pytest.raises(ValueError):
            Geometric(1.0)
        with pytest.raises(ValueError):
            DoublyExponential(1.0, 2.0)

    def test_first_index_covering(self):
        for fam in (SHARP, SmoothingFamily("sharp", Polynomial(1.0, 0.5))):
            for kk in (0.5, 1.0, 3.0, 17.0, 100.0):
                j = fam.first_index_covering(kk)
                assert fam.theta(j) >= kk and (j == 0 or fam.theta(j - 1) < kk)

    def test_default_jmax(self):
        assert default_jmax(SHARP, 4096) == 11  # theta_12 = 4096


families = st.sampled_from([SHARP, SMOOTH, SmoothingFamily("smooth", Geometric(1.5)), SmoothingFamily("sharp", Polynomial(1.0, 0.5))])


class TestProperties:
    @given(fam=families, k=st.integers(0, 8), seed=st.integers(0, 10**6))
    def test_telescoping(self, fam, k, seed):
        u = random_function(seed)
        total = apply_R(fam, 0, u)
        for j in range(1, k + 1):
            total = total + apply_R(fam, j, u)
        err = np.max(np.abs(total.coeffs - apply_S(fam, k + 1, u).coeffs))
        tol = 0.0 if fam.shape == "sharp" else 1e-12 * np.max(np.abs(u.coeffs))
        assert err <= tol

    @given(j=st.integers(0, 7), seed=st.integers(0, 10**6))
    def test_sharp_idempotent(self, j, seed):
        u = random_function(seed)
        once = apply_S(SHARP, j, u)
        assert np.array_equal(apply_S(SHARP, j, once).coeffs, once.coeffs)

    @given(seed=st.integers(0, 10**6), a=st.floats(0, 4), dim=st.sampled_from([1, 2]))
    def test_sharp_orthogonality_exact(self, seed, a, dim):
        u = random_function(seed, dim, 20 if dim == 1 else 8)
        assert measure_orthogonality(SHARP, [u], a) == pytest.approx(1.0, abs=1e-12)

    def test_s3_single_modes_brute_force(self):
        # ||u - S_j u||_b <= 2^{-j(a-b)} ||u - S_j u||_a for a > b, constant 1
        a, b = 3.0, 1.0
        for j in range(10):
            for k in range(0, 1025):
                if k <= 2**j:
                    continue
                br = math.sqrt(1 + k * k)
                assert br**b <= 2.0 ** (-j * (a - b)) * br**a


def brute_force_axioms(a, b, nmax, jmax):
    """Independent loop over single modes and j for the sharp dyadic family."""
    best = {"S1": 0.0, "S2": 0.0, "S3": 0.0, "S4": 0.0}
    ks = np.arange(0, nmax + 1)
    br = np.sqrt(1.0 + ks**2)
    for j in range(jmax + 1):
        t0, t1 = 2.0**j, 2.0 ** (j + 1)
        inside, outside = ks <= t0, ks > t0
        block = (ks > t0) & (ks <= t1)
        best["S1"] = max(best["S1"], 1.0 if inside.any() else 0.0)
        if inside.any():
            best["S2"] = max(best["S2"], np.max(br[inside] ** (b - a)) / 2.0 ** (j * (b - a)))
        if outside.any():
            best["S3"] = max(best["S3"], np.max(br[outside] ** (a - b)) / 2.0 ** (-j * (b - a)))
        if block.any():
            up = np.max(br[block] ** (b - a)) / 2.0 ** (j * (b - a))
            down = np.max(br[block] ** (a - b)) / 2.0 ** (-j * (b - a))
            best["S4"] = max(best["S4"], up, down)
    return best


class TestAxiomConstants:
    def test_matches_brute_force(self):
        a, b, nmax = 0.0, 2.0, 512
        got = measure_axiom_constants(SHARP, ModeSet(1, nmax), a, b)
        want = brute_force_axioms(a, b, nmax, got.jmax)
        for key in want:
            assert getattr(got, f"C_{key}") == pytest.approx(want[key], rel=1e-12)

    def test_sharp_s1_is_one(self):
        got = measure_axiom_constants(SHARP, [random_function(s) for s in range(5)], 0.0, 1.0)
        assert got.C_S1 <= 1.0 + 1e-15

    def test_s4_bounded_by_block_geometry(self):
        a, b = 1.0, 3.0
        got = measure_axiom_constants(SHARP, ModeSet(1, 4096), a, b)
        assert got.C_S4 <= 5.0 ** ((b - a) / 2) + 1e-12  # <2>^{b-a} from the first block

    def test_requires_distinct_exponents(self):
        with pytest.raises(ValueError):
            measure_axiom_constants(SHARP, ModeSet(1, 16), 1.0, 1.0)

    def test_empty_testset(self):
        with pytest.raises(ValueError):
            measure_axiom_constants(SHARP, [], 0.0, 1.0)
        with pytest.raises(ValueError):
            measure_orthogonality(SHARP, [SpectralFunction.zeros(1, 4)], 0.0)

    def test_polynomial_velocity_trend(self):
        # slow velocity: 2^{j(b-a)} outruns the cutoff theta_j = sqrt(1+j), so the
        # Bernstein-type ratio decays with j while C_S3 blows up
        fam = SmoothingFamily("sharp", Polynomial(1.0, 0.5))
        small = measure_axiom_constants(fam, ModeSet(1, 64), 0.0, 2.0, jmax=6)
        large = measure_axiom_constants(fam, ModeSet(1, 64), 0.0, 2.0, jmax=10)
        assert large.C_S3 > 10 * small.C_S3
        assert large.C_S2 == small.C_S2

    def test_csv(self):
        got = measure_axiom_constants(SHARP, ModeSet(1, 32), 0.0, 1.0)
        text = rows_to_csv(SHARP, got.rows)
        lines = text.strip().splitlines()
        assert lines[0] == "family,velocity,axiom,a,b,j,ratio"
        assert len(lines) == 1 + len(got.rows)


class TestOrthogonality:
    def test_block_weights_sharp(self):
        assert np.allclose(block_weights(SHARP, np.arange(0, 300)), 1.0)

    def test_smooth_dyadic_bounded(self):
        assert measure_orthogonality(SMOOTH, ModeSet(1, 4096), 0.0) <= 3.0

    def test_smooth_polynomial_fails_and_grows(self):
        fam = SmoothingFamily("smooth", Polynomial(1.0, 0.5))
        r = [measure_orthogonality(fam, ModeSet(1, k, kmin=k), 0.0) for k in (256, 1024, 4096)]
        assert r[-1] > 10
        assert r[0] < r[1] < r[2]

    def test_block_weights_match_direct_sum(self):
        fam = SmoothingFamily("smooth", Geometric(1.5))
        kk = 37.0
        direct = sum(float(fam.r_multiplier(j, kk)) ** 2 for j in range(60))
        assert block_weights(fam, [kk])[0] == pytest.approx(direct, rel=1e-13)


class TestVelocityExponent:
    def test_geometric(self):
        fit = velocity_loss_exponent(SmoothingFamily("smooth", Geometric(2.0)), 0.0, 3.0, range(3, 10))
        assert abs(fit.sigma) <= 0.05

    def test_doubly_exponential(self):
        chi = 1.5
        fit = velocity_loss_exponent(SmoothingFamily("smooth", DoublyExponential(2.0, chi)), 0.0, 3.0, range(3, 7))
        assert fit.sigma >= 0.9 * (chi - 1) * (3 - 1)

    def test_polynomial(self):
        js = [60, 120, 250, 500, 1000, 2000, 4000, 8000, 16000]
        fit = velocity_loss_exponent(SmoothingFamily("smooth", Polynomial(4.0, 0.5)), 0.0, 3.0, js)
        assert abs(fit.sigma) <= 0.05

    def test_needs_four_points(self):
        with pytest.raises(ValueError):
            velocity_loss_exponent(SMOOTH, 0.0, 3.0, range(3, 6))

    def test_needs_gap(self):
        with pytest.raises(ValueError):
            velocity_loss_exponent(SMOOTH, 0.0, 1.0, range(3, 9))

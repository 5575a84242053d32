import math
import warnings

import numpy as np
import pytest

from heatsource.errors import DomainError, TruncationWarning
from heatsource.kernels import (DEFAULT_TRUNCATION, Eigenvalue,
                                TruncationPolicy, exp_moment,
                                exp_moment_stack, greens_function,
                                sine_moment, sine_moment_stack, source_kernel)
from oracles import (mp_exp_moment, mp_sine_moment, quad_exp_moment,
                     quad_sine_moment, reference_green)
from scipy import integrate

L = 2.0 * math.pi
TR = TruncationPolicy()


class TestTruncationPolicy:
    def test_defaults(self):
        assert DEFAULT_TRUNCATION.tol == 1e-12
        assert DEFAULT_TRUNCATION.max_terms == 10_000

    def test_invalid(self):
        with pytest.raises(ValueError):
            TruncationPolicy(tol=0.0)
        with pytest.raises(ValueError):
            TruncationPolicy(max_terms=0)

    def test_max_terms_warning(self):
        tight = TruncationPolicy(tol=1e-12, max_terms=3)
        with pytest.warns(TruncationWarning):
            greens_function(1.0, 2.0, 0.01, L, tight)

    def test_mode_count_is_first_below_tol(self):
        from heatsource.kernels import mode_count

        rng = np.random.default_rng(8)
        for _ in range(50):
            amp = 10.0 ** rng.uniform(-6, 9)
            t = rng.uniform(0.01, 3.0)
            tol = 10.0 ** rng.uniform(-14, -6)
            n = mode_count(amp, t, L, TruncationPolicy(tol=tol))
            bound = lambda k: amp * math.exp(-((k * math.pi / L) ** 2) * t)
            assert bound(n) <= tol * (1.0 + 1e-9)
            if n > 1:
                assert bound(n - 1) > tol * (1.0 - 1e-9)


class TestEigenvalue:
    def test_exact_rate(self):
        for n in (1, 2, 17, 500):
            ev = Eigenvalue.for_mode(n, L)
            assert ev.index == n
            assert ev.value == n * math.pi / L

    def test_invalid(self):
        with pytest.raises(ValueError):
            Eigenvalue.for_mode(0, L)
        with pytest.raises(DomainError):
            Eigenvalue.for_mode(1, -1.0)


class TestGreensFunction:
    def test_symmetry_random_triples(self):
        rng = np.random.default_rng(101)
        for _ in range(100):
            x, xi = rng.uniform(0.0, L, size=2)
            t = rng.uniform(0.05, 2.0)
            a = greens_function(x, xi, t, L, TR)
            b = greens_function(xi, x, t, L, TR)
            assert a == pytest.approx(b, abs=1e-15)

    def test_boundary_annihilation(self):
        for t in (0.02, 0.5, 2.0):
            for xi in (0.7, math.pi, 5.1):
                assert greens_function(0.0, xi, t, L, TR) == 0.0
                assert greens_function(L, xi, t, L, TR) == 0.0
                assert source_kernel(0.0, t, L, TR) == 0.0
                assert source_kernel(L, t, L, TR) == 0.0

    def test_against_reference_partial_sum(self):
        got = greens_function(math.pi, math.pi / 2, 0.5, L,
                              TruncationPolicy(tol=1e-12))
        ref = reference_green(math.pi, math.pi / 2, 0.5, L, terms=10_000)
        assert got == pytest.approx(ref, abs=1e-10)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            greens_function(-0.1, 1.0, 0.5, L, TR)
        with pytest.raises(DomainError):
            greens_function(1.0, L + 0.1, 0.5, L, TR)
        with pytest.raises(DomainError):
            greens_function(1.0, 1.0, 0.0, L, TR)
        with pytest.raises(DomainError):
            source_kernel(1.0, -0.5, L, TR)


class TestSourceKernel:
    def test_mirror_symmetry(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            x = rng.uniform(0.0, L)
            t = rng.uniform(0.02, 2.0)
            a = source_kernel(x, t, L, TR)
            b = source_kernel(L - x, t, L, TR)
            assert a == pytest.approx(b, rel=1e-12, abs=1e-13)

    def test_matches_quadrature_of_green(self):
        # Kernel consistency on a 10x10 grid against an adaptive-quadrature
        # oracle integrating the propagator over the source coordinate.
        xs = np.linspace(0.3, L - 0.3, 10)
        ts = np.geomspace(0.02, 2.0, 10)
        for x in xs:
            for t in ts:
                ref, _ = integrate.quad(
                    lambda xi: greens_function(x, xi, t, L, TR), 0.0, L,
                    epsabs=1e-11, epsrel=1e-11, limit=200)
                got = source_kernel(x, t, L, TR)
                assert got == pytest.approx(ref, abs=1e-8)

    def test_positive_at_moderate_times(self):
        for x in np.linspace(0.05, L - 0.05, 40):
            for t in np.geomspace(0.01, 2.0, 12):
                assert source_kernel(x, t, L, TR) > 0.0


class TestSineMoment:
    def test_lowest_moment_closed_form(self):
        for n in range(1, 13):
            expected = L * (1.0 - (-1.0) ** n) / (n * math.pi)
            assert sine_moment(1, n, L) == pytest.approx(expected, abs=1e-15)

    def test_hand_value(self):
        # integral of xi*sin(xi) over [0, pi] equals pi
        assert sine_moment(2, 1, math.pi) == pytest.approx(math.pi, rel=1e-14)

    def test_against_quadrature_sweep(self):
        for m in range(1, 13):
            for n in range(1, 51):
                got = sine_moment(m, n, L)
                ref = quad_sine_moment(m, n, L)
                assert got == pytest.approx(ref, rel=1e-10, abs=1e-10), \
                    f"m={m} n={n}"

    def test_against_mpmath_spots(self):
        for m, n in ((12, 1), (12, 50), (7, 13)):
            got = sine_moment(m, n, L)
            ref = mp_sine_moment(m, n, L)
            assert got == pytest.approx(ref, rel=1e-12)

    def test_stack_matches_scalar(self):
        modes = np.arange(1, 21)
        stack = sine_moment_stack(11, modes, L)
        for m in (1, 5, 12):
            for j, n in enumerate(modes):
                assert stack[m - 1, j] == sine_moment(int(m), int(n), L)

    def test_validation(self):
        with pytest.raises(ValueError):
            sine_moment(0, 1, L)
        with pytest.raises(ValueError):
            sine_moment(1, 0, L)
        with pytest.raises(DomainError):
            sine_moment(1, 1, 0.0)


class TestExpMoment:
    def test_first_moment_closed_form(self):
        for c in (0.25, 2.0, 40.0):
            for t in (0.02, 1.0, 2.0):
                expected = -math.expm1(-c * t) / c
                assert exp_moment(1, c, t) == pytest.approx(expected, rel=1e-14)

    def test_zero_interval(self):
        for k in (1, 3, 9):
            assert exp_moment(k, 4.0, 0.0) == 0.0

    def test_spot_against_mpmath(self):
        got = exp_moment(3, 4.0, 2.0)
        ref = mp_exp_moment(3, 4.0, 2.0)
        assert got == pytest.approx(ref, abs=1e-10, rel=1e-12)

    def test_against_quadrature_sweep(self):
        # All k <= 12 against the spatial rates of the first 50 modes at
        # several times, including the small-argument regime where the bare
        # forward recurrence would lose every digit.
        for k in range(1, 13):
            for n in range(1, 51):
                lam_sq = (n * math.pi / L) ** 2
                for t in (0.02, 0.5, 2.0):
                    got = exp_moment(k, lam_sq, t)
                    ref = quad_exp_moment(k, lam_sq, t)
                    assert got == pytest.approx(ref, rel=1e-10, abs=1e-300), \
                        f"k={k} n={n} t={t}"

    def test_hybrid_switch_continuity(self):
        # Values just below and above the series/recurrence switch must both
        # match the high-precision oracle.
        for k in (6, 12, 16):
            switch = max(30.0, 2.0 * (k - 1))
            for a in (switch * 0.98, switch * 1.02):
                t = 2.0
                c = a / t
                got = exp_moment(k, c, t)
                ref = mp_exp_moment(k, c, t)
                assert got == pytest.approx(ref, rel=1e-12)

    def test_bounds(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            k = int(rng.integers(1, 13))
            c = float(rng.uniform(0.05, 100.0))
            t = float(rng.uniform(0.0, 3.0))
            val = exp_moment(k, c, t)
            assert 0.0 <= val <= t ** (k - 1) * t + 1e-300

    def test_stack_matches_scalar(self):
        lam_sq = np.array([0.25, 2.25, 42.0])
        ts = np.array([0.02, 1.3])
        stack = exp_moment_stack(8, lam_sq, ts)
        for p in (0, 3, 8):
            for i, c in enumerate(lam_sq):
                for j, t in enumerate(ts):
                    assert stack[p, i, j] == exp_moment(p + 1, float(c), float(t))

    def test_validation(self):
        with pytest.raises(ValueError):
            exp_moment(0, 1.0, 1.0)
        with pytest.raises(ValueError):
            exp_moment(1, 0.0, 1.0)
        with pytest.raises(DomainError):
            exp_moment(1, 1.0, -0.1)


def test_no_warning_under_default_policy():
    with warnings.catch_warnings():
        warnings.simplefilter("error", TruncationWarning)
        greens_function(1.0, 2.0, 0.02, L, TR)
        source_kernel(1.0, 0.02, L, TR)

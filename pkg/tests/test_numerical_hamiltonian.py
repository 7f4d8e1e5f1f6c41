"""Tests for the two-slot numerical fluxes, time-step bounds, and the
randomized monotonicity verifier."""

import numpy as np
import pytest

from torushj.errors import CflViolation, ParameterError
from torushj.hamiltonians import quadratic_hamiltonian, smoothed_norm_hamiltonian
from torushj.numhamil import (
    NumericalHamiltonian,
    cfl_bound,
    lax_friedrichs,
    separable_1d,
    suggest_alpha,
    verify_monotone_update,
)


QUAD = quadratic_hamiltonian(1.0)


class TestLaxFriedrichs:
    def test_value_frozen_examples(self):
        F = lax_friedrichs(QUAD, alpha=1.0)
        z = np.zeros(1)
        assert F.value(z, z) == pytest.approx(0.0)
        # consistency slot: F(-p, p) = H(p)
        p = np.array([1.0])
        assert F.value(-p, p) == pytest.approx(0.5)
        # DERIVED: H(0) + 1 * (1 + 1) = 2
        one = np.ones(1)
        assert F.value(one, one) == pytest.approx(2.0)

    def test_consistency_on_random_slopes(self):
        rng = np.random.default_rng(0)
        for H in (QUAD, smoothed_norm_hamiltonian(1.0)):
            F = lax_friedrichs(H, alpha=0.7)
            p = rng.uniform(-2, 2, size=(1000, 2))
            np.testing.assert_allclose(F.value(-p, p), H.value(p), atol=1e-12)

    def test_partial_sum_is_constant_2_d_alpha(self):
        # The LF partials sum to 2*d*alpha identically, independent of slopes.
        rng = np.random.default_rng(1)
        for dim in (1, 2):
            F = lax_friedrichs(QUAD, alpha=0.8)
            p = rng.uniform(-3, 3, size=(500, dim))
            q = rng.uniform(-3, 3, size=(500, dim))
            total = np.sum(F.partial_p(p, q) + F.partial_q(p, q), axis=-1)
            np.testing.assert_allclose(total, 2 * dim * 0.8, atol=1e-12)

    def test_partials_match_finite_differences(self):
        F = lax_friedrichs(QUAD, alpha=1.2)
        rng = np.random.default_rng(2)
        p = rng.uniform(-2, 2, size=(40, 2))
        q = rng.uniform(-2, 2, size=(40, 2))
        eps = 1e-6
        for i in range(2):
            e = np.zeros(2)
            e[i] = eps
            fd_p = (F.value(p + e, q) - F.value(p - e, q)) / (2 * eps)
            fd_q = (F.value(p, q + e) - F.value(p, q - e)) / (2 * eps)
            np.testing.assert_allclose(F.partial_p(p, q)[:, i], fd_p, atol=1e-6)
            np.testing.assert_allclose(F.partial_q(p, q)[:, i], fd_q, atol=1e-6)

    def test_partials_nonnegative_when_alpha_dominates(self):
        # alpha >= max |H'| / 2 over the slope box makes both partials >= 0.
        R = 1.5
        F = lax_friedrichs(QUAD, alpha=suggest_alpha(QUAD, R))
        rng = np.random.default_rng(3)
        p = rng.uniform(-R, R, size=(2000, 1))
        q = rng.uniform(-R, R, size=(2000, 1))
        assert np.all(F.partial_p(p, q) >= -1e-12)
        assert np.all(F.partial_q(p, q) >= -1e-12)

    def test_rejects_nonpositive_alpha(self):
        with pytest.raises(ParameterError):
            lax_friedrichs(QUAD, alpha=0.0)


class TestSeparable:
    def test_value_frozen_examples(self):
        F = separable_1d(QUAD)
        # both slopes favorable: flux vanishes
        assert F.value(np.array([-1.0]), np.array([-1.0])) == pytest.approx(0.0)
        # consistency slot: F(-2, 2) = H(2) = 2
        assert F.value(np.array([-2.0]), np.array([2.0])) == pytest.approx(2.0)
        # only the p slot active: F1(1) = H(-1) = 0.5
        assert F.value(np.array([1.0]), np.array([0.0])) == pytest.approx(0.5)

    def test_consistency_on_random_slopes(self):
        F = separable_1d(QUAD)
        p = np.random.default_rng(4).uniform(-3, 3, size=(1000, 1))
        np.testing.assert_allclose(F.value(-p, p), QUAD.value(p), atol=1e-12)

    def test_requires_zero_minimum_at_origin(self):
        # H(0) != min H: a shifted quadratic is rejected.
        H = quadratic_hamiltonian(1.0)
        bad = type(H)(
            value=lambda p: H.value(np.asarray(p) - 1.0),
            grad=lambda p: H.grad(np.asarray(p) - 1.0),
            legendre=H.legendre,
            legendre_grad=H.legendre_grad,
            growth_tag="quadratic",
        )
        with pytest.raises(ParameterError):
            separable_1d(bad)

    def test_partials_nonnegative_everywhere(self):
        F = separable_1d(QUAD)
        rng = np.random.default_rng(5)
        p = rng.uniform(-3, 3, size=(2000, 1))
        q = rng.uniform(-3, 3, size=(2000, 1))
        assert np.all(F.partial_p(p, q) >= -1e-12)
        assert np.all(F.partial_q(p, q) >= -1e-12)


class TestAlphaAndCfl:
    def test_suggest_alpha_frozen_examples(self):
        # DERIVED: max |H'(p)| / 2 over [-R, R] for the quadratic family.
        assert suggest_alpha(quadratic_hamiltonian(1.0), 1.0) == pytest.approx(0.5)
        assert suggest_alpha(quadratic_hamiltonian(2.0), 1.0) == pytest.approx(1.0)

    def test_suggest_alpha_small_box(self):
        a = suggest_alpha(QUAD, 1e-8)
        assert 0 < a < 1e-7

    def test_cfl_frozen_example_lax_friedrichs(self):
        # LF partials sum to 2*alpha in 1-d, so M_F = 1 for alpha = 0.5.
        F = lax_friedrichs(QUAD, alpha=0.5)
        b = cfl_bound(F, R=1.0, h=0.01)
        assert b.M_F == pytest.approx(1.0)
        assert b.dt_max == pytest.approx(0.01)

    def test_cfl_scales_linearly_in_h(self):
        F = lax_friedrichs(QUAD, alpha=0.5)
        b1 = cfl_bound(F, R=1.0, h=0.02)
        b2 = cfl_bound(F, R=1.0, h=0.01)
        assert b1.dt_max == pytest.approx(2 * b2.dt_max)

    def test_cfl_degenerate_flux_gives_infinite_bound(self):
        zero = NumericalHamiltonian(
            value=lambda p, q: np.zeros(np.asarray(p).shape[:-1]),
            partial_p=lambda p, q: np.zeros_like(np.asarray(p, dtype=float)),
            partial_q=lambda p, q: np.zeros_like(np.asarray(q, dtype=float)),
            base=QUAD,
            kind="test",
        )
        assert cfl_bound(zero, R=1.0, h=0.1).dt_max == np.inf

    def test_cfl_rejects_bad_inputs(self):
        F = lax_friedrichs(QUAD, alpha=0.5)
        with pytest.raises(ParameterError):
            cfl_bound(F, R=0.0, h=0.1)
        with pytest.raises(ParameterError):
            cfl_bound(F, R=1.0, h=-0.1)


class TestMonotonicityVerifier:
    def test_no_violations_under_cfl_for_both_fluxes(self):
        R, h = 1.0, 1 / 64
        rng = np.random.default_rng(6)
        for F in (lax_friedrichs(QUAD, suggest_alpha(QUAD, R) * 1.01), separable_1d(QUAD)):
            dt = 0.9 * cfl_bound(F, R, h).dt_max
            rep = verify_monotone_update(F, R, h, dt, trials=2000, rng=rng)
            assert rep.trials == 2000
            assert rep.violations == 0

    def test_rejects_time_step_beyond_bound(self):
        F = lax_friedrichs(QUAD, alpha=0.5)
        dt_max = cfl_bound(F, R=1.0, h=0.01).dt_max
        with pytest.raises(CflViolation) as exc:
            verify_monotone_update(F, 1.0, 0.01, 2 * dt_max, trials=10)
        assert exc.value.dt_max == pytest.approx(dt_max)

    def test_zero_trials_is_empty_report(self):
        F = lax_friedrichs(QUAD, alpha=0.5)
        rep = verify_monotone_update(F, 1.0, 0.01, 0.005, trials=0)
        assert (rep.trials, rep.violations, rep.max_violation) == (0, 0, 0.0)

    def test_two_dimensional_lax_friedrichs(self):
        R, h = 1.0, 1 / 32
        F = lax_friedrichs(QUAD, suggest_alpha(QUAD, R, dim=2) * 1.01)
        dt = 0.9 * cfl_bound(F, R, h, dim=2).dt_max
        rep = verify_monotone_update(F, R, h, dt, trials=500, dim=2)
        assert rep.violations == 0

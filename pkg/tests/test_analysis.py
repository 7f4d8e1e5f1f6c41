"""Tests for norms, rate fits, and structural estimators."""

import numpy as np
import pytest

from torushj.analysis import (
    ErrorReport,
    adjoint_pairing_gap,
    fd_gap_l1,
    hessian_tv_estimate,
    interpolation_check,
    lipschitz_estimate,
    lp_error,
    rate_fit,
    semiconcavity_estimate,
)
from torushj.errors import ParameterError
from torushj.grid import GridFunction, make_grid, sample
from torushj.hamiltonians import cosine_datum, tent_datum


def _gf(grid, vals):
    return GridFunction(grid, np.asarray(vals, dtype=float))


class TestLpError:
    def test_single_node_difference_frozen_example(self):
        # DERIVED: one node differs by 1 on a 4-node grid (weight 1/4).
        grid = make_grid(1, 4)
        a = _gf(grid, [0, 0, 0, 0])
        b = _gf(grid, [1, 0, 0, 0])
        assert lp_error(a, b, 1.0) == pytest.approx(0.25)
        assert lp_error(a, b, 2.0) == pytest.approx(0.5)
        assert lp_error(a, b, np.inf) == pytest.approx(1.0)

    def test_constant_difference_gives_same_value_in_every_norm(self):
        grid = make_grid(2, 8)
        a = _gf(grid, np.zeros(grid.shape))
        b = _gf(grid, np.full(grid.shape, 2.0))
        for p in (1.0, 2.0, 4.0, np.inf):
            assert lp_error(a, b, p) == pytest.approx(2.0)

    def test_metric_axioms_on_random_triples(self):
        rng = np.random.default_rng(0)
        grid = make_grid(1, 16)
        for _ in range(50):
            a = _gf(grid, rng.normal(size=grid.shape))
            b = _gf(grid, rng.normal(size=grid.shape))
            c = _gf(grid, rng.normal(size=grid.shape))
            for p in (1.0, 2.0, np.inf):
                dab = lp_error(a, b, p)
                assert dab == pytest.approx(lp_error(b, a, p))
                assert dab <= lp_error(a, c, p) + lp_error(c, b, p) + 1e-12
            assert lp_error(a, a, 2.0) == 0.0

    def test_norms_are_ordered_in_p(self):
        rng = np.random.default_rng(1)
        grid = make_grid(1, 32)
        a = _gf(grid, rng.normal(size=grid.shape))
        b = _gf(grid, rng.normal(size=grid.shape))
        errs = [lp_error(a, b, p) for p in (1.0, 2.0, 4.0, np.inf)]
        assert errs == sorted(errs)

    def test_input_validation(self):
        a = _gf(make_grid(1, 4), np.zeros(4))
        b = _gf(make_grid(1, 8), np.zeros(8))
        with pytest.raises(ParameterError):
            lp_error(a, b, 1.0)
        with pytest.raises(ParameterError):
            lp_error(a, a, 0.5)


class TestRateFit:
    def test_exact_power_law_recovered(self):
        eps = np.array([0.1, 0.05, 0.025, 0.0125])
        for order, c in ((1.0, 3.0), (0.5, 0.7), (2.0, 10.0)):
            pairs = list(zip(eps, c * eps**order))
            slope, intercept, r2 = rate_fit(pairs)
            assert slope == pytest.approx(order, abs=1e-12)
            assert intercept == pytest.approx(np.log(c), abs=1e-12)
            assert r2 == pytest.approx(1.0)

    def test_hand_computed_noisy_fit(self):
        # DERIVED: 2x2 normal equations solved by hand for three points.
        pairs = [(1.0, 1.0), (0.5, 0.6), (0.25, 0.3)]
        x = np.log([1.0, 0.5, 0.25])
        y = np.log([1.0, 0.6, 0.3])
        n = 3
        sx, sy, sxx, sxy = x.sum(), y.sum(), (x * x).sum(), (x * y).sum()
        slope_hand = (n * sxy - sx * sy) / (n * sxx - sx * sx)
        slope, _, r2 = rate_fit(pairs)
        assert slope == pytest.approx(slope_hand, abs=1e-12)
        assert 0.9 < r2 <= 1.0

    def test_rejects_bad_level_sequences(self):
        with pytest.raises(ParameterError):
            rate_fit([(0.1, 1.0), (0.2, 0.5), (0.05, 0.2)])  # not decreasing
        with pytest.raises(ParameterError):
            rate_fit([(0.1, 1.0), (0.05, 0.5)])  # too few levels
        with pytest.raises(ParameterError):
            rate_fit([(0.1, 0.0), (0.05, 0.0), (0.025, 0.0)])  # all zero


class TestStructuralEstimators:
    def test_constant_has_zero_estimates(self):
        grid = make_grid(1, 16)
        v = _gf(grid, np.full(grid.shape, 3.0))
        assert semiconcavity_estimate(v) == pytest.approx(0.0)
        assert lipschitz_estimate(v) == pytest.approx(0.0)
        assert hessian_tv_estimate(v) == pytest.approx(0.0)

    def test_cosine_semiconcavity_matches_curvature(self):
        # max second difference quotient of cos(2 pi x) -> (2 pi)^2.
        v = sample(make_grid(1, 64), cosine_datum(1.0).value)
        assert semiconcavity_estimate(v) == pytest.approx((2 * np.pi) ** 2, rel=0.05)

    def test_kinked_profile_frozen_example(self):
        # DERIVED by hand: v = -(torus distance to 1/2)^2 on I = 8.  The
        # convex kink at x = 0 gives quotient (v(h)+v(-h)-2v(0))/h^2 = 14.
        grid = make_grid(1, 8)

        def v_fun(x):
            d = np.abs(np.asarray(x)[..., 0] - 0.5)
            d = np.minimum(d, 1.0 - d)
            return -(d**2)

        v = sample(grid, v_fun)
        assert semiconcavity_estimate(v) == pytest.approx(14.0, abs=1e-12)

    def test_lipschitz_of_tent_is_exactly_four(self):
        v = sample(make_grid(1, 32), tent_datum(1.0).value)
        assert lipschitz_estimate(v) == pytest.approx(4.0, abs=1e-12)

    def test_hessian_tv_of_cosine(self):
        # int |(2 pi)^2 cos| = 8 pi.
        v = sample(make_grid(1, 128), cosine_datum(1.0).value)
        assert hessian_tv_estimate(v) == pytest.approx(8 * np.pi, rel=0.03)

    def test_fd_gap_halves_on_tent_kinks(self):
        # DERIVED: gap = h * (|slope jump at 1/2| + |jump at 0|) / 2 = 8 h.
        for nodes in (16, 32, 64, 128):
            v = sample(make_grid(1, nodes), tent_datum(1.0).value)
            assert fd_gap_l1(v)[0] == pytest.approx(8.0 / nodes, abs=1e-12)

    def test_adjoint_pairing_gap_is_roundoff(self):
        rng = np.random.default_rng(2)
        grid = make_grid(2, 12)
        v = _gf(grid, rng.normal(size=grid.shape))
        w = _gf(grid, rng.normal(size=grid.shape))
        assert adjoint_pairing_gap(v, w) < 1e-9


class TestInterpolationCheck:
    def test_exact_inequality_on_random_differences(self):
        rng = np.random.default_rng(3)
        grid = make_grid(1, 64)
        zero = _gf(grid, np.zeros(grid.shape))
        for _ in range(100):
            a = _gf(grid, rng.normal(size=grid.shape))
            l1 = lp_error(a, zero, 1.0)
            linf = lp_error(a, zero, np.inf)
            for p in (2.0, 4.0):
                assert interpolation_check(l1, linf, lp_error(a, zero, p), p)

    def test_violation_detected(self):
        assert not interpolation_check(0.01, 1.0, 0.5, 2.0)  # 0.5 > 0.1

    def test_rejects_endpoint_p(self):
        with pytest.raises(ParameterError):
            interpolation_check(1.0, 1.0, 1.0, 1.0)
        with pytest.raises(ParameterError):
            interpolation_check(1.0, 1.0, 1.0, np.inf)


class TestErrorReport:
    def test_fit_and_csv_round_structure(self, tmp_path):
        rep = ErrorReport()
        for eps in (0.1, 0.05, 0.025):
            errs = {1.0: eps, 2.0: 1.5 * eps, 4.0: 2 * eps, np.inf: 3 * eps}
            rep.add_level(h=eps / 2, dt=eps / 2, errors=errs)
        fits = rep.fit_rates()
        assert fits[1.0]["slope"] == pytest.approx(1.0, abs=1e-12)
        path = tmp_path / "rates.csv"
        rep.write_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "level,h,dt,eps,L1,L2,L4,Linf"
        assert len([l for l in lines if not l.startswith("#")]) == 4
        assert any(l.startswith("# L1 ") for l in lines)

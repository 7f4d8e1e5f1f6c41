"""Tests for the semi-Lagrangian dynamic-programming solver."""

import numpy as np
import pytest

from torushj.analysis import lp_error
from torushj.errors import ControlBoxError, ParameterError
from torushj.grid import GridFunction, make_grid, sample
from torushj.hamiltonians import (
    InitialDatum,
    cosine_datum,
    cosine_potential,
    quadratic_hamiltonian,
    zero_potential,
)
from torushj.oracle import HopfLaxProblem, hopf_lax_grid
from torushj.sl import (
    SlParams,
    default_control_box,
    optimality_residual,
    sl_solve,
    sl_step,
    write_control_csv,
)

QUAD = quadratic_hamiltonian(1.0)
ZERO_V = zero_potential()


def _zero_datum():
    return InitialDatum(lambda x: np.zeros(np.asarray(x).shape[:-1]), 0.0, 0.0)


class TestSingleStep:
    def test_constant_terminal_state_is_preserved(self):
        # V = 0, L(0) = 0: the optimal control is 0 and the value is flat.
        grid = make_grid(1, 16)
        params = SlParams(grid, 0.05, 1, QUAD, ZERO_V, control_box=2.0)
        u = GridFunction(grid, np.full(grid.shape, 1.3))
        out, ctrl = sl_step(u, params, 0)
        np.testing.assert_allclose(out.values, 1.3, atol=1e-12)
        np.testing.assert_allclose(ctrl.alpha, 0.0, atol=1e-6)

    def test_affine_region_selects_slope_control(self):
        # With u_{n+1} locally affine of slope s and quadratic H, the
        # minimizer is a* = s; verify against an independent dense scan.
        s, dt, A = 0.3, 0.01, 2.0
        grid = make_grid(1, 100)
        x = grid.node_coords()[:, 0]
        vals = s * (x - 0.5)  # affine except at the wrap, far from x = 0.5
        u = GridFunction(grid, vals)
        params = SlParams(grid, dt, 1, QUAD, ZERO_V, control_box=A, boundary_error=False)
        out, ctrl = sl_step(u, params, 0)
        node = 50  # x = 0.5
        assert ctrl.alpha[node, 0] == pytest.approx(s, abs=1e-3)

        # dense-scan oracle for the same node objective
        a = np.linspace(-A, A, 200001)
        feet = 0.5 - dt * a
        obj = s * (feet - 0.5) + dt * QUAD.legendre(a[:, None])
        assert out.values[node] == pytest.approx(np.min(obj), abs=1e-9)

    def test_zero_terminal_with_potential_gives_dt_times_v(self):
        grid = make_grid(1, 64)
        V = cosine_potential(1.0)
        dt = 0.02
        params = SlParams(grid, dt, 1, QUAD, V, control_box=2.0)
        u = GridFunction(grid, np.zeros(grid.shape))
        out, _ = sl_step(u, params, 0)
        expect = dt * V.value(grid.node_coords())
        np.testing.assert_allclose(out.flat, expect, atol=1e-8)

    def test_value_consistent_with_reported_control(self):
        # Re-evaluating the objective at the reported alpha reproduces value.
        grid = make_grid(1, 32)
        g = cosine_datum(1.0)
        params = SlParams(grid, 0.05, 1, QUAD, ZERO_V, control_box=8.0)
        u = sample(grid, g.value)
        out, ctrl = sl_step(u, params, 0)
        from torushj.grid import interpolate, periodize

        feet = periodize(grid.node_coords() - params.dt * ctrl.alpha)
        obj = interpolate(u, feet) + params.dt * QUAD.legendre(ctrl.alpha)
        np.testing.assert_allclose(out.flat, obj, atol=1e-12)
        np.testing.assert_allclose(out.flat, ctrl.value, atol=1e-12)

    def test_too_small_control_box_raises(self):
        # Steep data wants |a| ~ 2 pi; a box of 0.05 saturates.
        grid = make_grid(1, 64)
        params = SlParams(grid, 0.1, 1, QUAD, ZERO_V, control_box=0.05)
        u = sample(grid, cosine_datum(1.0).value)
        with pytest.raises(ControlBoxError):
            sl_step(u, params, 0)

    def test_boundary_error_opt_out(self):
        grid = make_grid(1, 64)
        params = SlParams(
            grid, 0.1, 1, QUAD, ZERO_V, control_box=0.05, boundary_error=False
        )
        u = sample(grid, cosine_datum(1.0).value)
        out, ctrl = sl_step(u, params, 0)  # no raise
        assert np.max(np.abs(ctrl.alpha)) <= 0.05 + 1e-12


class TestSolve:
    def test_level_indexing_and_terminal_condition(self):
        grid = make_grid(1, 32)
        g = cosine_datum(1.0)
        params = SlParams(grid, 0.05, 4, QUAD, ZERO_V, control_box=8.0)
        table, controls = sl_solve(g, params)
        assert len(table.levels) == 5
        assert len(controls) == 4
        np.testing.assert_allclose(
            table.levels[4].values, sample(grid, g.value).values
        )

    def test_uniform_bound_with_explicit_constant(self):
        # |u_n| <= |g|_inf + (N - n) dt (|V|_inf + |min L|); min L = 0 here.
        grid = make_grid(1, 50)
        g = cosine_datum(1.0)
        V = cosine_potential(0.5)
        N, dt = 5, 0.1
        A = default_control_box(QUAD, g, V, N * dt)
        table, _ = sl_solve(g, SlParams(grid, dt, N, QUAD, V, A))
        for n, u in enumerate(table.levels):
            bound = 1.0 + (N - n) * dt * (0.5 + 0.0)
            assert u.max_abs() <= bound + 1e-9

    def test_constant_shift_equivariance(self):
        grid = make_grid(1, 40)
        g = cosine_datum(1.0)
        shifted = InitialDatum(
            lambda x: g.value(x) + 1.7, g.lipschitz_bound, g.semiconcavity_bound
        )
        params = SlParams(grid, 0.05, 3, QUAD, cosine_potential(0.3), control_box=8.0)
        a, _ = sl_solve(g, params)
        b, _ = sl_solve(shifted, params)
        for u, v in zip(a.levels, b.levels):
            np.testing.assert_allclose(v.values, u.values + 1.7, atol=1e-10)

    def test_monotone_in_terminal_datum(self):
        grid = make_grid(1, 40)
        g1 = cosine_datum(1.0)
        g2 = InitialDatum(
            lambda x: g1.value(x) + np.sin(2 * np.pi * np.asarray(x)[..., 0]) ** 2,
            g1.lipschitz_bound + 2 * np.pi,
            g1.semiconcavity_bound + 8 * np.pi**2,
        )
        params = SlParams(grid, 0.05, 3, QUAD, ZERO_V, control_box=10.0)
        lo, _ = sl_solve(g1, params)
        hi, _ = sl_solve(g2, params)
        for u, v in zip(lo.levels, hi.levels):
            assert np.all(v.values >= u.values - 1e-10)

    def test_matches_backward_hopf_lax_without_potential(self):
        grid = make_grid(1, 400)
        g = cosine_datum(1.0)
        T, dt = 0.25, 0.05
        params = SlParams(grid, dt, int(T / dt), QUAD, ZERO_V, control_box=8.0)
        table, _ = sl_solve(g, params)
        prob = HopfLaxProblem(g, QUAD, "backward", final_time=T)
        exact = hopf_lax_grid(prob, grid, 0.0)
        assert lp_error(table.levels[0], exact, np.inf) < 2e-3

    def test_zero_steps_returns_terminal_only(self):
        grid = make_grid(1, 16)
        table, controls = sl_solve(
            cosine_datum(1.0), SlParams(grid, 0.1, 0, QUAD, ZERO_V, control_box=8.0)
        )
        assert len(table.levels) == 1 and controls == []

    def test_time_interpolate_midpoint(self):
        grid = make_grid(1, 32)
        params = SlParams(grid, 0.05, 2, QUAD, ZERO_V, control_box=8.0)
        table, _ = sl_solve(cosine_datum(1.0), params)
        mid = table.time_interpolate(0.075)
        expect = 0.5 * (table.levels[1].values + table.levels[2].values)
        np.testing.assert_allclose(mid.values, expect, atol=1e-14)
        with pytest.raises(ParameterError):
            table.time_interpolate(0.2)


class TestOptimalityResidual:
    def test_constant_datum_residual_is_zero(self):
        grid = make_grid(1, 32)
        params = SlParams(grid, 0.05, 2, QUAD, ZERO_V, control_box=2.0)
        table, controls = sl_solve(_zero_datum(), params)
        r = optimality_residual(table, controls, 0)
        assert np.max(r.values) < 1e-5

    def test_residual_shrinks_under_joint_refinement(self):
        # DERIVED trend: medians 2.3e-3, 1.75e-3, 1.64e-3 on these levels.
        g = cosine_datum(1.0)
        meds = []
        for nodes, dt, steps in ((100, 0.1, 2), (200, 0.05, 4), (400, 0.025, 8)):
            grid = make_grid(1, nodes)
            A = default_control_box(QUAD, g, ZERO_V, steps * dt)
            table, controls = sl_solve(g, SlParams(grid, dt, steps, QUAD, ZERO_V, A))
            meds.append(float(np.median(optimality_residual(table, controls, 0).values)))
        assert meds[0] > meds[1] > meds[2]
        assert meds[2] <= 0.8 * meds[0]

    def test_companion_form_also_small_on_smooth_problem(self):
        grid = make_grid(1, 200)
        g = cosine_datum(0.2)  # short time, small datum: no shocks yet
        params = SlParams(grid, 0.02, 2, QUAD, ZERO_V, control_box=4.0)
        table, controls = sl_solve(g, params)
        r = optimality_residual(table, controls, 0, companion=True)
        assert np.median(r.values) < 5e-3

    def test_level_out_of_range(self):
        grid = make_grid(1, 16)
        params = SlParams(grid, 0.05, 2, QUAD, ZERO_V, control_box=8.0)
        table, controls = sl_solve(cosine_datum(1.0), params)
        with pytest.raises(ParameterError):
            optimality_residual(table, controls, 2)


def test_control_csv_layout(tmp_path):
    grid = make_grid(1, 8)
    params = SlParams(grid, 0.05, 1, QUAD, ZERO_V, control_box=8.0)
    table, controls = sl_solve(cosine_datum(1.0), params)
    path = tmp_path / "controls.csv"
    write_control_csv(grid, controls[0], path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "# d=1 I=8"
    assert len(lines) == 9
    first = lines[1].split(",")
    assert len(first) == 4  # index, alpha, value, residual

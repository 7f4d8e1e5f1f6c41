"""Explicit monotone finite-difference time stepping on the torus grid.

One step replaces u(x_i) by u(x_i) - dt * F(-forward slopes, backward
slopes) with all differences periodic.  The solver tracks the discrete
Lipschitz constant, the semiconcavity estimator, and the sup norm at every
step; breaking the slope budget is a hard error because every downstream
estimate assumes it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analysis import lipschitz_estimate, semiconcavity_estimate
from .errors import CflViolation, InvariantViolation, ParameterError
from .grid import (
    GridFunction,
    TorusGrid,
    backward_diff_stack,
    forward_diff_stack,
    sample,
)
from .hamiltonians import InitialDatum
from .numhamil import NumericalHamiltonian, cfl_bound


@dataclass(frozen=True)
class FdParams:
    """Grid, time step, step count, flux, and slope budget for one run."""

    grid: TorusGrid
    dt: float
    n_steps: int
    F: NumericalHamiltonian
    R: float
    # negative-control experiments deliberately run past the CFL bound
    check_cfl: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 0:
            raise ParameterError("n_steps must be nonnegative")
        if not self.R > 0:
            raise ParameterError("slope budget R must be positive")
        if self.check_cfl:
            bound = cfl_bound(self.F, self.R, self.grid.spacing, dim=self.grid.dim)
            if self.dt > bound.dt_max * (1.0 + 1e-12):
                raise CflViolation(self.dt, bound.dt_max)

    @property
    def final_time(self) -> float:
        return self.n_steps * self.dt


def fd_params_for_time(
    grid: TorusGrid,
    F: NumericalHamiltonian,
    R: float,
    final_time: float,
    cfl_fraction: float = 0.9,
) -> FdParams:
    """Choose N and dt so that N * dt = final_time and dt is the requested
    fraction of the CFL bound (rounded down to make N an integer)."""
    if not 0 < cfl_fraction <= 1:
        raise ParameterError("cfl_fraction must be in (0, 1]")
    bound = cfl_bound(F, R, grid.spacing, dim=grid.dim)
    if final_time == 0:
        return FdParams(grid, bound.dt_max * cfl_fraction, 0, F, R)
    target = bound.dt_max * cfl_fraction
    n = max(1, int(np.ceil(final_time / target - 1e-12)))
    return FdParams(grid, final_time / n, n, F, R)


@dataclass
class StepDiagnostics:
    step: int
    max_slope: float
    semiconcavity: float
    sup_norm: float


@dataclass
class FdTrajectory:
    """All time levels u_0, ..., u_N plus per-step diagnostics."""

    levels: list[GridFunction]
    params: FdParams
    diagnostics: list[StepDiagnostics] = field(default_factory=list)

    def write_diagnostics_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("step,max_slope,semiconcavity,sup_norm\n")
            for d in self.diagnostics:
                f.write(
                    f"{d.step},{d.max_slope!r},{d.semiconcavity!r},{d.sup_norm!r}\n"
                )


def fd_step(u: GridFunction, params: FdParams) -> GridFunction:
    """One explicit update; asserts the discrete slope budget first."""
    slope = lipschitz_estimate(u)
    if slope > params.R * (1.0 + 1e-9):
        raise InvariantViolation(
            f"discrete slope {slope:.6g} exceeds the budget R={params.R:.6g}; "
            "the CFL/monotonicity hypotheses no longer apply"
        )
    p = -forward_diff_stack(u)
    q = backward_diff_stack(u)
    new_vals = u.values - params.dt * params.F.value(p, q)
    return GridFunction(u.grid, new_vals)


def fd_solve(g: InitialDatum, params: FdParams) -> FdTrajectory:
    """Run N explicit steps starting from g sampled on the grid.

    On an invariant violation the raised error carries the partial
    trajectory computed so far.
    """
    u = sample(params.grid, g.value)
    traj = FdTrajectory(levels=[u], params=params)
    traj.diagnostics.append(
        StepDiagnostics(0, lipschitz_estimate(u), semiconcavity_estimate(u), u.max_abs())
    )
    for n in range(params.n_steps):
        try:
            u = fd_step(u, params)
        except InvariantViolation as exc:
            raise InvariantViolation(
                f"step {n}: {exc}", partial=traj, step=n
            ) from exc
        traj.levels.append(u)
        traj.diagnostics.append(
            StepDiagnostics(
                n + 1,
                lipschitz_estimate(u),
                semiconcavity_estimate(u),
                u.max_abs(),
            )
        )
    return traj


def time_interpolate(traj: FdTrajectory, t: float) -> GridFunction:
    """Linear-in-time interpolation between stored levels."""
    T = traj.params.final_time
    dt = traj.params.dt
    if t < -1e-12 or t > T + 1e-12:
        raise ParameterError(f"t={t} outside [0, {T}]")
    t = min(max(t, 0.0), T)
    if traj.params.n_steps == 0:
        return traj.levels[0]
    n = min(int(np.floor(t / dt)), traj.params.n_steps - 1)
    theta = (t - n * dt) / dt
    vals = (1.0 - theta) * traj.levels[n].values + theta * traj.levels[n + 1].values
    return GridFunction(traj.levels[0].grid, vals)

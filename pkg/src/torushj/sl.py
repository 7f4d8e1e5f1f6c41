"""Semi-Lagrangian dynamic programming for the backward problem with
H(x, p) = H0(p) - V(x).

One backward step minimizes, per node,
    I[u_{n+1}](x_i - dt * a) + dt * (L(a) + V(x_i))
over the control box [-A, A]^d.  The minimization is a dense lattice scan
followed by a golden-section polish per node (coordinate descent for
d >= 2); for smooth regions an analytic warm start a = D_p H0(Du) is fed
into the scan.  Argmins on the box boundary are hard errors: the optimal
controls of the discrete problem are bounded independently of dt, so a
boundary hit means the box was too small.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ControlBoxError, ParameterError
from .grid import (
    GridFunction,
    TorusGrid,
    central_diff_stack,
    interpolate,
    periodize,
    sample,
)
from .hamiltonians import Hamiltonian, InitialDatum, Potential

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SlParams:
    """Grid, time discretization, problem data, and control-search knobs."""

    grid: TorusGrid
    dt: float
    n_steps: int
    H: Hamiltonian
    V: Potential
    control_box: float
    control_samples: int = 33
    polish_iters: int = 25
    warm_start: bool = True
    # lattice-matched oracle comparisons scan the full closed box on purpose
    boundary_error: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 0:
            raise ParameterError("n_steps must be nonnegative")
        if not self.control_box > 0:
            raise ParameterError("control_box must be positive")
        if self.control_samples < 3:
            raise ParameterError("control_samples must be >= 3")

    @property
    def final_time(self) -> float:
        return self.n_steps * self.dt


def default_control_box(
    H: Hamiltonian, g: InitialDatum, V: Potential, final_time: float
) -> float:
    """2 * (1 + max |D_p H0|) over the slope range the solution can reach."""
    p_max = g.lipschitz_bound + final_time * V.lipschitz_bound
    ps = np.linspace(-p_max, p_max, 257)[:, None]
    return 2.0 * (1.0 + float(np.max(np.abs(H.grad(ps)))))


@dataclass
class ControlField:
    """Per-node minimizer, attained objective value, and (once computed)
    the optimality-condition residual."""

    alpha: np.ndarray  # (n_nodes, d)
    value: np.ndarray  # (n_nodes,)
    residual: np.ndarray | None = None


@dataclass
class SlValueTable:
    """Forward-indexed levels u_0, ..., u_N (u_N = g on the grid)."""

    levels: list[GridFunction]
    params: SlParams

    def time_interpolate(self, t: float) -> GridFunction:
        T = self.params.final_time
        dt = self.params.dt
        if t < -1e-12 or t > T + 1e-12:
            raise ParameterError(f"t={t} outside [0, {T}]")
        t = min(max(t, 0.0), T)
        if self.params.n_steps == 0:
            return self.levels[0]
        n = min(int(np.floor(t / dt)), self.params.n_steps - 1)
        theta = (t - n * dt) / dt
        vals = (1.0 - theta) * self.levels[n].values + theta * self.levels[
            n + 1
        ].values
        return GridFunction(self.levels[0].grid, vals)


def _control_lattice(A: float, samples: int, dim: int) -> np.ndarray:
    axis = np.linspace(-A, A, samples)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _objective(
    u_next: GridFunction, params: SlParams, nodes: np.ndarray, alphas: np.ndarray
) -> np.ndarray:
    """Running-cost-plus-interpolated-continuation, per node.

    ``alphas`` has shape (n_nodes, d): one candidate control per node.
    The potential term dt * V(x_i) is constant per node and added by the
    caller once.
    """
    feet = periodize(nodes - params.dt * alphas)
    cont = interpolate(u_next, feet)
    return cont + params.dt * params.H.legendre(alphas)


def _golden_polish_axis(
    u_next: GridFunction,
    params: SlParams,
    nodes: np.ndarray,
    alpha: np.ndarray,
    axis: int,
    halfwidth: float,
    iters: int,
    best_val: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized golden-section refinement of one control coordinate."""
    A = params.control_box
    lo = np.maximum(alpha[:, axis] - halfwidth, -A)
    hi = np.minimum(alpha[:, axis] + halfwidth, A)

    def f(coord):
        cand = alpha.copy()
        cand[:, axis] = coord
        return _objective(u_next, params, nodes, cand)

    c = hi - _INVPHI * (hi - lo)
    d = lo + _INVPHI * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        left = fc <= fd
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
        c = hi - _INVPHI * (hi - lo)
        d = lo + _INVPHI * (hi - lo)
        fc, fd = f(c), f(d)
    mid = 0.5 * (lo + hi)
    fmid = f(mid)
    improved = fmid < best_val
    out = alpha.copy()
    out[improved, axis] = mid[improved]
    return out, np.where(improved, fmid, best_val)


def sl_step(
    u_next: GridFunction, params: SlParams, n: int | None = None
) -> tuple[GridFunction, ControlField]:
    """One backward dynamic-programming step; returns the new level and the
    per-node optimal controls."""
    grid = u_next.grid
    nodes = grid.node_coords()
    n_nodes = nodes.shape[0]
    d = grid.dim
    A = params.control_box
    S = params.control_samples

    lattice = _control_lattice(A, S, d)
    spacing = 2.0 * A / (S - 1)

    # dense scan: every lattice control shifts all nodes uniformly
    best_val = np.full(n_nodes, np.inf)
    best_alpha = np.zeros((n_nodes, d))
    best_flat_idx = np.zeros(n_nodes, dtype=np.int64)
    run_cost = params.dt * params.H.legendre(lattice)
    for k in range(lattice.shape[0]):
        feet = periodize(nodes - params.dt * lattice[k])
        vals = interpolate(u_next, feet) + run_cost[k]
        better = vals < best_val
        best_val = np.where(better, vals, best_val)
        best_alpha[better] = lattice[k]
        best_flat_idx[better] = k

    # boundary of the lattice = boundary of the control box
    multi = np.stack(np.unravel_index(best_flat_idx, (S,) * d), axis=-1)
    on_boundary = np.any((multi == 0) | (multi == S - 1), axis=1)
    if params.boundary_error and np.any(on_boundary):
        where = int(np.argmax(on_boundary))
        raise ControlBoxError(
            f"optimal control {best_alpha[where]} at node {where}"
            + (f", level {n}" if n is not None else "")
            + f" lies on the boundary of the control box [-{A}, {A}]^{d}; "
            "enlarge control_box"
        )

    if params.warm_start:
        # analytic seed a = D_p H0(Du) from the central slope of u_next
        slopes = central_diff_stack(u_next).reshape(n_nodes, d)
        seed = np.clip(params.H.grad(slopes), -A, A)
        seed_val = _objective(u_next, params, nodes, seed)
        better = seed_val < best_val
        best_alpha[better] = seed[better]
        best_val = np.where(better, seed_val, best_val)

    if params.polish_iters > 0:
        if d == 1:
            best_alpha, best_val = _golden_polish_axis(
                u_next, params, nodes, best_alpha, 0, spacing,
                params.polish_iters, best_val,
            )
        else:
            # cyclic coordinate descent, a few golden iterations per sweep
            sweeps = max(1, params.polish_iters // (4 * d))
            for _ in range(sweeps):
                for axis in range(d):
                    best_alpha, best_val = _golden_polish_axis(
                        u_next, params, nodes, best_alpha, axis, spacing, 8,
                        best_val,
                    )

    if params.boundary_error and np.any(np.abs(best_alpha) >= A * (1.0 - 1e-12)):
        where = int(np.argmax(np.max(np.abs(best_alpha), axis=1)))
        raise ControlBoxError(
            f"refined control {best_alpha[where]} at node {where} reached the "
            f"boundary of the control box [-{A}, {A}]^{d}; enlarge control_box"
        )

    total = best_val + params.dt * params.V.value(nodes)
    level = GridFunction(grid, total.reshape(grid.shape))
    return level, ControlField(alpha=best_alpha, value=total)


def sl_solve(
    g: InitialDatum, params: SlParams
) -> tuple[SlValueTable, list[ControlField]]:
    """Backward sweep n = N-1, ..., 0; controls[n] minimizes level n."""
    grid = params.grid
    terminal = sample(grid, g.value)
    levels: list[GridFunction | None] = [None] * (params.n_steps + 1)
    levels[params.n_steps] = terminal
    controls: list[ControlField | None] = [None] * params.n_steps
    u = terminal
    for n in range(params.n_steps - 1, -1, -1):
        try:
            u, ctrl = sl_step(u, params, n)
        except ControlBoxError as exc:
            raise ControlBoxError(f"level {n}: {exc}") from exc
        levels[n] = u
        controls[n] = ctrl
    return SlValueTable(levels=levels, params=params), controls


def optimality_residual(
    table: SlValueTable,
    controls: list[ControlField],
    n: int,
    companion: bool = False,
) -> GridFunction:
    """Pointwise defect of the discrete optimality condition at level n.

    Default: |D u_{n+1}(foot) - D_a L(a*)| with the gradient of u_{n+1}
    obtained by central differencing of the interpolant at the foot of the
    characteristic.  With ``companion=True``: the Euler-equation form
    |D u_n(x_i) - D_a L(a*) - dt * D V(x_i)| with DV central-differenced at
    the grid scale.  Residuals are reported, never asserted: the optimal
    control is unique (and u differentiable) only almost everywhere.
    """
    params = table.params
    if not 0 <= n < params.n_steps:
        raise ParameterError(f"level {n} outside [0, {params.n_steps})")
    grid = table.levels[0].grid
    nodes = grid.node_coords()
    ctrl = controls[n]
    h = grid.spacing
    target = params.H.legendre_grad(ctrl.alpha)

    if companion:
        du_n = central_diff_stack(table.levels[n]).reshape(nodes.shape)
        dv = np.zeros_like(nodes)
        for a in range(grid.dim):
            e = np.zeros(grid.dim)
            e[a] = h
            dv[:, a] = (
                params.V.value(periodize(nodes + e))
                - params.V.value(periodize(nodes - e))
            ) / (2 * h)
        resid = np.linalg.norm(du_n - target - params.dt * dv, axis=-1)
    else:
        u_next = table.levels[n + 1]
        feet = periodize(nodes - params.dt * ctrl.alpha)
        du_foot = np.zeros_like(nodes)
        for a in range(grid.dim):
            e = np.zeros(grid.dim)
            e[a] = h
            du_foot[:, a] = (
                interpolate(u_next, periodize(feet + e))
                - interpolate(u_next, periodize(feet - e))
            ) / (2 * h)
        resid = np.linalg.norm(du_foot - target, axis=-1)
    return GridFunction(grid, resid.reshape(grid.shape))


def write_control_csv(grid: TorusGrid, ctrl: ControlField, path) -> None:
    """CSV rows ``i_1,...,i_d,alpha_1,...,alpha_d,value,residual``."""
    idx = grid.multi_indices()
    resid = (
        ctrl.residual.ravel()
        if ctrl.residual is not None
        else np.full(grid.n_nodes, np.nan)
    )
    with open(path, "w") as f:
        f.write(f"# d={grid.dim} I={grid.nodes_per_axis}\n")
        for row, a_row, val, r in zip(idx, ctrl.alpha, ctrl.value, resid):
            cells = [str(int(i)) for i in row]
            cells += [repr(float(a)) for a in a_row]
            cells += [repr(float(val)), repr(float(r))]
            f.write(",".join(cells) + "\n")

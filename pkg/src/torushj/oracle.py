"""Ground-truth solutions the schemes are measured against.

Three oracles, all independent of the solver code paths they check:

* Hopf-Lax: exact variational solution for x-independent convex H (forward
  problem, and backward problem with zero potential), evaluated by a dense
  scan over torus representatives plus golden-section refinement.
* Fine-grid reference: the schemes themselves at >= 8x resolution, with a
  self-reported accuracy estimate; used when a potential makes the problem
  closed-form-free.
* Exhaustive dynamic programming over all lattice control sequences, for
  tiny semi-Lagrangian instances.
"""

from __future__ import annotations

import itertools
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .fd import fd_params_for_time, fd_solve, time_interpolate
from .grid import GridFunction, TorusGrid, interpolate, make_grid, periodize
from .grid import read_csv as read_grid_csv
from .grid import write_csv as write_grid_csv
from .hamiltonians import Hamiltonian, InitialDatum, Potential
from .numhamil import lax_friedrichs, suggest_alpha
from .problems import ProblemSpec
from .sl import SlParams, default_control_box, sl_solve

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class HopfLaxProblem:
    """Variational problem min_y g(y) + tau * L((x - y)/tau).

    ``direction`` is "forward" (tau = t elapsed from the initial datum) or
    "backward" (tau = final_time - t, zero potential).
    """

    datum: InitialDatum
    H: Hamiltonian
    direction: str = "forward"
    final_time: float | None = None

    def elapsed(self, t: float) -> float:
        if self.direction == "forward":
            return t
        if self.direction == "backward":
            if self.final_time is None:
                raise ParameterError("backward problems need final_time")
            return self.final_time - t
        raise ParameterError(f"unknown direction {self.direction!r}")


def _velocity_bound(H: Hamiltonian, slope: float, dim: int) -> float:
    """max |D_p H0| over the slope ball, sampled along axes and diagonals."""
    radii = np.linspace(0.0, max(slope, 1e-6) * 1.1, 129)
    dirs = [np.eye(dim)[a] for a in range(dim)]
    if dim > 1:
        dirs.append(np.ones(dim) / np.sqrt(dim))
    worst = 0.0
    for u in dirs:
        pts = radii[:, None] * u[None, :]
        worst = max(worst, float(np.max(np.abs(H.grad(pts)))))
    return worst


def hopf_lax_eval(
    prob: HopfLaxProblem,
    x,
    t: float,
    samples_per_axis: int = 4096,
    refine_iters: int = 40,
    chunk: int = 64,
    return_argmin: bool = False,
):
    """Evaluate the Hopf-Lax solution at points ``x`` and time ``t``.

    Candidates y run over enough integer-shifted copies of [0,1) to cover
    the characteristic cone; ties break to the smallest y.
    """
    x_arr = np.asarray(x, dtype=float)
    single = x_arr.ndim <= 1
    pts = np.atleast_2d(x_arr if x_arr.ndim else x_arr[None])
    d = pts.shape[-1]
    tau = prob.elapsed(t)
    if tau < -1e-12:
        raise ParameterError(f"elapsed time {tau} is negative")
    g = prob.datum.value
    if tau <= 0:
        vals = g(pts)
        if return_argmin:
            return (vals[0], pts[0]) if single else (vals, pts)
        return float(vals[0]) if single else vals

    vmax = _velocity_bound(prob.H, prob.datum.lipschitz_bound, d)
    K = max(1, int(np.ceil(tau * vmax)))
    S = samples_per_axis
    axis_cand = -K + np.arange(S * (2 * K + 1)) / S
    mesh = np.meshgrid(*([axis_cand] * d), indexing="ij")
    Y = np.stack([m.ravel() for m in mesh], axis=-1)
    gY = g(periodize(Y))

    n = pts.shape[0]
    best_val = np.empty(n)
    best_y = np.empty((n, d))
    for lo in range(0, n, chunk):
        xs = pts[lo : lo + chunk]
        vel = (xs[:, None, :] - Y[None, :, :]) / tau
        cost = gY[None, :] + tau * prob.H.legendre(vel)
        k = np.argmin(cost, axis=1)
        best_val[lo : lo + chunk] = cost[np.arange(len(xs)), k]
        best_y[lo : lo + chunk] = Y[k]

    # golden-section refinement, one axis at a time
    delta = 1.0 / S

    def cost_at(y):
        vel = (pts - y) / tau
        return g(periodize(y)) + tau * prob.H.legendre(vel)

    for _ in range(1 if d == 1 else 2):
        for axis in range(d):
            lo_b = best_y[:, axis] - delta
            hi_b = best_y[:, axis] + delta

            def f(coord):
                cand = best_y.copy()
                cand[:, axis] = coord
                return cost_at(cand)

            c = hi_b - _INVPHI * (hi_b - lo_b)
            dd = lo_b + _INVPHI * (hi_b - lo_b)
            fc, fd = f(c), f(dd)
            for _ in range(refine_iters):
                left = fc <= fd
                hi_b = np.where(left, dd, hi_b)
                lo_b = np.where(left, lo_b, c)
                c = hi_b - _INVPHI * (hi_b - lo_b)
                dd = lo_b + _INVPHI * (hi_b - lo_b)
                fc, fd = f(c), f(dd)
            mid = 0.5 * (lo_b + hi_b)
            fmid = f(mid)
            improved = fmid < best_val
            best_y[improved, axis] = mid[improved]
            best_val = np.where(improved, fmid, best_val)

    if return_argmin:
        return (best_val[0], best_y[0]) if single else (best_val, best_y)
    return float(best_val[0]) if single else best_val


def hopf_lax_grid(
    prob: HopfLaxProblem, grid: TorusGrid, t: float, **kwargs
) -> GridFunction:
    vals = hopf_lax_eval(prob, grid.node_coords(), t, **kwargs)
    return GridFunction(grid, np.asarray(vals).reshape(grid.shape))


@dataclass
class ReferenceSolution:
    """Fine-grid solution snapshots with provenance."""

    grid: TorusGrid
    times: list[float]
    values: list[GridFunction]
    provenance: dict = field(default_factory=dict)

    def restrict(self, coarse: TorusGrid, time_index: int) -> GridFunction:
        """Values at the nodes of a coarser grid that divides this one."""
        ratio, rem = divmod(self.grid.nodes_per_axis, coarse.nodes_per_axis)
        if rem != 0 or coarse.dim != self.grid.dim:
            raise ParameterError("coarse grid does not divide the reference grid")
        sl = (slice(None, None, ratio),) * self.grid.dim
        return GridFunction(coarse, self.values[time_index].values[sl])


def _solve_snapshots(
    spec: ProblemSpec,
    scheme: str,
    nodes: int,
    times,
    control_samples: int,
    cfl_fraction: float,
) -> tuple[TorusGrid, list[GridFunction], dict]:
    grid = make_grid(spec.dim, nodes)
    H = spec.build_hamiltonian()
    g = spec.build_datum()
    T = spec.final_time
    if scheme == "sl":
        V = spec.build_potential()
        h = grid.spacing
        n = max(1, int(np.ceil(T / np.sqrt(h) - 1e-12)))
        dt = T / n
        params = SlParams(
            grid=grid,
            dt=dt,
            n_steps=n,
            H=H,
            V=V,
            control_box=default_control_box(H, g, V, T),
            control_samples=control_samples,
        )
        table, _ = sl_solve(g, params)
        snaps = [table.time_interpolate(t) for t in times]
        meta = {"method": "sl", "nodes": nodes, "dt": dt, "n_steps": n}
    elif scheme == "fd":
        from .analysis import lipschitz_estimate
        from .grid import sample as grid_sample

        g0 = grid_sample(grid, g.value)
        R = max(lipschitz_estimate(g0), 1e-6) * 1.05
        alpha = max(suggest_alpha(H, R, dim=spec.dim) * 1.1, 1e-6)
        F = lax_friedrichs(H, alpha)
        params = fd_params_for_time(grid, F, R, T, cfl_fraction)
        traj = fd_solve(g, params)
        snaps = [time_interpolate(traj, t) for t in times]
        meta = {
            "method": "fd",
            "nodes": nodes,
            "dt": params.dt,
            "n_steps": params.n_steps,
        }
    else:
        raise ParameterError(f"unknown scheme {scheme!r}")
    return grid, snaps, meta


def reference_solve(
    spec: ProblemSpec,
    scheme: str,
    finest_nodes: int,
    times,
    multiplier: int = 8,
    cache_dir: str | None = None,
    control_samples: int = 33,
    cfl_fraction: float = 0.9,
) -> ReferenceSolution:
    """Solve at ``multiplier`` times the finest test resolution.

    The accuracy estimate compares against an internal run at half the
    multiplier on the shared nodes, so doubling the multiplier must shrink
    it.  Results are cached on disk keyed by a content hash of the full
    description.
    """
    if multiplier < 8:
        raise ParameterError("resolution multiplier must be >= 8")
    times = [float(t) for t in times]
    key = spec.content_key(
        {
            "scheme": scheme,
            "finest_nodes": finest_nodes,
            "multiplier": multiplier,
            "times": times,
            "control_samples": control_samples,
            "cfl_fraction": cfl_fraction,
        }
    )
    if cache_dir is not None:
        meta_path = os.path.join(cache_dir, f"ref_{key}.json")
        if os.path.exists(meta_path):
            with open(meta_path) as f:
                prov = json.load(f)
            values = [
                read_grid_csv(os.path.join(cache_dir, f"ref_{key}_t{i}.csv"))
                for i in range(len(times))
            ]
            return ReferenceSolution(values[0].grid, times, values, prov)

    fine_nodes = multiplier * finest_nodes
    grid, snaps, meta = _solve_snapshots(
        spec, scheme, fine_nodes, times, control_samples, cfl_fraction
    )
    half_nodes = (multiplier // 2) * finest_nodes
    _, half_snaps, _ = _solve_snapshots(
        spec, scheme, half_nodes, times, control_samples, cfl_fraction
    )
    ratio = fine_nodes // half_nodes
    sl_idx = (slice(None, None, ratio),) * spec.dim
    acc = max(
        float(np.max(np.abs(s.values[sl_idx] - hs.values)))
        for s, hs in zip(snaps, half_snaps)
    )
    prov = dict(meta)
    prov.update(
        {
            "multiplier": multiplier,
            "finest_nodes": finest_nodes,
            "times": times,
            "estimated_accuracy": acc,
        }
    )
    ref = ReferenceSolution(grid, times, snaps, prov)
    if cache_dir is not None:
        os.makedirs(cache_dir, exist_ok=True)
        for i, s in enumerate(snaps):
            write_grid_csv(s, os.path.join(cache_dir, f"ref_{key}_t{i}.csv"))
        with open(os.path.join(cache_dir, f"ref_{key}.json"), "w") as f:
            json.dump(prov, f, indent=1, sort_keys=True)
    return ref


def brute_force_dp(
    g: GridFunction,
    control_lattice,
    n_steps: int,
    dt: float,
    H: Hamiltonian,
    V: Potential,
    budget: int = 10**7,
) -> list[GridFunction]:
    """Exhaustive minimization over all lattice control sequences.

    Returns levels 0..N; level n is, per starting node, the exact minimum of
    sum_k dt (L(a_k) + V(X_k)) + I[g](X_N) over all sequences of length
    N - n, with X following the real-valued discrete dynamics and the
    terminal value read through the same multilinear interpolant the
    semi-Lagrangian solver uses.
    """
    lattice = np.atleast_2d(np.asarray(control_lattice, dtype=float))
    if lattice.shape[-1] != g.grid.dim:
        lattice = lattice.reshape(-1, g.grid.dim)
    m = lattice.shape[0]
    d = g.grid.dim
    if m ** (d * n_steps) > budget:
        raise ParameterError(
            f"enumeration budget exceeded: {m}^({d}*{n_steps}) > {budget}"
        )
    nodes = g.grid.node_coords()
    run_cost = H.legendre(lattice)

    levels: list[GridFunction] = [g] * (n_steps + 1)
    for n in range(n_steps - 1, -1, -1):
        length = n_steps - n
        best = np.full(nodes.shape[0], np.inf)
        for seq in itertools.product(range(m), repeat=length):
            controls = lattice[list(seq)]  # (length, d)
            # X_k relative to the start, k = 0..length
            rel = np.concatenate(
                [np.zeros((1, d)), -dt * np.cumsum(controls, axis=0)], axis=0
            )
            cost = dt * float(np.sum(run_cost[list(seq)]))
            # running potential along X_0..X_{length-1}
            stage_pts = periodize(nodes[None, :, :] + rel[:-1, None, :])
            cost = cost + dt * np.sum(V.value(stage_pts), axis=0)
            terminal = interpolate(g, periodize(nodes + rel[-1]))
            total = cost + terminal
            best = np.minimum(best, total)
        levels[n] = GridFunction(g.grid, best.reshape(g.grid.shape))
    return levels

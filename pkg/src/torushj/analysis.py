"""Discrete norms, convergence-order fits, and structural estimators.

All L^p norms are h^d-weighted so the total weight of the torus is 1; with
that normalization L^1 <= L^2 <= L^4 <= L^inf and the interpolation
inequality ||.||_p <= ||.||_1^{1/p} ||.||_inf^{1-1/p} holds exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .grid import GridFunction, backward_diff, forward_diff


def lp_error(a: GridFunction, b: GridFunction, p: float) -> float:
    """Weighted discrete L^p distance between two grid functions."""
    if a.grid != b.grid:
        raise ParameterError("grid mismatch in lp_error")
    diff = np.abs(a.values - b.values)
    if np.isinf(p):
        return float(np.max(diff))
    if p < 1:
        raise ParameterError(f"p must be in [1, inf], got {p}")
    w = a.grid.spacing**a.grid.dim
    return float((np.sum(diff**p) * w) ** (1.0 / p))


def rate_fit(pairs) -> tuple[float, float, float]:
    """Least-squares fit of log(error) against log(eps).

    ``pairs`` is a sequence of (eps, error) with eps strictly decreasing.
    Levels with zero error are dropped; fewer than 3 surviving levels is an
    error.  Returns (slope, intercept, r_squared).
    """
    eps = np.array([p[0] for p in pairs], dtype=float)
    err = np.array([p[1] for p in pairs], dtype=float)
    if len(eps) < 3:
        raise ParameterError("rate fit needs at least 3 levels")
    if np.any(np.diff(eps) >= 0):
        raise ParameterError("eps must be strictly decreasing")
    keep = err > 0
    eps, err = eps[keep], err[keep]
    if len(eps) < 3:
        raise ParameterError("fewer than 3 levels with positive error")
    x = np.log(eps)
    y = np.log(err)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return float(slope), float(intercept), r2


def _shift_set(dim: int) -> list[tuple[np.ndarray, float]]:
    """Lattice shifts k (in index units) with their squared lengths |k|^2.

    K = {h e_i, 2h e_i} plus the diagonals h (e_i +/- e_j) for i < j.
    """
    shifts = []
    for i in range(dim):
        e = np.zeros(dim, dtype=int)
        e[i] = 1
        shifts.append((e.copy(), 1.0))
        shifts.append((2 * e, 4.0))
        for j in range(i + 1, dim):
            for sgn in (1, -1):
                k = np.zeros(dim, dtype=int)
                k[i] = 1
                k[j] = sgn
                shifts.append((k, 2.0))
    return shifts


def semiconcavity_estimate(v: GridFunction) -> float:
    """Largest three-point quotient (v(x+k) + v(x-k) - 2 v(x)) / |k|^2 over
    the lattice shift set."""
    h = v.grid.spacing
    best = -np.inf
    for k, len2 in _shift_set(v.grid.dim):
        shifted_p = v.values
        shifted_m = v.values
        for axis, steps in enumerate(k):
            if steps:
                shifted_p = np.roll(shifted_p, -int(steps), axis=axis)
                shifted_m = np.roll(shifted_m, int(steps), axis=axis)
        quot = (shifted_p + shifted_m - 2.0 * v.values) / (len2 * h * h)
        best = max(best, float(np.max(quot)))
    return best


def lipschitz_estimate(v: GridFunction) -> float:
    """Largest forward difference quotient magnitude over all axes."""
    return max(
        float(np.max(np.abs(forward_diff(v, a).values)))
        for a in range(v.grid.dim)
    )


def hessian_tv_estimate(v: GridFunction) -> float:
    """h^d-weighted total of the Frobenius norm of the symmetrized
    second-difference matrix."""
    grid = v.grid
    h = grid.spacing
    d = grid.dim
    mats = np.zeros(grid.shape + (d, d))
    for i in range(d):
        for j in range(d):
            vij = np.roll(np.roll(v.values, -1, axis=i), -1, axis=j)
            vi = np.roll(v.values, -1, axis=i)
            vj = np.roll(v.values, -1, axis=j)
            mats[..., i, j] = (vij - vi - vj + v.values) / (h * h)
    sym = 0.5 * (mats + np.swapaxes(mats, -1, -2))
    frob = np.sqrt(np.sum(sym * sym, axis=(-1, -2)))
    return float(np.sum(frob) * h**d)


def fd_gap_l1(v: GridFunction) -> np.ndarray:
    """Per-axis L^1 gap between the forward difference and the central
    difference proxy of the a.e. derivative."""
    grid = v.grid
    h = grid.spacing
    out = np.zeros(grid.dim)
    for a in range(grid.dim):
        fwd = forward_diff(v, a).values
        central = (np.roll(v.values, -1, axis=a) - np.roll(v.values, 1, axis=a)) / (
            2 * h
        )
        out[a] = np.sum(np.abs(fwd - central)) * h**grid.dim
    return out


def interpolation_check(l1: float, linf: float, lp: float, p: float) -> bool:
    """Exact L^p interpolation inequality lp <= l1^{1/p} linf^{1-1/p}."""
    if not 1 < p < np.inf:
        raise ParameterError(f"p must be in (1, inf), got {p}")
    if min(l1, linf, lp) < 0:
        raise ParameterError("norms must be nonnegative")
    bound = l1 ** (1.0 / p) * linf ** (1.0 - 1.0 / p)
    return lp <= bound * (1.0 + 1e-9)


def adjoint_pairing_gap(v: GridFunction, w: GridFunction) -> float:
    """Defect of discrete integration by parts between forward and backward
    differences, maximized over axes."""
    if v.grid != w.grid:
        raise ParameterError("grid mismatch")
    worst = 0.0
    for a in range(v.grid.dim):
        lhs = float(np.sum(forward_diff(v, a).values * w.values))
        rhs = -float(np.sum(v.values * backward_diff(w, a).values))
        worst = max(worst, abs(lhs - rhs))
    return worst


@dataclass
class ErrorReport:
    """Per-refinement-level errors plus fitted convergence orders."""

    levels: list[dict] = field(default_factory=list)
    fits: dict = field(default_factory=dict)

    PS = (1.0, 2.0, 4.0, np.inf)

    def add_level(self, h: float, dt: float, errors: dict) -> None:
        self.levels.append({"h": h, "dt": dt, "eps": h + dt, "errors": dict(errors)})

    def fit_rates(self) -> dict:
        """Fit log-log slopes per norm using eps = h + dt."""
        self.fits = {}
        for p in self.PS:
            pairs = [(lv["eps"], lv["errors"][p]) for lv in self.levels]
            slope, intercept, r2 = rate_fit(pairs)
            self.fits[p] = {"slope": slope, "intercept": intercept, "r2": r2}
        return self.fits

    def write_csv(self, path) -> None:
        names = {1.0: "L1", 2.0: "L2", 4.0: "L4", np.inf: "Linf"}
        with open(path, "w") as f:
            f.write("level,h,dt,eps,L1,L2,L4,Linf\n")
            for k, lv in enumerate(self.levels):
                cells = [str(k), repr(lv["h"]), repr(lv["dt"]), repr(lv["eps"])]
                cells += [repr(lv["errors"][p]) for p in self.PS]
                f.write(",".join(cells) + "\n")
            if self.fits:
                f.write("# fit: norm slope intercept r2\n")
                for p in self.PS:
                    fit = self.fits[p]
                    f.write(
                        f"# {names[p]} {fit['slope']!r} "
                        f"{fit['intercept']!r} {fit['r2']!r}\n"
                    )

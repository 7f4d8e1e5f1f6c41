"""Numerical Hamiltonians F(p, q) for the monotone finite-difference scheme.

Both constructors produce fluxes that are consistent (F(-p, p) = H0(p)),
convex, and componentwise nondecreasing on a slope box once the dissipation
is large enough.  The CFL helper computes the box supremum of
sum_i (F_{p_i} + F_{q_i}) by dense lattice sampling, and the monotonicity
verifier stress-tests the explicit update with randomized stencils.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import CflViolation, ParameterError
from .hamiltonians import Hamiltonian

Array = np.ndarray


@dataclass(frozen=True)
class NumericalHamiltonian:
    """Two-slot flux F(p, q) with componentwise partial derivatives.

    ``value`` maps a pair of (..., d) arrays to (...); the partials map the
    same pair to (..., d) arrays.
    """

    value: Callable[[Array, Array], Array]
    partial_p: Callable[[Array, Array], Array]
    partial_q: Callable[[Array, Array], Array]
    base: Hamiltonian
    kind: str
    alpha: float | None = None


@dataclass(frozen=True)
class CflBound:
    """Monotonicity-preserving time-step bound dt <= h / M_F(R)."""

    R: float
    M_F: float
    dt_max: float


def lax_friedrichs(H: Hamiltonian, alpha: float) -> NumericalHamiltonian:
    """F(p, q) = H((q - p)/2) + alpha * sum_i (p_i + q_i)."""
    if not alpha > 0:
        raise ParameterError(f"alpha must be positive, got {alpha}")
    a = float(alpha)

    def value(p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        return H.value((q - p) / 2.0) + a * np.sum(p + q, axis=-1)

    def partial_p(p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        return -0.5 * H.grad((q - p) / 2.0) + a

    def partial_q(p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        return 0.5 * H.grad((q - p) / 2.0) + a

    return NumericalHamiltonian(value, partial_p, partial_q, H, "lax_friedrichs", a)


def separable_1d(H: Hamiltonian, check_samples: int = 2001) -> NumericalHamiltonian:
    """1-d upwind flux F(p, q) = F1(p) + F2(q).

    F1(p) = H(-p) on p > 0 and 0 otherwise; F2(q) = H(q) on q > 0 and 0
    otherwise.  Requires H(0) = 0 = min H, verified by sampling.  The closed
    branch (p <= 0, q <= 0 respectively) defines the partials at 0.
    """
    ps = np.linspace(-10.0, 10.0, check_samples)[:, None]
    vals = H.value(ps)
    h0 = float(H.value(np.zeros((1, 1)))[0])
    if abs(h0) > 1e-12 or np.min(vals) < -1e-12:
        raise ParameterError(
            "separable flux requires H(0) = 0 = min H "
            f"(got H(0)={h0:.3g}, sampled min={np.min(vals):.3g})"
        )

    def _check_dim(p):
        if p.shape[-1] != 1:
            raise ParameterError("separable flux is defined for d = 1 only")

    def value(p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        _check_dim(p)
        f1 = np.where(p[..., 0] > 0, H.value(-p), 0.0)
        f2 = np.where(q[..., 0] > 0, H.value(q), 0.0)
        return f1 + f2

    def partial_p(p, q):
        p = np.asarray(p, dtype=float)
        _check_dim(p)
        return np.where(p[..., :1] > 0, -H.grad(-p), 0.0)

    def partial_q(p, q):
        q = np.asarray(q, dtype=float)
        _check_dim(q)
        return np.where(q[..., :1] > 0, H.grad(q), 0.0)

    return NumericalHamiltonian(value, partial_p, partial_q, H, "separable_1d")


def suggest_alpha(H: Hamiltonian, R: float, dim: int = 1, samples: int = 65) -> float:
    """Smallest Lax-Friedrichs dissipation making both partials nonnegative
    on the slope box |p|_inf <= R: half the largest sampled |H_{p_i}|."""
    if R < 0:
        raise ParameterError(f"R must be nonnegative, got {R}")
    if R == 0:
        return 0.0
    if dim <= 2:
        axes = [np.linspace(-R, R, samples)] * dim
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
    else:
        # box corners plus axis sweeps; enough for the radial catalog shipped
        corners = np.array(list(itertools.product((-R, R), repeat=dim)))
        sweeps = []
        for a in range(dim):
            line = np.zeros((samples, dim))
            line[:, a] = np.linspace(-R, R, samples)
            sweeps.append(line)
        pts = np.concatenate([corners] + sweeps, axis=0)
    return 0.5 * float(np.max(np.abs(H.grad(pts))))


def cfl_bound(
    F: NumericalHamiltonian, R: float, h: float, dim: int = 1, samples: int = 33
) -> CflBound:
    """Dense-lattice estimate of M_F(R) and the resulting dt bound."""
    if not R > 0:
        raise ParameterError(f"R must be positive, got {R}")
    if not h > 0:
        raise ParameterError(f"h must be positive, got {h}")
    axes = [np.linspace(-R, R, samples)] * (2 * dim)
    mesh = np.meshgrid(*axes, indexing="ij")
    pq = np.stack([m.ravel() for m in mesh], axis=-1)
    p, q = pq[:, :dim], pq[:, dim:]
    total = np.sum(F.partial_p(p, q) + F.partial_q(p, q), axis=-1)
    m_f = float(np.max(total))
    m_f = max(m_f, 0.0)
    dt_max = h / m_f if m_f > 0 else np.inf
    return CflBound(R=R, M_F=m_f, dt_max=dt_max)


@dataclass(frozen=True)
class MonotonicityReport:
    trials: int
    violations: int
    max_violation: float


def verify_monotone_update(
    F: NumericalHamiltonian,
    R: float,
    h: float,
    dt: float,
    trials: int,
    dim: int = 1,
    rng: np.random.Generator | None = None,
    tol: float = 1e-12,
) -> MonotonicityReport:
    """Randomized check that the explicit update is nondecreasing in every
    stencil value.

    Each trial draws discrete slopes bounded by R, applies the update
    G(v) = v(x) - dt * F(-forward slopes, backward slopes), then bumps one
    stencil entry (center or a neighbor) upward by a random amount kept
    small enough that the slopes stay inside the box, and records any
    decrease of G.
    """
    if trials < 0:
        raise ParameterError("trials must be nonnegative")
    bound = cfl_bound(F, R, h, dim=dim)
    if dt > bound.dt_max:
        raise CflViolation(dt, bound.dt_max)
    if trials == 0:
        return MonotonicityReport(0, 0, 0.0)
    rng = rng or np.random.default_rng(0)

    s_fwd = rng.uniform(-R, R, size=(trials, dim))
    s_bwd = rng.uniform(-R, R, size=(trials, dim))
    v0 = rng.uniform(-1.0, 1.0, size=trials)

    def update(fwd, bwd, center):
        return center - dt * F.value(-fwd, bwd)

    g_base = update(s_fwd, s_bwd, v0)

    # which stencil entry gets bumped: 0 = center, 1..d = v(x + h e_i),
    # d+1..2d = v(x - h e_i)
    which = rng.integers(0, 2 * dim + 1, size=trials)
    frac = rng.uniform(0.1, 1.0, size=trials)

    new_fwd = s_fwd.copy()
    new_bwd = s_bwd.copy()
    new_v0 = v0.copy()

    center_mask = which == 0
    if np.any(center_mask):
        # raising the center lowers forward slopes and raises backward ones
        room = h * np.minimum(
            np.min(R + s_fwd, axis=1), np.min(R - s_bwd, axis=1)
        )
        db = frac * np.maximum(room, 0.0)
        new_v0[center_mask] += db[center_mask]
        new_fwd[center_mask] -= (db[center_mask] / h)[:, None]
        new_bwd[center_mask] += (db[center_mask] / h)[:, None]

    for a in range(dim):
        plus_mask = which == 1 + a
        if np.any(plus_mask):
            room = h * (R - s_fwd[:, a])
            db = frac * np.maximum(room, 0.0)
            new_fwd[plus_mask, a] = s_fwd[plus_mask, a] + db[plus_mask] / h
        minus_mask = which == 1 + dim + a
        if np.any(minus_mask):
            room = h * (R + s_bwd[:, a])
            db = frac * np.maximum(room, 0.0)
            new_bwd[minus_mask, a] = s_bwd[minus_mask, a] - db[minus_mask] / h

    g_new = update(new_fwd, new_bwd, new_v0)
    decrease = g_base - g_new
    max_violation = float(np.max(decrease)) if trials else 0.0
    max_violation = max(max_violation, 0.0)
    violations = int(np.sum(decrease > tol))
    return MonotonicityReport(trials, violations, max_violation)

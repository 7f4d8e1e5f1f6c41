"""Convex coercive Hamiltonians, potentials, and initial data.

Two Hamiltonian families are shipped: the quadratic one (closed-form
Legendre transform) and a smoothed norm (Legendre transform computed by
numerical maximization, finite only on the open unit ball of velocities).
Evaluation functions are vectorized over a trailing axis of length d and
are pure, so they are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, ParameterError

Array = np.ndarray


@dataclass(frozen=True)
class Hamiltonian:
    """Convex C^2 Hamiltonian p -> H0(p) with gradient and Legendre data.

    ``value``/``grad`` consume arrays of shape (..., d); ``legendre`` and
    ``legendre_grad`` consume velocity arrays of the same shape.
    """

    value: Callable[[Array], Array]
    grad: Callable[[Array], Array]
    legendre: Callable[[Array], Array]
    legendre_grad: Callable[[Array], Array]
    growth_tag: str


def quadratic_hamiltonian(scale: float = 1.0) -> Hamiltonian:
    """H0(p) = scale * |p|^2 / 2, with L(a) = |a|^2 / (2 * scale)."""
    if not scale > 0:
        raise ParameterError(f"scale must be positive, got {scale}")
    s = float(scale)

    def value(p):
        p = np.asarray(p, dtype=float)
        return 0.5 * s * np.sum(p * p, axis=-1)

    def grad(p):
        return s * np.asarray(p, dtype=float)

    def legendre(a):
        a = np.asarray(a, dtype=float)
        return np.sum(a * a, axis=-1) / (2.0 * s)

    def legendre_grad(a):
        return np.asarray(a, dtype=float) / s

    return Hamiltonian(value, grad, legendre, legendre_grad, "quadratic")


def smoothed_norm_hamiltonian(
    delta: float, p_samples: int = 513, refine_iters: int = 80
) -> Hamiltonian:
    """H0(p) = sqrt(delta^2 + |p|^2) - delta.

    Sublinear at infinity with slope 1, so the Legendre transform is finite
    only for |a| < 1; it is computed by a dense radial scan followed by
    golden-section refinement (H0 is radial, so the maximizing p is aligned
    with a).
    """
    if not delta > 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    dlt = float(delta)
    invphi = (np.sqrt(5.0) - 1.0) / 2.0

    def value(p):
        p = np.asarray(p, dtype=float)
        return np.sqrt(dlt * dlt + np.sum(p * p, axis=-1)) - dlt

    def grad(p):
        p = np.asarray(p, dtype=float)
        norm = np.sqrt(dlt * dlt + np.sum(p * p, axis=-1))
        return p / norm[..., None]

    def _legendre_radial(r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """sup_{s>=0} s*r - H0(s e) and its argmax, for radii r in [0, 1)."""
        if np.any(r >= 1.0):
            raise DomainError(
                "Legendre transform of the smoothed norm is +inf for |a| >= 1"
            )
        # pick the scan window so the slope of H0 at its edge exceeds r
        m = (1.0 + r) / 2.0
        p_max = dlt * m / np.sqrt(1.0 - m * m)
        sgrid = np.linspace(0.0, 1.0, p_samples)[None, :] * p_max[:, None]
        obj = sgrid * r[:, None] - (np.sqrt(dlt * dlt + sgrid * sgrid) - dlt)
        k = np.argmax(obj, axis=1)
        step = p_max / (p_samples - 1)
        lo = np.maximum(sgrid[np.arange(len(r)), k] - step, 0.0)
        hi = sgrid[np.arange(len(r)), k] + step

        def f(s):
            return s * r - (np.sqrt(dlt * dlt + s * s) - dlt)

        # golden-section maximization on the bracketing interval
        c = hi - invphi * (hi - lo)
        d = lo + invphi * (hi - lo)
        fc, fd = f(c), f(d)
        for _ in range(refine_iters):
            go_left = fc >= fd
            hi = np.where(go_left, d, hi)
            lo = np.where(go_left, lo, c)
            c = hi - invphi * (hi - lo)
            d = lo + invphi * (hi - lo)
            fc, fd = f(c), f(d)
        s_star = 0.5 * (lo + hi)
        return f(s_star), s_star

    def legendre(a):
        a = np.asarray(a, dtype=float)
        r = np.sqrt(np.sum(np.atleast_2d(a) ** 2, axis=-1)).ravel()
        vals, _ = _legendre_radial(r)
        return vals.reshape(a.shape[:-1]) if a.ndim > 1 else float(vals[0])

    def legendre_grad(a):
        a = np.asarray(a, dtype=float)
        flat = np.atleast_2d(a)
        r = np.sqrt(np.sum(flat**2, axis=-1))
        _, s_star = _legendre_radial(np.ravel(r))
        direction = np.where(
            r[..., None] > 0, flat / np.maximum(r[..., None], 1e-300), 0.0
        )
        out = direction * s_star.reshape(r.shape)[..., None]
        return out.reshape(a.shape)

    return Hamiltonian(value, grad, legendre, legendre_grad, "smoothed_norm")


@dataclass(frozen=True)
class Potential:
    """Lipschitz potential x -> V(x) on the torus."""

    value: Callable[[Array], Array]
    lipschitz_bound: float


def zero_potential() -> Potential:
    return Potential(lambda x: np.zeros(np.asarray(x).shape[:-1]), 0.0)


def cosine_potential(amplitude: float, frequency: int = 1) -> Potential:
    """V(x) = amplitude * sum_i cos(2 pi k x_i)."""
    if not np.isfinite(amplitude):
        raise ParameterError("amplitude must be finite")
    a = float(amplitude)
    w = 2.0 * np.pi * frequency

    def value(x):
        x = np.asarray(x, dtype=float)
        return a * np.sum(np.cos(w * x), axis=-1)

    def lip(dim: int) -> float:
        return w * abs(a) * np.sqrt(dim)

    # the bound is dimension dependent; store the worst case for d<=3 callers
    return Potential(value, lip(3))


def cosine_potential_for_dim(amplitude: float, dim: int, frequency: int = 1) -> Potential:
    """Same as :func:`cosine_potential` with the tight d-dependent bound."""
    base = cosine_potential(amplitude, frequency)
    return Potential(base.value, 2.0 * np.pi * frequency * abs(amplitude) * np.sqrt(dim))


@dataclass(frozen=True)
class InitialDatum:
    """Lipschitz, semiconcave terminal/initial datum g."""

    value: Callable[[Array], Array]
    lipschitz_bound: float
    semiconcavity_bound: float


def cosine_datum(amplitude: float = 1.0, frequency: int = 1, dim: int = 1) -> InitialDatum:
    """g(x) = amplitude * sum_i cos(2 pi k x_i)."""
    a = float(amplitude)
    w = 2.0 * np.pi * frequency

    def value(x):
        x = np.asarray(x, dtype=float)
        return a * np.sum(np.cos(w * x), axis=-1)

    return InitialDatum(value, w * abs(a) * np.sqrt(dim), w * w * abs(a))


def trig_poly_datum(coeffs, phases, dim: int = 1) -> InitialDatum:
    """g(x) = sum_m c_m cos(2 pi m (x_1 + ... + x_d) + phi_m).

    Smooth, hence semiconcave with constant sum_m |c_m| (2 pi m)^2 d.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    phases = np.asarray(phases, dtype=float)
    if coeffs.shape != phases.shape:
        raise ParameterError("coeffs and phases must have equal length")
    modes = np.arange(1, len(coeffs) + 1)

    def value(x):
        x = np.asarray(x, dtype=float)
        s = np.sum(x, axis=-1)
        return np.sum(
            coeffs * np.cos(2.0 * np.pi * modes * s[..., None] + phases), axis=-1
        )

    lip = float(np.sum(np.abs(coeffs) * 2.0 * np.pi * modes)) * np.sqrt(dim)
    conc = float(np.sum(np.abs(coeffs) * (2.0 * np.pi * modes) ** 2)) * dim
    return InitialDatum(value, lip, conc)


def random_trig_datum(
    rng: np.random.Generator,
    n_modes: int = 3,
    max_second_derivative: float = 60.0,
    dim: int = 1,
) -> InitialDatum:
    """Random trigonometric polynomial with bounded second derivative."""
    coeffs = rng.uniform(-1.0, 1.0, size=n_modes)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n_modes)
    modes = np.arange(1, n_modes + 1)
    norm = np.sum(np.abs(coeffs) * (2.0 * np.pi * modes) ** 2)
    if norm > 0:
        coeffs *= max_second_derivative / norm
    return trig_poly_datum(coeffs, phases, dim=dim)


def tent_datum(amplitude: float = 1.0) -> InitialDatum:
    """1-d periodic tent g(x) = amplitude * (1 - 4 |x - 1/2|).

    Has a concave kink at 1/2 and a convex kink at 0; not semiconcave, so
    the semiconcavity bound is +inf.  Used for BV-gradient scaling checks.
    """
    a = float(amplitude)

    def value(x):
        x = np.asarray(x, dtype=float)
        xf = x[..., 0] - np.floor(x[..., 0])
        return a * (1.0 - 4.0 * np.abs(xf - 0.5))

    return InitialDatum(value, 4.0 * abs(a), np.inf)

"""Named catalog of problem ingredients, shared by the CLI and the oracle.

A :class:`ProblemSpec` is a plain, serializable description (names plus
parameters) that can be turned into callables and hashed for caching.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .errors import ParameterError
from .hamiltonians import (
    Hamiltonian,
    InitialDatum,
    Potential,
    cosine_datum,
    cosine_potential_for_dim,
    quadratic_hamiltonian,
    smoothed_norm_hamiltonian,
    tent_datum,
    trig_poly_datum,
    zero_potential,
)

HAMILTONIANS = {
    "quadratic": lambda params, dim: quadratic_hamiltonian(
        scale=params.get("scale", 1.0)
    ),
    "smoothed_norm": lambda params, dim: smoothed_norm_hamiltonian(
        delta=params.get("delta", 1.0)
    ),
}

POTENTIALS = {
    "none": lambda params, dim: zero_potential(),
    "cosine": lambda params, dim: cosine_potential_for_dim(
        params.get("amplitude", 1.0), dim, int(params.get("frequency", 1))
    ),
}

DATA = {
    "cosine": lambda params, dim: cosine_datum(
        params.get("amplitude", 1.0), int(params.get("frequency", 1)), dim
    ),
    "tent": lambda params, dim: tent_datum(params.get("amplitude", 1.0)),
    "trig_poly": lambda params, dim: trig_poly_datum(
        params["coeffs"], params["phases"], dim
    ),
}


@dataclass(frozen=True)
class ProblemSpec:
    """Dimension, final time, and named ingredients of one problem."""

    dim: int
    final_time: float
    hamiltonian: str = "quadratic"
    hamiltonian_params: dict = field(default_factory=dict)
    potential: str = "none"
    potential_params: dict = field(default_factory=dict)
    datum: str = "cosine"
    datum_params: dict = field(default_factory=dict)

    def build_hamiltonian(self) -> Hamiltonian:
        return _lookup(HAMILTONIANS, self.hamiltonian, "hamiltonian")(
            self.hamiltonian_params, self.dim
        )

    def build_potential(self) -> Potential:
        return _lookup(POTENTIALS, self.potential, "potential")(
            self.potential_params, self.dim
        )

    def build_datum(self) -> InitialDatum:
        return _lookup(DATA, self.datum, "datum")(self.datum_params, self.dim)

    @property
    def has_potential(self) -> bool:
        return self.potential != "none" and self.potential_params.get(
            "amplitude", 1.0
        ) != 0.0

    def content_key(self, extra: dict | None = None) -> str:
        """Stable hash of the full description, for cache file names."""
        payload = {
            "dim": self.dim,
            "final_time": self.final_time,
            "hamiltonian": [self.hamiltonian, _canon(self.hamiltonian_params)],
            "potential": [self.potential, _canon(self.potential_params)],
            "datum": [self.datum, _canon(self.datum_params)],
            "extra": _canon(extra or {}),
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:24]


def _canon(params: dict) -> dict:
    out = {}
    for k, v in sorted(params.items()):
        if isinstance(v, (list, tuple)):
            out[k] = [float(x) for x in v]
        else:
            out[k] = float(v) if isinstance(v, (int, float)) else v
    return out


def _lookup(table: dict, name: str, what: str):
    try:
        return table[name]
    except KeyError:
        raise ParameterError(
            f"unknown {what} {name!r}; known: {sorted(table)}"
        ) from None

"""Periodic Cartesian grid on the unit torus [0,1)^d.

Grid functions live on the I^d nodes x_i = h*i (h = 1/I) with all index
arithmetic modulo I.  The module provides the forward/backward difference
operators, periodization, and the piecewise-multilinear interpolant whose
weights form a convex combination of the 2^d cell-corner values.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid with ``nodes_per_axis`` nodes along each axis."""

    dim: int
    nodes_per_axis: int

    def __post_init__(self):
        if self.dim < 1:
            raise ParameterError(f"dim must be >= 1, got {self.dim}")
        if self.nodes_per_axis < 2:
            raise ParameterError(
                f"nodes_per_axis must be >= 2, got {self.nodes_per_axis}"
            )

    @property
    def spacing(self) -> float:
        return 1.0 / self.nodes_per_axis

    @property
    def n_nodes(self) -> int:
        return self.nodes_per_axis**self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nodes_per_axis,) * self.dim

    def strides(self) -> tuple[int, ...]:
        """Row-major strides of the flat node index."""
        s = []
        acc = 1
        for _ in range(self.dim):
            s.append(acc)
            acc *= self.nodes_per_axis
        return tuple(reversed(s))

    def node_coords(self) -> np.ndarray:
        """All node coordinates, shape (I^d, d), row-major multi-index order."""
        axes = [np.arange(self.nodes_per_axis) * self.spacing] * self.dim
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def multi_indices(self) -> np.ndarray:
        """All multi-indices, shape (I^d, d), row-major order."""
        axes = [np.arange(self.nodes_per_axis)] * self.dim
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


def make_grid(dim: int, nodes_per_axis: int) -> TorusGrid:
    return TorusGrid(dim=dim, nodes_per_axis=nodes_per_axis)


@dataclass(frozen=True)
class GridFunction:
    """Real values attached to the nodes of a :class:`TorusGrid`.

    ``values`` is stored as a d-dimensional array of shape (I,)*d; its
    C-order ravel is the row-major multi-index order used by the CSV format.
    Instances are treated as immutable once built.
    """

    grid: TorusGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.shape != self.grid.shape:
            if arr.size == self.grid.n_nodes:
                arr = arr.reshape(self.grid.shape)
            else:
                raise ParameterError(
                    f"values of size {arr.size} do not fit grid with "
                    f"{self.grid.n_nodes} nodes"
                )
        if not np.all(np.isfinite(arr)):
            raise ParameterError("grid function values must be finite")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __add__(self, c: float) -> "GridFunction":
        return GridFunction(self.grid, self.values + c)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        if other.grid != self.grid:
            raise ParameterError("grids differ")
        return GridFunction(self.grid, self.values - other.values)


def sample(grid: TorusGrid, func) -> GridFunction:
    """Sample a function of points (``(n, d) -> (n,)``) on the grid nodes."""
    vals = np.asarray(func(grid.node_coords()), dtype=float)
    return GridFunction(grid, vals.reshape(grid.shape))


def periodize(x) -> np.ndarray:
    """Reduce each component of ``x`` into [0, 1) by subtracting its floor."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ParameterError("point must be finite")
    y = x - np.floor(x)
    # x slightly below an integer can round to exactly 1.0
    return np.where(y >= 1.0, 0.0, y)


def forward_diff(v: GridFunction, axis: int) -> GridFunction:
    """Forward difference quotient (v(x + h e_axis) - v(x)) / h, periodic."""
    if not 0 <= axis < v.grid.dim:
        raise ParameterError(f"axis {axis} out of range for dim {v.grid.dim}")
    d = (np.roll(v.values, -1, axis=axis) - v.values) / v.grid.spacing
    return GridFunction(v.grid, d)


def backward_diff(v: GridFunction, axis: int) -> GridFunction:
    """Backward difference quotient (v(x) - v(x - h e_axis)) / h, periodic."""
    if not 0 <= axis < v.grid.dim:
        raise ParameterError(f"axis {axis} out of range for dim {v.grid.dim}")
    d = (v.values - np.roll(v.values, 1, axis=axis)) / v.grid.spacing
    return GridFunction(v.grid, d)


def forward_diff_stack(v: GridFunction) -> np.ndarray:
    """All forward differences, shape (I,)*d + (d,)."""
    return np.stack(
        [forward_diff(v, a).values for a in range(v.grid.dim)], axis=-1
    )


def backward_diff_stack(v: GridFunction) -> np.ndarray:
    """All backward differences, shape (I,)*d + (d,)."""
    return np.stack(
        [backward_diff(v, a).values for a in range(v.grid.dim)], axis=-1
    )


def central_diff_stack(v: GridFunction) -> np.ndarray:
    """Central difference quotients at the nodes, shape (I,)*d + (d,)."""
    h = v.grid.spacing
    return np.stack(
        [
            (np.roll(v.values, -1, axis=a) - np.roll(v.values, 1, axis=a)) / (2 * h)
            for a in range(v.grid.dim)
        ],
        axis=-1,
    )


def interpolate(v: GridFunction, x) -> np.ndarray | float:
    """Piecewise-multilinear interpolation of ``v`` at points in [0,1)^d.

    ``x`` can be a single point of shape (d,) or a batch of shape (n, d).
    Callers are expected to periodize first; the cell index is clamped only
    against the floating-point corner case x/h == I.
    """
    grid = v.grid
    x_arr = np.asarray(x, dtype=float)
    single = x_arr.ndim == 1
    pts = np.atleast_2d(x_arr)
    if pts.shape[-1] != grid.dim:
        raise ParameterError(
            f"points of dimension {pts.shape[-1]} on a {grid.dim}-d grid"
        )
    if not np.all(np.isfinite(pts)):
        raise ParameterError("interpolation points must be finite")

    I = grid.nodes_per_axis
    t = pts / grid.spacing
    cell = np.floor(t).astype(np.int64)
    # x = 1 - ulp can land the scaled coordinate exactly at I
    cell = np.minimum(cell, I - 1)
    frac = t - cell

    out = np.zeros(pts.shape[0])
    for corner in itertools.product((0, 1), repeat=grid.dim):
        w = np.ones(pts.shape[0])
        for a, c in enumerate(corner):
            w *= frac[:, a] if c else 1.0 - frac[:, a]
        idx = tuple((cell[:, a] + corner[a]) % I for a in range(grid.dim))
        out += w * v.values[idx]
    return float(out[0]) if single else out


def write_csv(v: GridFunction, path) -> None:
    """Serialize to CSV: header ``# d=<d> I=<I>``, then ``i_1,...,i_d,value``."""
    grid = v.grid
    idx = grid.multi_indices()
    with open(path, "w") as f:
        f.write(f"# d={grid.dim} I={grid.nodes_per_axis}\n")
        for mi, val in zip(idx, v.flat):
            f.write(",".join(str(int(i)) for i in mi) + f",{float(val)!r}\n")


def read_csv(path) -> GridFunction:
    """Inverse of :func:`write_csv`."""
    with open(path) as f:
        header = f.readline().strip()
        if not header.startswith("#"):
            raise ParameterError(f"missing grid-function header in {path}")
        fields = dict(tok.split("=") for tok in header[1:].split())
        dim = int(fields["d"])
        nodes = int(fields["I"])
        vals = [float(line.strip().split(",")[-1]) for line in f if line.strip()]
    grid = make_grid(dim, nodes)
    if len(vals) != grid.n_nodes:
        raise ParameterError(
            f"expected {grid.n_nodes} values in {path}, found {len(vals)}"
        )
    return GridFunction(grid, np.array(vals).reshape(grid.shape))

"""Uniform structured grids, node-valued fields and implicit solid geometry.

Arrays are stored with shape ``(nx, ny, nz)`` and ``ij`` indexing, so node
``(i, j, k)`` sits at ``origin + h * (i, j, k)``.  Level sets follow the
inside-positive convention: ``phi > 0`` in the metal, ``phi < 0`` in the
surrounding medium.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import InvalidArgumentError, OutOfDomainError

UNITS = ("g/mm3", "mm", "mm/h", "dimensionless")
MIN_NODES = 3


@dataclass(frozen=True)
class StructuredGrid:
    dims: Tuple[int, int, int]
    spacing: float
    origin: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        if len(dims) != 3 or min(dims) < MIN_NODES:
            raise InvalidArgumentError(f"grid needs >= {MIN_NODES} nodes per axis, got {dims}")
        if not (self.spacing > 0 and math.isfinite(self.spacing)):
            raise InvalidArgumentError(f"grid spacing must be positive, got {self.spacing}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", float(self.spacing))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))

    @property
    def h(self) -> float:
        return self.spacing

    @property
    def size(self) -> int:
        return self.dims[0] * self.dims[1] * self.dims[2]

    @property
    def cell_volume(self) -> float:
        return self.spacing ** 3

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.origin) + self.spacing * (np.asarray(self.dims) - 1)

    def axis(self, a: int) -> np.ndarray:
        return self.origin[a] + self.spacing * np.arange(self.dims[a])

    def coordinates(self):
        """Return the three ``(nx, ny, nz)`` coordinate arrays."""
        return np.meshgrid(self.axis(0), self.axis(1), self.axis(2), indexing="ij")

    def node_position(self, index) -> np.ndarray:
        return np.asarray(self.origin) + self.spacing * np.asarray(index, dtype=float)

    def contains(self, points, atol: float = 1e-9) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        tol = atol * max(1.0, float(np.max(self.upper - np.asarray(self.origin))))
        lo = np.asarray(self.origin) - tol
        hi = self.upper + tol
        return np.all((p >= lo) & (p <= hi), axis=-1)

    def clamp(self, points) -> np.ndarray:
        return np.clip(points, np.asarray(self.origin), self.upper)


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: StructuredGrid
    values: np.ndarray
    unit: str = "g/mm3"

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.size != self.grid.size:
            raise InvalidArgumentError(
                f"field has {v.size} values, grid has {self.grid.size} nodes")
        v = v.reshape(self.grid.dims)
        if self.unit not in UNITS:
            raise InvalidArgumentError(f"unknown unit {self.unit!r}")
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError("field contains non-finite values")
        if self.unit == "g/mm3" and np.any(v < 0):
            raise InvalidArgumentError("concentration field has negative values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, grid, value, unit="g/mm3"):
        return cls(grid, np.full(grid.dims, float(value)), unit)


@dataclass(frozen=True, eq=False)
class LevelSetField:
    field: ScalarField
    band_width: float = 0.0

    def __post_init__(self):
        if self.field.unit != "mm":
            raise InvalidArgumentError("level set must be in mm")
        if self.band_width <= 0:
            object.__setattr__(self, "band_width", 3.0 * self.field.grid.spacing)

    @classmethod
    def from_array(cls, grid, values, band_width=0.0):
        return cls(ScalarField(grid, values, "mm"), band_width)

    @property
    def grid(self) -> StructuredGrid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    def solid_mask(self) -> np.ndarray:
        return self.field.values >= 0.0

    def with_values(self, values) -> "LevelSetField":
        return LevelSetField.from_array(self.grid, values, self.band_width)


def make_grid(extent: Sequence[float], h: float) -> StructuredGrid:
    """Grid covering ``[0, extent]`` per axis with node spacing ``h``."""
    extent = np.asarray(extent, dtype=float)
    if extent.shape != (3,) or np.any(~np.isfinite(extent)) or np.any(extent <= 0):
        raise InvalidArgumentError(f"extent must be three positive lengths, got {extent}")
    if not (h > 0 and math.isfinite(h)):
        raise InvalidArgumentError(f"spacing must be positive, got {h}")
    # tolerate round-off such as 80/0.1 = 799.999...
    ratio = extent / h
    counts = np.floor(ratio + 1e-9 * np.maximum(ratio, 1.0)).astype(int)
    if np.any(counts < MIN_NODES - 1):
        raise InvalidArgumentError(
            f"extent/h must be >= {MIN_NODES - 1} on every axis, got {ratio}")
    return StructuredGrid(tuple(int(c) + 1 for c in counts), h)


# ---------------------------------------------------------------------------
# geometry


def _as_vec(v, name):
    a = np.asarray(v, dtype=float).reshape(-1)
    if a.shape != (3,):
        raise InvalidArgumentError(f"{name} must have three components")
    return a


@dataclass(frozen=True)
class Sphere:
    center: Tuple[float, float, float]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(_as_vec(self.center, "center")))
        if self.radius <= 0:
            raise InvalidArgumentError("sphere radius must be positive")

    def evaluate(self, x, y, z):
        c = self.center
        return self.radius - np.sqrt((x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2)


@dataclass(frozen=True)
class Cuboid:
    center: Tuple[float, float, float]
    half_sizes: Tuple[float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(_as_vec(self.center, "center")))
        hs = _as_vec(self.half_sizes, "half_sizes")
        if np.any(hs <= 0):
            raise InvalidArgumentError("cuboid half sizes must be positive")
        object.__setattr__(self, "half_sizes", tuple(hs))

    def evaluate(self, x, y, z):
        q = [np.abs(p - c) - s for p, c, s in zip((x, y, z), self.center, self.half_sizes)]
        outside = np.sqrt(sum(np.maximum(qi, 0.0) ** 2 for qi in q))
        inside = np.minimum(np.maximum(np.maximum(q[0], q[1]), q[2]), 0.0)
        return -(outside + inside)


@dataclass(frozen=True)
class Cylinder:
    """Capped cylinder; ``point`` is the centre of the axis segment."""

    point: Tuple[float, float, float]
    direction: Tuple[float, float, float]
    radius: float
    half_length: float

    def __post_init__(self):
        object.__setattr__(self, "point", tuple(_as_vec(self.point, "point")))
        d = _as_vec(self.direction, "direction")
        n = np.linalg.norm(d)
        if n == 0:
            raise InvalidArgumentError("cylinder direction must be non-zero")
        object.__setattr__(self, "direction", tuple(d / n))
        if self.radius <= 0 or self.half_length <= 0:
            raise InvalidArgumentError("cylinder radius and half_length must be positive")

    def evaluate(self, x, y, z):
        dx, dy, dz = (x - self.point[0], y - self.point[1], z - self.point[2])
        u = self.direction
        t = dx * u[0] + dy * u[1] + dz * u[2]
        rho = np.sqrt(np.maximum(dx * dx + dy * dy + dz * dz - t * t, 0.0))
        q0 = rho - self.radius
        q1 = np.abs(t) - self.half_length
        outside = np.hypot(np.maximum(q0, 0.0), np.maximum(q1, 0.0))
        inside = np.minimum(np.maximum(q0, q1), 0.0)
        return -(outside + inside)


@dataclass(frozen=True)
class Union:
    children: tuple

    def __init__(self, *children):
        object.__setattr__(self, "children", tuple(children))

    def evaluate(self, x, y, z):
        if not self.children:
            raise InvalidArgumentError("empty union")
        out = self.children[0].evaluate(x, y, z)
        for c in self.children[1:]:
            out = np.maximum(out, c.evaluate(x, y, z))
        return out


@dataclass(frozen=True)
class Difference:
    """``base`` with ``cut`` removed."""

    base: object
    cut: object

    def evaluate(self, x, y, z):
        return np.minimum(self.base.evaluate(x, y, z), -self.cut.evaluate(x, y, z))


@dataclass(frozen=True)
class Intersection:
    children: tuple

    def __init__(self, *children):
        object.__setattr__(self, "children", tuple(children))

    def evaluate(self, x, y, z):
        if not self.children:
            raise InvalidArgumentError("empty intersection")
        out = self.children[0].evaluate(x, y, z)
        for c in self.children[1:]:
            out = np.minimum(out, c.evaluate(x, y, z))
        return out


PRIMITIVES = (Sphere, Cuboid, Cylinder)


def _is_empty(spec) -> bool:
    if spec is None:
        return True
    if isinstance(spec, (Union, Intersection)):
        return len(spec.children) == 0 or all(_is_empty(c) for c in spec.children)
    if isinstance(spec, Difference):
        return _is_empty(spec.base)
    if isinstance(spec, (list, tuple)):
        return len(spec) == 0
    return not hasattr(spec, "evaluate")


def sdf_build(spec, grid: StructuredGrid, band_width: float = 0.0) -> LevelSetField:
    """Sample the signed distance of ``spec`` at every grid node.

    A list/tuple of primitives is treated as their union.
    """
    if isinstance(spec, (list, tuple)):
        spec = Union(*spec)
    if _is_empty(spec):
        raise InvalidArgumentError("geometry spec is empty")
    x, y, z = grid.coordinates()
    return LevelSetField.from_array(grid, spec.evaluate(x, y, z), band_width)


# ---------------------------------------------------------------------------
# sampling and integrals


def trilinear(values: np.ndarray, grid: StructuredGrid, points) -> np.ndarray:
    """Vectorised trilinear interpolation; points must already lie in the box."""
    p = np.asarray(points, dtype=float)
    flat = p.reshape(-1, 3)
    s = (flat - np.asarray(grid.origin)) / grid.spacing
    dims = np.asarray(grid.dims)
    s = np.clip(s, 0.0, dims - 1)
    i0 = np.minimum(np.floor(s).astype(np.intp), dims - 2)
    f = s - i0
    out = np.zeros(len(flat))
    for di in (0, 1):
        wx = f[:, 0] if di else 1.0 - f[:, 0]
        for dj in (0, 1):
            wy = f[:, 1] if dj else 1.0 - f[:, 1]
            for dk in (0, 1):
                wz = f[:, 2] if dk else 1.0 - f[:, 2]
                out += wx * wy * wz * values[i0[:, 0] + di, i0[:, 1] + dj, i0[:, 2] + dk]
    return out.reshape(p.shape[:-1])


def trilinear_sample(field, p) -> float:
    """Trilinear interpolation of ``field`` at a single point ``p`` (mm)."""
    f = field.field if isinstance(field, LevelSetField) else field
    p = _as_vec(p, "p")
    if not f.grid.contains(p)[0]:
        raise OutOfDomainError(f"point {p.tolist()} lies outside the grid box")
    return float(trilinear(f.values, f.grid, p[None, :])[0])


def smoothed_heaviside(phi: np.ndarray, eps: float) -> np.ndarray:
    out = np.where(phi > 0, 1.0, 0.0)
    mid = np.abs(phi) < eps
    pm = phi[mid]
    out[mid] = np.clip(0.5 * (1.0 + pm / eps + np.sin(np.pi * pm / eps) / np.pi), 0.0, 1.0)
    return out


def volume_positive(phi: LevelSetField) -> float:
    """Solid volume (mm^3) as the integral of a smoothed Heaviside of phi."""
    g = phi.grid
    eps = 1.5 * g.spacing
    return float(np.sum(smoothed_heaviside(phi.values, eps)) * g.cell_volume)

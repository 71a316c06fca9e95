"""Rectangular node lattices and the discrete fields living on them.

Arrays are indexed [i, j] with i the x-index; node (i, j) sits at
(x0 + i*hx, y0 + j*hy).  CSV dumps are one line per node
``i,j,x,y,<components...>``, row-major in i then j.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .geometry import FLAT, GeometryModel

__all__ = [
    "Grid2",
    "GridMismatchError",
    "ScalarField",
    "OneFormField",
    "SymTensorField",
    "AnalyticScalar",
    "bilinear_sample",
    "require_same_grid",
    "read_scalar_csv",
    "read_oneform_csv",
    "read_symtensor_csv",
]


class GridMismatchError(ValueError):
    """Fields in one operation must share a grid."""


@dataclass(frozen=True)
class Grid2:
    """Uniform rectangular node lattice attached to a geometry model."""

    x0: float
    y0: float
    hx: float
    hy: float
    nx: int
    ny: int
    model: GeometryModel = field(default_factory=GeometryModel.flat)

    def __post_init__(self):
        if self.hx <= 0 or self.hy <= 0:
            raise ValueError("grid spacings must be positive")
        if self.nx < 3 or self.ny < 3:
            raise ValueError("need at least 3 nodes per axis")
        if self.model.is_hyperbolic and self.y0 <= 0:
            raise ValueError("hyperbolic grids require y0 > 0")

    @staticmethod
    def from_extent(x_min, x_max, y_min, y_max, nx, ny, model=None) -> "Grid2":
        model = model if model is not None else GeometryModel.flat()
        return Grid2(
            x0=x_min,
            y0=y_min,
            hx=(x_max - x_min) / (nx - 1),
            hy=(y_max - y_min) / (ny - 1),
            nx=nx,
            ny=ny,
            model=model,
        )

    @cached_property
    def xs(self) -> np.ndarray:
        return self.x0 + self.hx * np.arange(self.nx)

    @cached_property
    def ys(self) -> np.ndarray:
        return self.y0 + self.hy * np.arange(self.ny)

    @cached_property
    def x_nodes(self) -> np.ndarray:
        """(nx, ny) array of node x coordinates."""
        return np.broadcast_to(self.xs[:, None], (self.nx, self.ny)).copy()

    @cached_property
    def y_nodes(self) -> np.ndarray:
        return np.broadcast_to(self.ys[None, :], (self.nx, self.ny)).copy()

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    def x_max(self) -> float:
        return self.x0 + self.hx * (self.nx - 1)

    def y_max(self) -> float:
        return self.y0 + self.hy * (self.ny - 1)

    def contains(self, x, y) -> np.ndarray:
        tol = 1e-12 * max(self.hx, self.hy)
        x = np.asarray(x)
        y = np.asarray(y)
        return (
            (x >= self.x0 - tol)
            & (x <= self.x_max() + tol)
            & (y >= self.y0 - tol)
            & (y <= self.y_max() + tol)
        )

    def refine(self) -> "Grid2":
        """Halve both spacings, keeping the same extents."""
        return Grid2(
            self.x0, self.y0, self.hx / 2, self.hy / 2,
            2 * self.nx - 1, 2 * self.ny - 1, self.model,
        )


def _check_values(grid: Grid2, values: np.ndarray, name: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != grid.shape:
        raise GridMismatchError(
            f"{name} has shape {values.shape}, grid is {grid.shape}"
        )
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{name} contains non-finite entries")
    return values


def _same_grid(a: Grid2, b: Grid2) -> None:
    if a is b:
        return
    if (a.x0, a.y0, a.hx, a.hy, a.nx, a.ny, a.model.kind) != (
        b.x0, b.y0, b.hx, b.hy, b.nx, b.ny, b.model.kind,
    ):
        raise GridMismatchError("fields live on different grids")


@dataclass(frozen=True)
class ScalarField:
    grid: Grid2
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _check_values(self.grid, self.values, "values"))

    @staticmethod
    def from_function(grid: Grid2, fn) -> "ScalarField":
        return ScalarField(grid, fn(grid.x_nodes, grid.y_nodes))

    @staticmethod
    def zeros(grid: Grid2) -> "ScalarField":
        return ScalarField(grid, np.zeros(grid.shape))

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.grid, values)

    def to_csv(self, path) -> None:
        _write_csv(path, self.grid, ["u"], [self.values])


@dataclass(frozen=True)
class OneFormField:
    grid: Grid2
    a1: np.ndarray
    a2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a1", _check_values(self.grid, self.a1, "a1"))
        object.__setattr__(self, "a2", _check_values(self.grid, self.a2, "a2"))

    @staticmethod
    def from_functions(grid: Grid2, f1, f2) -> "OneFormField":
        return OneFormField(grid, f1(grid.x_nodes, grid.y_nodes), f2(grid.x_nodes, grid.y_nodes))

    def to_csv(self, path) -> None:
        _write_csv(path, self.grid, ["a1", "a2"], [self.a1, self.a2])


@dataclass(frozen=True)
class SymTensorField:
    """Symmetric 2-tensor; the off-diagonal component is stored once."""

    grid: Grid2
    s11: np.ndarray
    s12: np.ndarray
    s22: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "s11", _check_values(self.grid, self.s11, "s11"))
        object.__setattr__(self, "s12", _check_values(self.grid, self.s12, "s12"))
        object.__setattr__(self, "s22", _check_values(self.grid, self.s22, "s22"))

    @staticmethod
    def from_functions(grid: Grid2, f11, f12, f22) -> "SymTensorField":
        X, Y = grid.x_nodes, grid.y_nodes
        return SymTensorField(grid, f11(X, Y), f12(X, Y), f22(X, Y))

    @staticmethod
    def zeros(grid: Grid2) -> "SymTensorField":
        z = np.zeros(grid.shape)
        return SymTensorField(grid, z, z.copy(), z.copy())

    def trace(self) -> np.ndarray:
        return self.s11 + self.s22

    def to_csv(self, path) -> None:
        _write_csv(path, self.grid, ["s11", "s12", "s22"], [self.s11, self.s12, self.s22])


def require_same_grid(*fields) -> Grid2:
    grid = fields[0].grid
    for f in fields[1:]:
        _same_grid(grid, f.grid)
    return grid


def bilinear_sample(grid: Grid2, component: np.ndarray, xq, yq) -> np.ndarray:
    """Bilinear interpolation of a nodal array at query points inside the grid."""
    xq = np.asarray(xq, dtype=float)
    yq = np.asarray(yq, dtype=float)
    if not np.all(grid.contains(xq, yq)):
        raise ValueError("interpolation point outside grid")
    s = (xq - grid.x0) / grid.hx
    t = (yq - grid.y0) / grid.hy
    i = np.clip(np.floor(s).astype(int), 0, grid.nx - 2)
    j = np.clip(np.floor(t).astype(int), 0, grid.ny - 2)
    fs = s - i
    ft = t - j
    v = (
        component[i, j] * (1 - fs) * (1 - ft)
        + component[i + 1, j] * fs * (1 - ft)
        + component[i, j + 1] * (1 - fs) * ft
        + component[i + 1, j + 1] * fs * ft
    )
    return v


@dataclass(frozen=True)
class AnalyticScalar:
    """A scalar function bundled with its exact first and second derivatives.

    Used for manufactured solutions and identity checks where finite
    differences would pollute machine-precision assertions.
    """

    f: callable
    fx: callable
    fy: callable
    fxx: callable = None
    fxy: callable = None
    fyy: callable = None

    def sample(self, grid: Grid2) -> ScalarField:
        return ScalarField.from_function(grid, self.f)

    def gradient_field(self, grid: Grid2) -> OneFormField:
        return OneFormField.from_functions(grid, self.fx, self.fy)


# --- CSV serialization -------------------------------------------------

def _write_csv(path, grid: Grid2, names, components) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "x", "y", *names])
        for i in range(grid.nx):
            x = grid.x0 + i * grid.hx
            for j in range(grid.ny):
                y = grid.y0 + j * grid.hy
                writer.writerow(
                    [i, j, repr(x), repr(y)] + [repr(float(c[i, j])) for c in components]
                )


def _read_csv(path, expected_names, model):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:4] != ["i", "j", "x", "y"] or header[4:] != expected_names:
            raise ValueError(f"unexpected CSV header {header!r}")
        rows = [(int(r[0]), int(r[1]), *map(float, r[2:])) for r in reader]
    nx = max(r[0] for r in rows) + 1
    ny = max(r[1] for r in rows) + 1
    if len(rows) != nx * ny:
        raise ValueError("CSV does not cover a full grid")
    x0 = min(r[2] for r in rows)
    y0 = min(r[3] for r in rows)
    hx = (max(r[2] for r in rows) - x0) / (nx - 1)
    hy = (max(r[3] for r in rows) - y0) / (ny - 1)
    grid = Grid2(x0, y0, hx, hy, nx, ny, model or GeometryModel(FLAT))
    comps = [np.empty((nx, ny)) for _ in expected_names]
    for r in rows:
        for k, c in enumerate(comps):
            c[r[0], r[1]] = r[4 + k]
    return grid, comps


def read_scalar_csv(path, model=None) -> ScalarField:
    grid, (u,) = _read_csv(path, ["u"], model)
    return ScalarField(grid, u)


def read_oneform_csv(path, model=None) -> OneFormField:
    grid, (a1, a2) = _read_csv(path, ["a1", "a2"], model)
    return OneFormField(grid, a1, a2)


def read_symtensor_csv(path, model=None) -> SymTensorField:
    grid, (s11, s12, s22) = _read_csv(path, ["s11", "s12", "s22"], model)
    return SymTensorField(grid, s11, s12, s22)

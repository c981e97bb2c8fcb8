"""Structured quadrilateral mesh with bilinear (Q1) elements.

Nodes are numbered row-major with x running fastest, so node ``(i, j)`` has
index ``j * (nx + 1) + i``.  Local element nodes are ordered
counter-clockwise starting at the lower-left corner.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import ConfigurationError, ContractError, OutOfDomainError

# reference coordinates of the four local nodes
LOCAL_NODES = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    x0: float = 0.0
    y0: float = 0.0
    x1: float = 1.0
    y1: float = 1.0

    def __post_init__(self):
        for name in ("nx", "ny"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value:
                raise ConfigurationError(f"{name} must be an integer, got {value!r}")
            if value < 2:
                raise ConfigurationError(f"{name} must be >= 2, got {value}")
        if not (np.isfinite(self.x0) and np.isfinite(self.x1) and self.x1 > self.x0):
            raise ConfigurationError(f"invalid x extent [{self.x0}, {self.x1}]")
        if not (np.isfinite(self.y0) and np.isfinite(self.y1) and self.y1 > self.y0):
            raise ConfigurationError(f"invalid y extent [{self.y0}, {self.y1}]")

    @property
    def hx(self) -> float:
        return (self.x1 - self.x0) / self.nx

    @property
    def hy(self) -> float:
        return (self.y1 - self.y0) / self.ny

    @property
    def num_nodes(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def num_cells(self) -> int:
        return self.nx * self.ny

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)


def quadrature(order: int):
    """Tensor-product Gauss-Legendre rule on the reference square.

    Parameters
    ----------
    order : int
        Number of points per axis, one of 1, 2 or 3.

    Returns
    -------
    points : ndarray, shape (order**2, 2)
    weights : ndarray, shape (order**2,)
        Weights sum to 4, the area of ``[-1, 1]^2``.
    """
    if order not in (1, 2, 3):
        raise ConfigurationError(f"unsupported quadrature order {order!r}; use 1, 2 or 3")
    x, w = leggauss(order)
    # x fastest, matching the node ordering
    px, py = np.meshgrid(x, x, indexing="xy")
    wx, wy = np.meshgrid(w, w, indexing="xy")
    points = np.column_stack([px.ravel(), py.ravel()])
    weights = (wx * wy).ravel()
    return points, weights


def reference_shape(local_coords):
    """Bilinear shape values and reference-coordinate gradients.

    ``local_coords`` has shape (..., 2); returns values (..., 4) and
    gradients (..., 4, 2).
    """
    xi = np.asarray(local_coords, dtype=float)
    s = xi[..., 0, None]
    t = xi[..., 1, None]
    sa = LOCAL_NODES[:, 0]
    ta = LOCAL_NODES[:, 1]
    values = 0.25 * (1.0 + sa * s) * (1.0 + ta * t)
    ds = 0.25 * sa * (1.0 + ta * t)
    dt = 0.25 * ta * (1.0 + sa * s)
    return values, np.stack([ds, dt], axis=-1)


@dataclass(frozen=True)
class Element:
    """Q1 element data at the quadrature points of one rule.

    The Jacobian is the same diagonal matrix on every cell, so all
    arrays are shared across cells.
    """

    points: np.ndarray  # (nq, 2) reference coordinates
    weights: np.ndarray  # (nq,) physical weights, include det J
    N: np.ndarray  # (nq, 4)
    dN: np.ndarray  # (nq, 4, 2) physical gradients


class Grid:
    """Mesh built from a :class:`GridSpec`; immutable after construction."""

    def __init__(self, spec: GridSpec):
        self.spec = spec
        nx, ny = spec.nx, spec.ny
        xs = spec.x0 + spec.hx * np.arange(nx + 1)
        ys = spec.y0 + spec.hy * np.arange(ny + 1)
        xs[-1], ys[-1] = spec.x1, spec.y1
        self.x = xs
        self.y = ys
        X, Y = np.meshgrid(xs, ys, indexing="xy")
        self.coords = np.column_stack([X.ravel(), Y.ravel()])
        i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
        n0 = (j * (nx + 1) + i).ravel()
        self.cells = np.column_stack([n0, n0 + 1, n0 + nx + 2, n0 + nx + 1])
        self.coords.flags.writeable = False
        self.cells.flags.writeable = False

        idx = np.arange(spec.num_nodes).reshape(ny + 1, nx + 1)
        self.boundary = {
            "left": idx[:, 0].copy(),
            "right": idx[:, -1].copy(),
            "bottom": idx[0, :].copy(),
            "top": idx[-1, :].copy(),
        }
        self._elements = {}

    @property
    def nx(self):
        return self.spec.nx

    @property
    def ny(self):
        return self.spec.ny

    @property
    def num_nodes(self):
        return self.spec.num_nodes

    @property
    def num_cells(self):
        return self.spec.num_cells

    @cached_property
    def boundary_nodes(self):
        return np.unique(np.concatenate(list(self.boundary.values())))

    def element(self, order: int = 2) -> Element:
        if order not in self._elements:
            points, w = quadrature(order)
            N, dNref = reference_shape(points)
            jac = np.array([2.0 / self.spec.hx, 2.0 / self.spec.hy])
            det = 0.25 * self.spec.hx * self.spec.hy
            self._elements[order] = Element(points, w * det, N, dNref * jac)
        return self._elements[order]

    def shape_eval(self, cell: int, local_coords):
        """Shape values and physical gradients on ``cell`` at reference coordinates.

        The Jacobian is constant and diagonal, so ``cell`` only selects the
        element's node set; it does not change the returned arrays.
        """
        if not 0 <= cell < self.num_cells:
            raise ContractError(f"cell index {cell} out of range")
        values, grads = reference_shape(local_coords)
        return values, grads * np.array([2.0 / self.spec.hx, 2.0 / self.spec.hy])

    # -- evaluation helpers used by assembly and diagnostics ---------------

    def at_quadrature(self, nodal, order: int = 2):
        """Interpolate nodal values to quadrature points, shape (ncell, nq[, ...])."""
        el = self.element(order)
        local = np.asarray(nodal)[self.cells]  # (nc, 4, ...)
        return np.einsum("qa,ca...->cq...", el.N, local)

    def grad_at_quadrature(self, nodal, order: int = 2):
        """Gradient at quadrature points, shape (ncell, nq, ..., 2)."""
        el = self.element(order)
        local = np.asarray(nodal)[self.cells]
        return np.einsum("qak,ca...->cq...k", el.dN, local)

    def integrate(self, qvalues, order: int = 2) -> float:
        """Sum quadrature-point values (ncell, nq) against the physical weights."""
        return float(np.einsum("cq,q->", qvalues, self.element(order).weights))

    def locate(self, points):
        """Cell index and reference coordinates of physical points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        s = self.spec
        tol = 1e-12 * max(s.x1 - s.x0, s.y1 - s.y0)
        outside = (
            (pts[:, 0] < s.x0 - tol)
            | (pts[:, 0] > s.x1 + tol)
            | (pts[:, 1] < s.y0 - tol)
            | (pts[:, 1] > s.y1 + tol)
        )
        if np.any(outside):
            bad = pts[np.argmax(outside)]
            raise OutOfDomainError(f"point ({bad[0]:g}, {bad[1]:g}) outside the domain")
        fx = (pts[:, 0] - s.x0) / s.hx
        fy = (pts[:, 1] - s.y0) / s.hy
        i = np.clip(np.floor(fx).astype(int), 0, s.nx - 1)
        j = np.clip(np.floor(fy).astype(int), 0, s.ny - 1)
        local = np.column_stack([2.0 * (fx - i) - 1.0, 2.0 * (fy - j) - 1.0])
        return j * s.nx + i, local

    def evaluate(self, nodal, points):
        """Bilinear interpolation of a nodal array (N, ...) at points (P, 2)."""
        cell, local = self.locate(points)
        values, _ = reference_shape(local)
        nodes = self.cells[cell]  # (P, 4)
        return np.einsum("pa,pa...->p...", values, np.asarray(nodal)[nodes])

    def nodal_gradient(self, nodal):
        """Recovered nodal gradient (second-order differences, one-sided at edges).

        Returns shape (N, ..., 2).
        """
        arr = np.asarray(nodal, dtype=float)
        tail = arr.shape[1:]
        grid_arr = arr.reshape((self.ny + 1, self.nx + 1) + tail)
        gy, gx = np.gradient(grid_arr, self.y, self.x, axis=(0, 1), edge_order=2)
        return np.stack([gx, gy], axis=-1).reshape(arr.shape + (2,))

    @cached_property
    def dissection_order(self):
        """Nested-dissection permutation of the nodes (fill-reducing for LU)."""
        nx1 = self.nx + 1
        out = []

        def rec(i0, i1, j0, j1):
            if (i1 - i0) * (j1 - j0) <= 16:
                for j in range(j0, j1):
                    out.extend(range(j * nx1 + i0, j * nx1 + i1))
                return
            if i1 - i0 >= j1 - j0:
                m = (i0 + i1) // 2
                rec(i0, m, j0, j1)
                rec(m + 1, i1, j0, j1)
                out.extend(j * nx1 + m for j in range(j0, j1))
            else:
                m = (j0 + j1) // 2
                rec(i0, i1, j0, m)
                rec(i0, i1, m + 1, j1)
                out.extend(range(m * nx1 + i0, m * nx1 + i1))

        rec(0, nx1, 0, self.ny + 1)
        order = np.array(out)
        order.flags.writeable = False
        return order

    def check_same(self, other: "Grid"):
        if other is not self and other.spec != self.spec:
            raise ContractError("fields live on different grids")


def make_grid(spec: GridSpec) -> Grid:
    return Grid(spec)


@dataclass(frozen=True, eq=False)
class Field:
    """One scalar per node in row-major order."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.size != self.grid.num_nodes:
            raise ContractError(
                f"scalar field needs {self.grid.num_nodes} values, got {values.size}"
            )
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, grid, c):
        return cls(grid, np.full(grid.num_nodes, float(c)))

    @classmethod
    def from_function(cls, grid, fn):
        return cls(grid, fn(grid.coords[:, 0], grid.coords[:, 1]))

    def is_finite(self):
        return bool(np.all(np.isfinite(self.values)))


@dataclass(frozen=True, eq=False)
class VectorField:
    """Two components per node, stored interleaved ``(ux0, uy0, ux1, ...)``."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.size != 2 * self.grid.num_nodes:
            raise ContractError(
                f"vector field needs {2 * self.grid.num_nodes} values, got {values.size}"
            )
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(2 * grid.num_nodes))

    @classmethod
    def from_components(cls, grid, ux, uy):
        return cls(grid, np.column_stack([ux, uy]).ravel())

    @property
    def components(self):
        """View of shape (N, 2)."""
        return self.values.reshape(-1, 2)

    def is_finite(self):
        return bool(np.all(np.isfinite(self.values)))


def sample_line(field, y: float, n: int):
    """Bilinear samples of ``field`` at ``n`` equispaced x positions on line ``y``.

    Returns ``(xs, values)``; for a :class:`VectorField` values have shape (n, 2).
    """
    grid = field.grid
    s = grid.spec
    if n < 2:
        raise ContractError(f"need at least 2 samples, got {n}")
    if not s.y0 <= y <= s.y1:
        raise OutOfDomainError(f"y = {y} outside [{s.y0}, {s.y1}]")
    xs = np.linspace(s.x0, s.x1, n)
    pts = np.column_stack([xs, np.full(n, float(y))])
    nodal = field.components if isinstance(field, VectorField) else field.values
    return xs, grid.evaluate(nodal, pts)

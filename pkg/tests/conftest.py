"""Shared builders and independent oracles for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from wxtopo import BoundaryConditions, DensityField, GridSpec


def patch_bc(grid: GridSpec, traction: float = 1.0) -> BoundaryConditions:
    """Uniaxial patch: bottom rollers (uy = 0), one ux pin, top-edge traction."""
    nnx = grid.nx + 1
    loads = np.zeros(2 * nnx * (grid.ny + 1))
    top = grid.ny * nnx + np.arange(nnx)
    nodal = traction * grid.hx
    loads[2 * top + 1] = nodal
    loads[2 * top[0] + 1] = nodal / 2.0
    loads[2 * top[-1] + 1] = nodal / 2.0
    bottom = np.arange(nnx)
    return BoundaryConditions(
        grid,
        fixed_dofs=np.array([2 * bottom[0]]),
        loads=loads,
        roller_dofs=2 * bottom + 1,
    )


def symmetric_patch_bc(grid: GridSpec, traction: float = 1.0) -> BoundaryConditions:
    """Patch with the ux pin at the bottom-center node (mirror-symmetric for even nx)."""
    assert grid.nx % 2 == 0
    nnx = grid.nx + 1
    loads = np.zeros(2 * nnx * (grid.ny + 1))
    top = grid.ny * nnx + np.arange(nnx)
    nodal = traction * grid.hx
    loads[2 * top + 1] = nodal
    loads[2 * top[0] + 1] = nodal / 2.0
    loads[2 * top[-1] + 1] = nodal / 2.0
    bottom = np.arange(nnx)
    return BoundaryConditions(
        grid,
        fixed_dofs=np.array([2 * (grid.nx // 2)]),
        loads=loads,
        roller_dofs=2 * bottom + 1,
    )


def cantilever_bc(grid: GridSpec, load: float = -1.0) -> BoundaryConditions:
    """Left edge clamped, point load at the middle of the right edge."""
    nnx = grid.nx + 1
    loads = np.zeros(2 * nnx * (grid.ny + 1))
    tip = (grid.ny // 2) * nnx + grid.nx
    loads[2 * tip + 1] = load
    left = np.arange(0, nnx * (grid.ny + 1), nnx)
    fixed = np.concatenate([2 * left, 2 * left + 1])
    return BoundaryConditions(grid, fixed_dofs=fixed, loads=loads)


def disk_field(grid: GridSpec, cx: float, cy: float, radius: float,
               background: float = 0.0) -> DensityField:
    xs, ys = grid.cell_centers()
    inside = (xs - cx) ** 2 + (ys - cy) ** 2 <= radius**2
    values = np.full(grid.n, background)
    values[inside] = 1.0
    return DensityField(grid, values)


def gaussian_field(grid: GridSpec, cx: float, cy: float, sigma: float) -> DensityField:
    xs, ys = grid.cell_centers()
    values = np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2.0 * sigma**2))
    return DensityField(grid, values / values.max())


def lp_barycenter(a_list, weights, cost) -> np.ndarray:
    """Exact (unregularized) fixed-support barycenter by linear programming.

    Variables are one transport plan per input plus the shared barycenter
    masses; completely independent of the iterative-scaling code path.
    """
    from scipy.optimize import linprog
    from scipy.sparse import coo_matrix

    n = len(a_list[0])
    n_in = len(a_list)
    nvar = n_in * n * n + n
    rows, cols, vals = [], [], []
    b_eq = []
    row = 0
    for k, a in enumerate(a_list):
        base = k * n * n
        for i in range(n):  # plan k row sums equal input k
            rows.extend([row] * n)
            cols.extend(range(base + i * n, base + (i + 1) * n))
            vals.extend([1.0] * n)
            b_eq.append(a[i])
            row += 1
    for k in range(n_in):
        base = k * n * n
        for j in range(n):  # plan k column sums equal the barycenter
            rows.extend([row] * n)
            cols.extend(range(base + j, base + n * n, n))
            vals.extend([1.0] * n)
            rows.append(row)
            cols.append(n_in * n * n + j)
            vals.append(-1.0)
            b_eq.append(0.0)
            row += 1
    a_eq = coo_matrix((vals, (rows, cols)), shape=(row, nvar))
    c = np.concatenate([w * np.asarray(cost).ravel() for w in weights] + [np.zeros(n)])
    res = linprog(c, A_eq=a_eq, b_eq=np.array(b_eq), bounds=(0, None), method="highs")
    assert res.success, res.message
    return res.x[n_in * n * n:]


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)

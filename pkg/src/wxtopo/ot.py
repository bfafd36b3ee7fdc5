"""Entropy-regularized optimal transport on structured grids.

The squared-Euclidean ground cost over cell centers makes the Gibbs kernel
K = exp(-C / eps) a Gaussian, which factorizes into one 1D Gaussian per grid
axis. The convolutional kernel mode exploits that factorization and turns the
O(n^2) kernel products of the scaling iterations into O(n * (nx + ny)) work;
the dense mode materializes K and serves as the reference for equivalence
tests and for extracting transport plans on small instances.

Numerical conventions (all linear-domain, no log stabilization):
  * the separable axis factors are floored at 1e-150 and the dense matrix is
    built as their Kronecker product, so both modes share one tail structure
    and mass can always move even where exp(-d^2/eps) underflows;
  * every scaling-vector denominator is floored at 1e-300 in magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadWeights, SizeLimit
from .grid_field import GridSpec, ProbabilityField, check_same_grid

_DENOM_FLOOR = 1e-300
_AXIS_FLOOR = 1e-150

DEFAULT_MAX_ITER = 10_000


def _axis_kernel(count: int, h: float, epsilon: float) -> np.ndarray:
    idx = np.arange(count, dtype=np.float64)
    d = (idx[:, None] - idx[None, :]) * h
    return np.maximum(np.exp(-(d * d) / epsilon), _AXIS_FLOOR)


def _axis_cost_kernel(count: int, h: float, epsilon: float) -> np.ndarray:
    idx = np.arange(count, dtype=np.float64)
    d2 = ((idx[:, None] - idx[None, :]) * h) ** 2
    return d2 * _axis_kernel(count, h, epsilon)


def squared_distance_matrix(grid: GridSpec) -> np.ndarray:
    """Full n-by-n squared Euclidean cost over cell centers."""
    xs, ys = grid.cell_centers()
    dx = xs[:, None] - xs[None, :]
    dy = ys[:, None] - ys[None, :]
    return dx * dx + dy * dy


@dataclass(frozen=True, eq=False)
class KernelApplier:
    """Gibbs kernel K = exp(-C / eps) for one grid and regularization strength.

    mode="dense" stores the full symmetric matrix; mode="convolutional"
    applies the two separable axis factors instead. Both expose the plain
    product K @ x and the cost-weighted product (K * C) @ x needed for the
    transport value.
    """

    grid: GridSpec
    epsilon: float
    mode: str = "convolutional"
    _kx: np.ndarray = field(init=False, repr=False)
    _ky: np.ndarray = field(init=False, repr=False)
    _kcx: np.ndarray = field(init=False, repr=False)
    _kcy: np.ndarray = field(init=False, repr=False)
    _dense: np.ndarray | None = field(init=False, repr=False)

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.mode not in ("dense", "convolutional"):
            raise ValueError(f"unknown kernel mode {self.mode!r}")
        g = self.grid
        object.__setattr__(self, "_kx", _axis_kernel(g.nx, g.hx, self.epsilon))
        object.__setattr__(self, "_ky", _axis_kernel(g.ny, g.hy, self.epsilon))
        object.__setattr__(self, "_kcx", _axis_cost_kernel(g.nx, g.hx, self.epsilon))
        object.__setattr__(self, "_kcy", _axis_cost_kernel(g.ny, g.hy, self.epsilon))
        dense = None
        if self.mode == "dense":
            dense = self._build_dense()
        object.__setattr__(self, "_dense", dense)

    def _build_dense(self) -> np.ndarray:
        # product of the floored axis factors, so both modes share one tail
        # structure; equals exp(-C/eps) wherever that does not underflow
        return np.kron(self._ky, self._kx)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """K @ x (K is symmetric, so this is also K^T @ x)."""
        if self._dense is not None:
            return self._dense @ x
        mat = x.reshape(self.grid.ny, self.grid.nx)
        return (self._ky @ mat @ self._kx).ravel()

    def apply_cost(self, x: np.ndarray) -> np.ndarray:
        """(K * C) @ x, with C the squared-distance cost C = cx + cy."""
        if self._dense is not None:
            return (np.kron(self._ky, self._kcx) + np.kron(self._kcy, self._kx)) @ x
        mat = x.reshape(self.grid.ny, self.grid.nx)
        part_x = self._ky @ mat @ self._kcx
        part_y = self._kcy @ mat @ self._kx
        return (part_x + part_y).ravel()

    def dense_matrix(self) -> np.ndarray:
        if self._dense is None:
            raise ValueError("kernel was built in convolutional mode")
        return self._dense


@dataclass
class SinkhornReport:
    """Outcome of a scaling run.

    ``value`` is the transport cost for distance calls and the barycenter
    field for barycenter calls.
    """

    value: object
    iterations: int
    final_residual: float
    converged: bool

    def csv_row(self) -> str:
        return f"{self.iterations},{float(self.final_residual)!r},{int(self.converged)}"


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Dense transport plan for small instances."""

    plan: np.ndarray

    def __post_init__(self):
        if self.plan.ndim != 2 or np.any(self.plan < 0):
            raise ValueError("plan must be a nonnegative matrix")

    def row_sums(self) -> np.ndarray:
        return self.plan.sum(axis=1)

    def col_sums(self) -> np.ndarray:
        return self.plan.sum(axis=0)


def _floored(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, _DENOM_FLOOR)


def _scaling_loop(kern, av, bv, tau, max_iter):
    """Alternating scaling until the max marginal residual drops below tau."""
    u = np.ones_like(av)
    v = np.ones_like(bv)
    kv = kern.apply(v)
    iterations = 0
    residual = np.inf
    converged = False
    for iterations in range(1, max_iter + 1):
        u = av / _floored(kv)
        ku = kern.apply(u)
        v = bv / _floored(ku)
        kv = kern.apply(v)
        ra = np.abs(u * kv - av).sum()
        rb = np.abs(v * ku - bv).sum()
        residual = max(ra, rb)
        if residual < tau:
            converged = True
            break
    return u, v, iterations, residual, converged


def sinkhorn_distance(
    a: ProbabilityField,
    b: ProbabilityField,
    epsilon: float,
    tau: float,
    max_iter: int = DEFAULT_MAX_ITER,
    mode: str = "convolutional",
    kernel: KernelApplier | None = None,
) -> SinkhornReport:
    """Entropy-regularized transport cost between two grid measures.

    Scales u <- a / (K v) and v <- b / (K^T u) until both L1 marginal
    residuals fall below ``tau``, then returns sum_ij u_i K_ij C_ij v_j.
    Non-convergence within ``max_iter`` is reported, not raised.
    """
    check_same_grid(a, b)
    if tau <= 0 and max_iter <= 0:
        raise ValueError("need a positive tau or a positive max_iter")
    kern = kernel if kernel is not None else KernelApplier(a.grid, epsilon, mode)
    u, v, iterations, residual, converged = _scaling_loop(
        kern, a.masses, b.masses, tau, max_iter
    )
    value = float(u @ kern.apply_cost(v))
    return SinkhornReport(value, iterations, residual, converged)


def sinkhorn_plan(
    a: ProbabilityField,
    b: ProbabilityField,
    epsilon: float,
    tau: float,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[TransportPlan, SinkhornReport]:
    """Dense-mode variant that also returns the plan diag(u) K diag(v)."""
    check_same_grid(a, b)
    kern = KernelApplier(a.grid, epsilon, "dense")
    u, v, iterations, residual, converged = _scaling_loop(
        kern, a.masses, b.masses, tau, max_iter
    )
    plan = (u[:, None] * kern.dense_matrix()) * v[None, :]
    value = float(u @ kern.apply_cost(v))
    return TransportPlan(plan), SinkhornReport(value, iterations, residual, converged)


def _geometric_mean(ts: list[np.ndarray], weights: np.ndarray) -> np.ndarray:
    # exp(sum_i w_i log t_i); log space avoids overflow when scalings blow up
    acc = np.zeros_like(ts[0])
    for w, t in zip(weights, ts):
        if w != 0.0:
            acc += w * np.log(t)
    return np.exp(acc)


def sinkhorn_barycenter(
    inputs: list[ProbabilityField],
    weights: list[float],
    epsilon: float,
    tau: float,
    max_iter: int = DEFAULT_MAX_ITER,
    mode: str = "convolutional",
    kernel: KernelApplier | None = None,
) -> tuple[ProbabilityField, SinkhornReport]:
    """Weighted entropic barycenter of two or more grid measures.

    One sweep updates, for each input i in turn,
        u_i <- a_i / (K v_i)
        v_i <- (prod_j (K^T u_j)^{w_j}) / (K^T u_i),
    and the convergence functional E sums, over cells, the standard deviation
    across inputs of the barycenter-side marginals v_i * (K^T u_i). The sweep
    order matters: marginals computed mid-sweep see a mix of old and new
    scalings, which is exactly what makes E a useful stall detector.

    Returns the geometric mean prod_i (K^T u_i)^{w_i}, renormalized to unit
    mass (the raw product is not guaranteed to sum to one).
    """
    if len(inputs) < 2:
        raise ValueError("need at least two input fields")
    grid = check_same_grid(*inputs)
    lam = np.asarray(weights, dtype=np.float64)
    if lam.size != len(inputs):
        raise BadWeights(f"{lam.size} weights for {len(inputs)} inputs")
    if np.any(lam < 0) or abs(lam.sum() - 1.0) > 1e-9:
        raise BadWeights("weights must be nonnegative and sum to 1 within 1e-9")
    kern = kernel if kernel is not None else KernelApplier(grid, epsilon, mode)

    n_in = len(inputs)
    a = [f.masses for f in inputs]
    u = [np.ones(grid.n) for _ in range(n_in)]
    v = [np.ones(grid.n) for _ in range(n_in)]
    t = [kern.apply(u[i]) for i in range(n_in)]

    iterations = 0
    residual = np.inf
    converged = False
    for iterations in range(1, max_iter + 1):
        for i in range(n_in):
            u[i] = a[i] / _floored(kern.apply(v[i]))
            t[i] = _floored(kern.apply(u[i]))
            v[i] = _geometric_mean(t, lam) / t[i]
        marginals = np.stack([v[i] * t[i] for i in range(n_in)])
        residual = float(np.std(marginals, axis=0).sum())
        if residual < tau:
            converged = True
            break

    bary = _geometric_mean(t, lam)
    total = bary.sum()
    if not np.isfinite(total) or total <= 0:
        bary = np.full(grid.n, 1.0 / grid.n)
    else:
        bary = bary / total
        s = bary.sum()
        if abs(s - 1.0) > 1e-13:
            bary = bary / s
    out = ProbabilityField(grid, bary)
    return out, SinkhornReport(out, iterations, residual, converged)


def exact_ot_lp(a: np.ndarray, b: np.ndarray, cost: np.ndarray) -> tuple[float, np.ndarray]:
    """Unregularized transport optimum via linear programming (test oracle).

    Solves min <P, cost> subject to P 1 = a, P^T 1 = b, P >= 0 with HiGHS.
    Capped at 256 support points per marginal; O(n^3)-ish is fine there.
    """
    from scipy.optimize import linprog
    from scipy.sparse import csr_matrix

    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    cost = np.asarray(cost, dtype=np.float64)
    na, nb = a.size, b.size
    if max(na, nb) > 256:
        raise SizeLimit(f"instance has {max(na, nb)} points, oracle cap is 256")
    if cost.shape != (na, nb):
        raise ValueError(f"cost shape {cost.shape} != ({na}, {nb})")
    if abs(a.sum() - 1.0) > 1e-9 or abs(b.sum() - 1.0) > 1e-9:
        raise ValueError("marginals must each sum to 1")
    a = a / a.sum()
    b = b / b.sum()

    nvar = na * nb
    rows = []
    cols = []
    for i in range(na):
        rows.extend([i] * nb)
        cols.extend(range(i * nb, (i + 1) * nb))
    for j in range(nb - 1):  # last column constraint is redundant
        rows.extend([na + j] * na)
        cols.extend(range(j, nvar, nb))
    data = np.ones(len(rows))
    a_eq = csr_matrix((data, (rows, cols)), shape=(na + nb - 1, nvar))
    b_eq = np.concatenate([a, b[:-1]])
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"LP oracle failed: {res.message}")
    plan = np.maximum(res.x.reshape(na, nb), 0.0)
    return float(res.fun), plan

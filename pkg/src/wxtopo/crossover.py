"""Crossover operators over density fields.

The transport-based operator turns the two parents into probability fields,
computes their entropic barycenter at a random weight, and min-max scales the
result back into a density. The regularization strength is picked per pair
from the population's pairwise-distance range, so similar parents get sharp
interpolation and dissimilar ones get cheap, blurrier interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstantField, PopulationTooSmall
from .grid_field import DensityField, check_same_grid, from_probability_minmax, to_probability
from .ot import DEFAULT_MAX_ITER, SinkhornReport, sinkhorn_barycenter


@dataclass(frozen=True)
class CrossoverConfig:
    eps_min: float = 1e-6
    eps_max: float = 1e-4
    tau: float = 1e-9
    lambda_sampler: str = "uniform01"
    rng_seed: int = 0
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        if not (0 < self.eps_min <= self.eps_max):
            raise ValueError("need 0 < eps_min <= eps_max")
        if self.lambda_sampler != "uniform01":
            raise ValueError(f"unknown lambda sampler {self.lambda_sampler!r}")


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Symmetric Euclidean distances between population density vectors."""

    d: np.ndarray
    d_min: float
    d_max: float


def pairwise_distances(pop: list[DensityField]) -> DistanceMatrix:
    """Euclidean field distances D_ij = ||values_i - values_j||_2."""
    if len(pop) < 2:
        raise PopulationTooSmall("need at least two fields")
    check_same_grid(*pop)
    stack = np.stack([f.values for f in pop])
    sq = np.sum(stack * stack, axis=1)
    gram = stack @ stack.T
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * gram, 0.0)
    d = np.sqrt(d2)
    np.fill_diagonal(d, 0.0)
    d = 0.5 * (d + d.T)
    off = d[~np.eye(len(pop), dtype=bool)]
    return DistanceMatrix(d, float(off.min()), float(off.max()))


def adaptive_epsilon(dij: float, dm: DistanceMatrix, cfg: CrossoverConfig) -> float:
    """Linear ramp from eps_min at d_min to eps_max at d_max."""
    if dm.d_max == dm.d_min:
        return cfg.eps_min
    dij = min(max(dij, dm.d_min), dm.d_max)
    frac = (dij - dm.d_min) / (dm.d_max - dm.d_min)
    return cfg.eps_min + (cfg.eps_max - cfg.eps_min) * frac


def linear_crossover(
    parents: tuple[DensityField, DensityField], lam: float
) -> DensityField:
    """Elementwise convex combination lam * parent1 + (1 - lam) * parent2."""
    grid = check_same_grid(*parents)
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    values = lam * parents[0].values + (1.0 - lam) * parents[1].values
    return DensityField(grid, np.clip(values, 0.0, 1.0))


def wasserstein_crossover(
    parents: tuple[DensityField, DensityField],
    lam: float,
    epsilon: float,
    tau: float,
    max_iter: int = DEFAULT_MAX_ITER,
    mode: str = "convolutional",
    report_sink: list[SinkhornReport] | None = None,
) -> DensityField:
    """Barycentric offspring with weight ``lam`` on the first parent.

    Raises ConstantField when the barycenter is over-blurred into a flat
    field; a non-converged barycenter is still returned (the report lands in
    ``report_sink`` when given).
    """
    check_same_grid(*parents)
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    pa = to_probability(parents[0])
    pb = to_probability(parents[1])
    bary, report = sinkhorn_barycenter(
        [pa, pb], [lam, 1.0 - lam], epsilon, tau, max_iter=max_iter, mode=mode
    )
    if report_sink is not None:
        report_sink.append(report)
    return from_probability_minmax(bary)


def _offspring_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    # (seed, stream, index) fully determines the draws, so serial and
    # parallel generation agree bit for bit.
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream, index)))


def generate_offspring(
    pop: list[DensityField],
    n_xo: int,
    cfg: CrossoverConfig,
    operator: str = "wasserstein",
    stream: int = 0,
    report_sink: list[SinkhornReport] | None = None,
) -> list[DensityField]:
    """Produce exactly ``n_xo`` offspring from uniformly drawn parent pairs.

    Pairs never repeat a parent within one pair (i != j) but may repeat across
    offspring. A ConstantField barycenter triggers one redraw of parents and
    weight; if that also degenerates, the slot falls back to the linear
    operator so the offspring count stays exact.
    """
    if operator not in ("wasserstein", "linear"):
        raise ValueError(f"unknown operator {operator!r}")
    if len(pop) < 2:
        raise PopulationTooSmall(f"population of {len(pop)} cannot breed")
    if n_xo == 0:
        return []
    check_same_grid(*pop)
    dm = pairwise_distances(pop)
    offspring: list[DensityField] = []
    for k in range(n_xo):
        rng = _offspring_rng(cfg.rng_seed, stream, k)
        child = None
        for attempt in range(2):
            i, j = rng.choice(len(pop), size=2, replace=False)
            lam = float(rng.random())
            pair = (pop[i], pop[j])
            if operator == "linear":
                child = linear_crossover(pair, lam)
                break
            eps = adaptive_epsilon(float(dm.d[i, j]), dm, cfg)
            try:
                child = wasserstein_crossover(
                    pair, lam, eps, cfg.tau, max_iter=cfg.max_iter,
                    report_sink=report_sink,
                )
                break
            except ConstantField:
                if attempt == 1:
                    child = linear_crossover(pair, lam)
        offspring.append(child)
    return offspring

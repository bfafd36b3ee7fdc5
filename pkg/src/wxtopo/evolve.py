"""Evolutionary loop: selection, hypervolume tracking and orchestration.

Each generation evaluates only the fresh offspring, purges infeasible
candidates, unions survivors with the previous population, selects down to
capacity by non-dominated rank with crowding-distance truncation, and tracks
the dominated hypervolume against a reference point frozen from the first
feasible generation. Everything is minimization-convention.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._pool import parallel_map
from .crossover import CrossoverConfig, generate_offspring
from .errors import ExtinctPopulation
from .grid_field import DensityField, write_field
from .hf_eval import Objectives


@dataclass(frozen=True, eq=False)
class Member:
    field: DensityField
    objectives: Objectives
    born: int
    id: int


@dataclass
class Population:
    members: list[Member]
    capacity: int

    def objective_matrix(self) -> np.ndarray:
        return np.array([m.objectives.j for m in self.members])


@dataclass(frozen=True)
class EvolveConfig:
    n_pop: int = 100
    n_xo: int = 100
    n_lf: int = 100
    t_max: int = 100
    hv_rel_tol: float = 0.0
    hv_window: int = 10
    crossover: CrossoverConfig = field(default_factory=CrossoverConfig)
    ref_point_policy: str = "initial_worst_plus_10pct_range"

    def __post_init__(self):
        if self.n_pop < 2 or self.n_xo < 2:
            raise ValueError("n_pop and n_xo must be >= 2")
        if self.t_max < 0:
            raise ValueError("t_max must be >= 0")
        if self.ref_point_policy != "initial_worst_plus_10pct_range":
            raise ValueError(f"unknown reference-point policy {self.ref_point_policy!r}")


@dataclass
class GenerationStats:
    generation: int
    hv: float
    hv_normalized: float
    front_size: int
    front_union: int
    n_feasible: int
    eval_seconds: float
    crossover_seconds: float
    selection_seconds: float


def dominates(a: np.ndarray, b: np.ndarray) -> bool:
    """a Pareto-dominates b under minimization."""
    return bool(np.all(a <= b) and np.any(a < b))


def non_dominated_sort(objs: list[np.ndarray]) -> list[int]:
    """Rank vectors by dominance layers; rank 0 is the Pareto front."""
    n = len(objs)
    mat = np.asarray(objs, dtype=np.float64)
    if n == 0:
        return []
    if not np.all(np.isfinite(mat)):
        raise ValueError("objective vectors must be finite")
    dominated_by = [[] for _ in range(n)]
    n_dominating = np.zeros(n, dtype=int)
    for p in range(n):
        less_eq = np.all(mat <= mat[p], axis=1)
        less = np.any(mat < mat[p], axis=1)
        dominators = np.where(less_eq & less)[0]
        n_dominating[p] = dominators.size
        ge = np.all(mat >= mat[p], axis=1)
        gt = np.any(mat > mat[p], axis=1)
        for q in np.where(ge & gt)[0]:
            dominated_by[p].append(int(q))
    ranks = np.full(n, -1, dtype=int)
    current = [int(i) for i in np.where(n_dominating == 0)[0]]
    rank = 0
    while current:
        nxt = []
        for p in current:
            ranks[p] = rank
            for q in dominated_by[p]:
                n_dominating[q] -= 1
                if n_dominating[q] == 0:
                    nxt.append(q)
        current = nxt
        rank += 1
    return [int(r) for r in ranks]


def crowding_distance(front: list[np.ndarray]) -> np.ndarray:
    """NSGA-II crowding distance; per-objective extremes get infinity."""
    n = len(front)
    mat = np.asarray(front, dtype=np.float64)
    dist = np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    for m in range(mat.shape[1]):
        order = np.argsort(mat[:, m], kind="stable")
        vals = mat[order, m]
        dist[order[0]] = np.inf
        dist[order[-1]] = np.inf
        span = vals[-1] - vals[0]
        if span == 0:
            continue
        gaps = (vals[2:] - vals[:-2]) / span
        interior = order[1:-1]
        finite = ~np.isinf(dist[interior])
        dist[interior[finite]] += gaps[finite]
    return dist


def crowding_truncate(front: list[np.ndarray], keep: int) -> list[int]:
    """Indices of the ``keep`` most spread-out members of one front.

    Boundary points always win; ties in distance break toward lower index.
    """
    if keep > len(front):
        raise ValueError("cannot keep more members than the front holds")
    if keep == len(front):
        return list(range(len(front)))
    dist = crowding_distance(front)
    order = sorted(range(len(front)), key=lambda i: (-dist[i], i))
    return sorted(order[:keep])


def hypervolume_2d(points: list[np.ndarray], ref: np.ndarray) -> float:
    """Exact area dominated by ``points`` and bounded by ``ref`` (minimization).

    Points with any coordinate at or beyond the reference contribute nothing
    and are dropped; dominated points are absorbed by the sweep.
    """
    ref = np.asarray(ref, dtype=np.float64)
    pts = [np.asarray(p, dtype=np.float64) for p in points]
    pts = [p for p in pts if p[0] < ref[0] and p[1] < ref[1]]
    if not pts:
        return 0.0
    pts.sort(key=lambda p: (p[0], p[1]))
    area = 0.0
    y_prev = ref[1]
    for p in pts:
        if p[1] >= y_prev:
            continue  # dominated by an earlier point
        area += (ref[0] - p[0]) * (y_prev - p[1])
        y_prev = p[1]
    return float(area)


def reference_point(objs: list[np.ndarray]) -> np.ndarray:
    """Worst value per objective, worsened by ten percent of the range."""
    mat = np.asarray(objs, dtype=np.float64)
    worst = mat.max(axis=0)
    best = mat.min(axis=0)
    span = worst - best
    pad = np.where(span > 0, 0.1 * span, 0.1 * np.maximum(np.abs(worst), 1.0))
    return worst + pad


def check_convergence(history: list[float], cfg: EvolveConfig) -> bool:
    """True when the trailing hypervolume gain stalls or the budget runs out."""
    t = len(history) - 1
    if t >= cfg.t_max:
        return True
    if len(history) < cfg.hv_window:
        return False
    base = history[-cfg.hv_window]
    gain = history[-1] - base
    rel = gain / abs(base) if base != 0 else (np.inf if gain > 0 else 0.0)
    return rel < cfg.hv_rel_tol


def _select(members: list[Member], capacity: int) -> tuple[list[Member], int]:
    """NSGA-II style selection; returns survivors and the union front size."""
    objs = [m.objectives.j for m in members]
    ranks = non_dominated_sort(objs)
    union_front = sum(1 for r in ranks if r == 0)
    if len(members) <= capacity:
        return list(members), union_front
    selected: list[Member] = []
    rank = 0
    while True:
        layer = [i for i, r in enumerate(ranks) if r == rank]
        if not layer:
            break
        if len(selected) + len(layer) <= capacity:
            selected.extend(members[i] for i in layer)
        else:
            room = capacity - len(selected)
            picked = crowding_truncate([objs[i] for i in layer], room)
            selected.extend(members[layer[i]] for i in picked)
            break
        rank += 1
    return selected, union_front


def _dedupe(members: list[Member]) -> list[Member]:
    """Collapse members whose density vectors match exactly; lowest id wins."""
    seen: dict[bytes, Member] = {}
    for m in sorted(members, key=lambda m: m.id):
        key = m.field.values.tobytes()
        if key not in seen:
            seen[key] = m
    return sorted(seen.values(), key=lambda m: m.id)


def evolve_loop(
    cfg: EvolveConfig,
    lf_results: list[DensityField],
    evaluator,
    crossover_operator: str = "wasserstein",
    workers: int = 1,
    run_dir: Path | None = None,
) -> tuple[Population, list[GenerationStats]]:
    """Run the full evolutionary procedure from seeded designs.

    ``evaluator`` maps a DensityField to Objectives and is fanned out over
    ``workers`` threads with id-ordered results, so runs are reproducible for
    any worker count. Parents keep their cached objectives; only fresh
    offspring are evaluated. When ``run_dir`` is given, history, per-phase
    timings, evaluation records and per-generation checkpoints are written
    beneath it.
    """
    if len(lf_results) < 2:
        raise ExtinctPopulation("need at least two seed designs")
    writer = _RunWriter(run_dir) if run_dir is not None else None
    next_id = 0
    pending: list[Member] = []
    for fld in lf_results:
        pending.append(Member(fld, None, 0, next_id))  # objectives filled below
        next_id += 1

    population: list[Member] = []
    history: list[GenerationStats] = []
    hv_history: list[float] = []
    ref = None
    generation = 0

    def timed_eval(member: Member) -> tuple[Member, float]:
        t0 = time.perf_counter()
        objectives = evaluator(member.field)
        return Member(member.field, objectives, member.born, member.id), (
            time.perf_counter() - t0
        )

    while True:
        t0 = time.perf_counter()
        timed = parallel_map(timed_eval, pending, workers)
        evaluated = [m for m, _ in timed]
        eval_seconds = time.perf_counter() - t0
        if writer:
            writer.record_evals(generation, timed)
        feasible = [m for m in evaluated if m.objectives.feasible]

        t0 = time.perf_counter()
        union = feasible if generation == 0 else population + feasible
        union = _dedupe(union)
        if not union:
            raise ExtinctPopulation(f"no feasible candidates at generation {generation}")
        if ref is None:
            ref = reference_point([m.objectives.j for m in union])
        population, union_front = _select(union, cfg.n_pop)
        hv = hypervolume_2d([m.objectives.j for m in population], ref)
        hv_history.append(hv)
        front_size = sum(
            1 for r in non_dominated_sort([m.objectives.j for m in population]) if r == 0
        )
        selection_seconds = time.perf_counter() - t0

        hv0 = hv_history[0]
        stats = GenerationStats(
            generation=generation,
            hv=hv,
            hv_normalized=hv / hv0 if hv0 > 0 else (1.0 if hv == 0 else float("inf")),
            front_size=front_size,
            front_union=union_front,
            n_feasible=len(feasible),
            eval_seconds=eval_seconds,
            crossover_seconds=0.0,
            selection_seconds=selection_seconds,
        )
        history.append(stats)
        if writer:
            writer.checkpoint(generation, population)

        if check_convergence(hv_history, cfg):
            break

        t0 = time.perf_counter()
        fields = generate_offspring(
            [m.field for m in population],
            cfg.n_xo,
            cfg.crossover,
            operator=crossover_operator,
            stream=generation,
        )
        stats.crossover_seconds = time.perf_counter() - t0
        pending = []
        for fld in fields:
            pending.append(Member(fld, None, generation + 1, next_id))
            next_id += 1
        generation += 1

    if writer:
        writer.finalize(history)
    return Population(population, cfg.n_pop), history


def _fmt(x) -> str:
    """Shortest round-trippable decimal form, independent of numpy scalar reprs."""
    return repr(float(x))


class _RunWriter:
    """Writes the on-disk artifacts of one evolutionary run."""

    def __init__(self, run_dir: Path):
        self.dir = Path(run_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.evals_path = self.dir / "evals.csv"
        self.evals_path.write_text("generation,candidate_id,J1,J2,feasible,eval_seconds\n")

    def record_evals(self, generation: int, timed: list[tuple[Member, float]]):
        with self.evals_path.open("a") as fh:
            for m, seconds in timed:
                j = m.objectives.j
                fh.write(
                    f"{generation},{m.id},{_fmt(j[0])},{_fmt(j[1])},"
                    f"{int(m.objectives.feasible)},{seconds:.6f}\n"
                )

    def checkpoint(self, generation: int, members: list[Member]):
        cdir = self.dir / "checkpoints" / f"gen_{generation:04d}"
        cdir.mkdir(parents=True, exist_ok=True)
        with (cdir / "objectives.csv").open("w") as fh:
            fh.write("candidate_id,born,J1,J2\n")
            for m in members:
                fh.write(f"{m.id},{m.born},{_fmt(m.objectives.j[0])},{_fmt(m.objectives.j[1])}\n")
        for m in members:
            write_field(m.field, cdir / f"member_{m.id:05d}.dfld")

    def finalize(self, history: list[GenerationStats]):
        with (self.dir / "history.csv").open("w") as fh:
            fh.write("generation,hv,hv_normalized,front_size,front_union,n_feasible\n")
            for s in history:
                fh.write(
                    f"{s.generation},{_fmt(s.hv)},{_fmt(s.hv_normalized)},"
                    f"{s.front_size},{s.front_union},{s.n_feasible}\n"
                )
        # wall-clock phases live apart from history.csv so reruns stay
        # byte-identical on the deterministic artifacts
        with (self.dir / "timings.csv").open("w") as fh:
            fh.write("generation,eval_seconds,crossover_seconds,selection_seconds\n")
            for s in history:
                fh.write(
                    f"{s.generation},{s.eval_seconds:.6f},"
                    f"{s.crossover_seconds:.6f},{s.selection_seconds:.6f}\n"
                )

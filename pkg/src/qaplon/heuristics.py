"""Simulated annealing, a steady-state GA with PMX, and the hit-rate harness.

All random draws of a run are generated up front from ``numpy.random.Generator``
and handed to the loop kernels, so a run is a pure function of its seed on
either backend. Budgets count cost evaluations; full and incremental (swap
delta) evaluations count the same.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._accel import jit
from .qap import QapInstance, _cost_loop, _delta_loop, check_permutation, cost, neighborhood_size, swap_moves


@dataclass(frozen=True)
class SaConfig:
    initial_temperature: float = 1e7
    cooling_factor: float = 0.9983
    budget: int = 10_000

    def __post_init__(self):
        if not 0 < self.cooling_factor < 1:
            raise ValueError("cooling_factor must lie in (0, 1)")
        if self.initial_temperature <= 0:
            raise ValueError("initial_temperature must be positive")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 100
    mutation_probability: float = 0.3
    budget: int = 10_000

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if not 0 <= self.mutation_probability <= 1:
            raise ValueError("mutation_probability must lie in [0, 1]")
        if self.budget < self.population_size:
            raise ValueError("budget is smaller than the initial population")


@dataclass(frozen=True)
class RunResult:
    best_cost: float
    best_solution: np.ndarray
    evaluations_used: int
    hit: bool | None = None
    final_temperature: float | None = None


def same_cost(a, b) -> bool:
    """Exact equality for integer costs, 1e-9 relative for floats."""
    if isinstance(a, (int, np.integer)) and isinstance(b, (int, np.integer)):
        return int(a) == int(b)
    return abs(float(a) - float(b)) <= 1e-9 * max(1.0, abs(float(b)))


_cost_kernel = jit(_cost_loop)
_delta_kernel = jit(_delta_loop)


# ---------------------------------------------------------------------------
# simulated annealing

def _sa_loop(A, B, p, moves, picks, coins, t0, alpha, best_p):
    current = _cost_kernel(A, B, p)
    best = current
    best_p[:] = p
    temp = t0
    for k in range(picks.shape[0]):
        i = moves[picks[k], 0]
        j = moves[picks[k], 1]
        d = _delta_kernel(A, B, p, i, j)
        if d <= 0 or coins[k] < math.exp(-d / temp):
            t = p[i]
            p[i] = p[j]
            p[j] = t
            current += d
            if current < best:
                best = current
                best_p[:] = p
        temp *= alpha
    return best, temp


sa_kernel = jit(_sa_loop)


def simulated_annealing(inst: QapInstance, cfg: SaConfig = SaConfig(), seed=None,
                        optimum=None) -> RunResult:
    """One SA run: random start, one uniformly random swap per evaluation,
    Metropolis acceptance, geometric cooling after every proposal."""
    rng = np.random.default_rng(seed)
    n = inst.n
    p = rng.permutation(n).astype(np.int64)
    proposals = cfg.budget - 1
    picks = rng.integers(0, neighborhood_size(n), size=proposals)
    coins = rng.random(proposals)
    best_p = np.empty(n, dtype=np.int64)
    _, temp = sa_kernel(inst.A, inst.B, p, swap_moves(n), picks, coins,
                        float(cfg.initial_temperature), float(cfg.cooling_factor), best_p)
    best = cost(inst, best_p)
    hit = None if optimum is None else same_cost(best, optimum)
    return RunResult(best, best_p, cfg.budget, hit, float(temp))


# ---------------------------------------------------------------------------
# genetic algorithm

def _pmx_loop(p1, p2, cut1, cut2, child, where):
    n = p1.shape[0]
    for k in range(n):
        where[p1[k]] = k
    for k in range(cut1, cut2):
        child[k] = p1[k]
    for k in range(n):
        if cut1 <= k < cut2:
            continue
        v = p2[k]
        while cut1 <= where[v] < cut2:
            v = p2[where[v]]
        child[k] = v


pmx_kernel = jit(_pmx_loop)


def pmx(parent1, parent2, cut1: int, cut2: int) -> np.ndarray:
    """Partially mapped crossover: ``parent1[cut1:cut2]`` plus repaired ``parent2`` elsewhere."""
    p1 = check_permutation(parent1)
    p2 = check_permutation(parent2, p1.size)
    if not 0 <= cut1 < cut2 <= p1.size:
        raise ValueError(f"invalid cut points ({cut1}, {cut2}) for n={p1.size}")
    child = np.empty_like(p1)
    pmx_kernel(p1, p2, int(cut1), int(cut2), child, np.empty_like(p1))
    return child


def _ga_loop(A, B, pop, fit, moves, cut_table, tour, cut_picks, mutate, mut_picks, best_trace):
    size = pop.shape[0]
    n = pop.shape[1]
    child = np.empty(n, dtype=np.int64)
    where = np.empty(n, dtype=np.int64)
    for it in range(tour.shape[0]):
        a = tour[it, 0]
        b = tour[it, 1]
        first = a if fit[a] <= fit[b] else b
        a = tour[it, 2]
        b = tour[it, 3]
        second = a if fit[a] <= fit[b] else b
        pmx_kernel(pop[first], pop[second], cut_table[cut_picks[it], 0],
                   cut_table[cut_picks[it], 1], child, where)
        if mutate[it]:
            i = moves[mut_picks[it], 0]
            j = moves[mut_picks[it], 1]
            t = child[i]
            child[i] = child[j]
            child[j] = t
        f = _cost_kernel(A, B, child)
        worst = 0
        for k in range(1, size):
            if fit[k] > fit[worst]:
                worst = k
        if f < fit[worst]:
            pop[worst, :] = child
            fit[worst] = f
        best = fit[0]
        for k in range(1, size):
            if fit[k] < best:
                best = fit[k]
        best_trace[it] = best


ga_kernel = jit(_ga_loop)


def genetic_algorithm(inst: QapInstance, cfg: GaConfig = GaConfig(), seed=None,
                      optimum=None, trace: bool = False):
    """One steady-state GA run.

    Each iteration picks two parents by binary tournament, applies PMX with
    uniformly drawn cut points, mutates the child by one random swap with
    ``mutation_probability`` and lets it replace the worst member when strictly
    better. With ``trace=True`` also returns the best population cost after
    every iteration.
    """
    rng = np.random.default_rng(seed)
    n = inst.n
    size = cfg.population_size
    pop = rng.permuted(np.tile(np.arange(n, dtype=np.int64), (size, 1)), axis=1)
    fit = np.array([_cost_kernel(inst.A, inst.B, row) for row in pop], dtype=inst.A.dtype)
    iters = cfg.budget - size
    cut_table = swap_moves(n + 1)  # all 0 <= cut1 < cut2 <= n
    tour = rng.integers(0, size, size=(iters, 4))
    cut_picks = rng.integers(0, cut_table.shape[0], size=iters)
    mutate = rng.random(iters) < cfg.mutation_probability
    mut_picks = rng.integers(0, neighborhood_size(n), size=iters)
    best_trace = np.empty(iters, dtype=inst.A.dtype)
    ga_kernel(inst.A, inst.B, pop, fit, swap_moves(n), cut_table, tour, cut_picks,
              mutate, mut_picks, best_trace)
    k = int(np.argmin(fit))
    best_p = pop[k].copy()
    best = cost(inst, best_p)
    hit = None if optimum is None else same_cost(best, optimum)
    result = RunResult(best, best_p, cfg.budget, hit)
    if trace:
        return result, best_trace
    return result


# ---------------------------------------------------------------------------
# hit rate

ALGORITHMS = {"sa": (simulated_annealing, SaConfig), "ga": (genetic_algorithm, GaConfig)}


def run_seeds(master_seed, runs: int):
    """Independent per-run seed sequences derived from ``master_seed``."""
    return np.random.SeedSequence(master_seed).spawn(runs)


def run_many(inst: QapInstance, algorithm, config=None, runs: int = 100, master_seed=0,
             optimum=None) -> list[RunResult]:
    if isinstance(algorithm, str):
        func, cfg_type = ALGORITHMS[algorithm]
        config = cfg_type() if config is None else config
    else:
        func = algorithm
    out = []
    for seed in run_seeds(master_seed, runs):
        res = func(inst, config, seed)
        hit = None if optimum is None else same_cost(res.best_cost, optimum)
        out.append(RunResult(res.best_cost, res.best_solution, res.evaluations_used, hit,
                             res.final_temperature))
    return out


def hit_rate(inst: QapInstance, algorithm, config=None, runs: int = 100, master_seed=0,
             optimum=None) -> float:
    """Fraction of ``runs`` independent runs whose best cost equals ``optimum``.

    ``algorithm`` is ``"sa"``, ``"ga"`` or any callable ``(inst, config, seed) -> RunResult``.
    """
    if optimum is None:
        raise ValueError("hit rate needs the known global optimum cost")
    results = run_many(inst, algorithm, config, runs, master_seed, optimum)
    return sum(r.hit for r in results) / runs

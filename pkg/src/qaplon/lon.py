"""Exhaustive Local Optima Network extraction under the swap neighborhood.

A solution is a local optimum when no swap neighbor has strictly lower cost.
Basins are defined by deterministic best-improvement hill climbing (ties go to
the lexicographically smallest move), so every permutation belongs to exactly
one basin. The weight of edge ``i -> j`` is the probability that a uniformly
chosen solution of basin ``i`` followed by a uniformly chosen swap lands in
basin ``j``; self-loops are kept.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _lon_kernels as K
from ._accel import USE_NUMBA, jit
from .qap import (
    QapInstance,
    _cost_loop,
    _delta_loop,
    atomic_write_text,
    check_permutation,
    factorials,
    neighborhood_size,
    swap_moves,
)

DEFAULT_MAX_N = 11
DENSE_TALLY_MAX_NODES = 4096


class SizeCapError(ValueError):
    """Exhaustive enumeration requested above the configured size cap."""


@dataclass(eq=False)
class Lon:
    """Local optima network.

    ``perms[k]``, ``fitness[k]`` and ``basin_size[k]`` describe node ``k``;
    ``weights`` is a CSR matrix of transition probabilities whose rows sum to 1.
    Nodes are numbered by the lexicographic rank of their permutation.
    """

    n: int
    perms: np.ndarray
    fitness: np.ndarray
    basin_size: np.ndarray
    weights: sp.csr_matrix
    label: str = ""
    global_ids: np.ndarray = field(init=False)

    def __post_init__(self):
        self.weights = sp.csr_matrix(self.weights)
        self.weights.sort_indices()
        self.global_ids = np.flatnonzero(self.fitness == self.fitness.min())

    @property
    def n_v(self) -> int:
        return int(self.fitness.shape[0])

    @property
    def n_edges(self) -> int:
        return int(self.weights.nnz)

    def out_weights(self, loops: bool = False) -> sp.csr_matrix:
        """Transition matrix, optionally without the self-loops."""
        if loops:
            return self.weights
        w = self.weights.tolil(copy=True)
        w.setdiag(0)
        w = w.tocsr()
        w.eliminate_zeros()
        return w

    def strength(self) -> np.ndarray:
        """Out-strength ``s_i``: total weight leaving node ``i`` to other nodes."""
        return np.asarray(self.out_weights().sum(axis=1)).ravel()

    def edge_list(self):
        coo = self.weights.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return coo.row[order], coo.col[order], coo.data[order]


def _check_cap(n, max_n):
    if n > max_n:
        raise SizeCapError(f"exhaustive enumeration capped at n <= {max_n}, got n={n}")


# ---------------------------------------------------------------------------
# hill climbing

def _climb_loop(A, B, p, moves, use_delta):
    # p is modified in place; returns the number of moves taken
    steps = 0
    n_moves = moves.shape[0]
    current = _cost_kernel(A, B, p)
    while True:
        best = current
        best_m = -1
        for m in range(n_moves):
            i = moves[m, 0]
            j = moves[m, 1]
            if use_delta:
                c = current + _delta_kernel(A, B, p, i, j)
            else:
                t = p[i]
                p[i] = p[j]
                p[j] = t
                c = _cost_kernel(A, B, p)
                p[j] = p[i]
                p[i] = t
            if c < best:
                best = c
                best_m = m
        if best_m < 0:
            return steps
        i = moves[best_m, 0]
        j = moves[best_m, 1]
        t = p[i]
        p[i] = p[j]
        p[j] = t
        current = best
        steps += 1


_cost_kernel = jit(_cost_loop)
_delta_kernel = jit(_delta_loop)
climb_kernel = jit(_climb_loop)


def hill_climb(inst: QapInstance, start) -> tuple[np.ndarray, int]:
    """Best-improvement descent from ``start``; returns (local optimum, steps)."""
    p = check_permutation(start, inst.n).copy()
    # float instances compare full costs, the same values the cost table holds
    steps = climb_kernel(inst.A, inst.B, p, swap_moves(inst.n), inst.integral)
    return p, int(steps)


# ---------------------------------------------------------------------------
# exhaustive passes

def _split(lo, hi, parts):
    edges = np.linspace(lo, hi, parts + 1).astype(np.int64)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _run_ranges(func, ranges, workers):
    if workers <= 1 or len(ranges) <= 1:
        for lo, hi in ranges:
            func(lo, hi)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(lambda r: func(*r), ranges))


def cost_table(inst: QapInstance, max_n: int = DEFAULT_MAX_N, chunks: int = 1,
               workers: int = 1, use_numba: bool | None = None) -> np.ndarray:
    """Cost of every permutation, indexed by lexicographic rank."""
    n = inst.n
    _check_cap(n, max_n)
    use_numba = USE_NUMBA if use_numba is None else use_numba
    total = math.factorial(n)
    fact = factorials(n)
    out = np.empty(total, dtype=inst.A.dtype)
    kernel = K.cost_table_nb if use_numba else K.cost_table_np
    _run_ranges(lambda lo, hi: kernel(inst.A, inst.B, n, fact, lo, hi, out),
                _split(0, total, max(chunks, 1)), workers)
    return out


def global_optimum(inst: QapInstance, max_n: int = DEFAULT_MAX_N, use_numba: bool | None = None):
    """Exact minimum cost over all permutations and the first (lowest-rank) witness."""
    from .qap import unrank

    costs = cost_table(inst, max_n=max_n, use_numba=use_numba)
    r = int(np.argmin(costs))
    best = costs[r]
    return (int(best) if inst.integral else float(best)), unrank(r, inst.n)


def extract_lon(inst: QapInstance, max_n: int = DEFAULT_MAX_N, chunks: int = 1,
                workers: int = 1, use_numba: bool | None = None) -> Lon:
    """Enumerate all ``n!`` solutions, attribute basins and tally basin transitions.

    ``chunks`` splits each pass into independent index ranges (optionally run on
    ``workers`` threads); the result does not depend on either.
    """
    n = inst.n
    _check_cap(n, max_n)
    use_numba = USE_NUMBA if use_numba is None else use_numba
    total = math.factorial(n)
    fact = factorials(n)
    moves = swap_moves(n)
    n_moves = neighborhood_size(n)
    ranges = _split(0, total, max(chunks, 1))

    costs = cost_table(inst, max_n=max_n, chunks=chunks, workers=workers, use_numba=use_numba)

    nxt = np.empty(total, dtype=np.int64)
    if use_numba:
        smax = min(n, K.MAX_TABLE_SUFFIX)
        table, offsets = K.suffix_tables(smax)
        _run_ranges(lambda lo, hi: K.pointer_nb(costs, n, fact, moves, table, offsets, smax,
                                                lo, hi, nxt), ranges, workers)
    else:
        _run_ranges(lambda lo, hi: K.pointer_np(costs, n, fact, moves, lo, hi, nxt), ranges, workers)

    basin = np.full(total, -1, dtype=np.int64)
    if use_numba:
        K.resolve_nb(nxt, basin, np.empty(total, dtype=np.int64))
    else:
        K.resolve_np(nxt, basin)

    optima = np.flatnonzero(nxt == np.arange(total))
    del nxt
    node_of_rank = np.full(total, -1, dtype=np.int64)
    node_of_rank[optima] = np.arange(optima.shape[0])
    basin_node = node_of_rank[basin]
    del basin, node_of_rank
    n_v = optima.shape[0]
    sizes = np.bincount(basin_node, minlength=n_v).astype(np.int64)

    if use_numba and n_v <= DENSE_TALLY_MAX_NODES:
        rows, indices, counts = _tally_dense(basin_node, n_v, n, fact, moves, ranges, workers)
    elif use_numba:
        indptr, indices, counts = _tally_compiled(basin_node, sizes, n, fact, moves,
                                                  n_moves, chunks, workers)
        rows = np.repeat(np.arange(n_v), np.diff(indptr))
    else:
        rows, indices, counts = K.tally_np(basin_node, n, fact, moves, n_v)
    data = counts / (n_moves * sizes[rows]).astype(np.float64)
    weights = sp.csr_matrix((data, (rows, indices)), shape=(n_v, n_v))

    perms = K.unrank_block(optima, n, fact)[0]
    return Lon(n=n, perms=perms, fitness=costs[optima].copy(), basin_size=sizes,
               weights=weights, label=inst.label)


def _tally_dense(basin_node, n_v, n, fact, moves, ranges, workers):
    smax = min(n, K.MAX_TABLE_SUFFIX)
    table, offsets = K.suffix_tables(smax)
    parts = 1 if workers <= 1 else len(ranges)
    mats = [np.zeros((n_v, n_v), dtype=np.int64) for _ in range(parts)]
    jobs = [(lo, hi, mats[k % parts]) for k, (lo, hi) in enumerate(ranges)]

    def run(job):
        lo, hi, mat = job
        K.tally_dense_nb(basin_node, n, fact, moves, table, offsets, smax, lo, hi, mat)

    if parts == 1:
        for job in jobs:
            run(job)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, jobs))
    total = mats[0]
    for extra in mats[1:]:
        total += extra
    rows, cols = np.nonzero(total)
    return rows, cols, total[rows, cols]


def _tally_compiled(basin_node, sizes, n, fact, moves, n_moves, chunks, workers):
    n_v = sizes.shape[0]
    smax = min(n, K.MAX_TABLE_SUFFIX)
    table, offsets = K.suffix_tables(smax)
    order = np.argsort(basin_node, kind="stable")
    starts = np.zeros(n_v + 1, dtype=np.int64)
    np.cumsum(sizes, out=starts[1:])
    row_cap = np.minimum(n_v, sizes * n_moves)
    row_offset = np.zeros(n_v + 1, dtype=np.int64)
    np.cumsum(row_cap, out=row_offset[1:])
    indices = np.empty(row_offset[-1], dtype=np.int64)
    counts = np.empty(row_offset[-1], dtype=np.int64)
    row_len = np.zeros(n_v, dtype=np.int64)

    def run(lo, hi):
        scratch = np.zeros(n_v, dtype=np.int64)
        touched = np.empty(n_v, dtype=np.int64)
        K.tally_nb(basin_node, order, starts, n, fact, moves, table, offsets, smax, lo, hi,
                   row_offset, indices, counts, row_len, scratch, touched)

    _run_ranges(run, _split(0, n_v, max(chunks, 1)), workers)
    indptr = np.zeros(n_v + 1, dtype=np.int64)
    np.cumsum(row_len, out=indptr[1:])
    keep = np.repeat(row_offset[:-1] - indptr[:-1], row_len) + np.arange(indptr[-1])
    return indptr, indices[keep], counts[keep]


# ---------------------------------------------------------------------------
# persistence

def _fmt_value(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_lon(lon: Lon, nodes_path, edges_path) -> None:
    """``nodes.tsv``: id, fitness, basin size, 1-based permutation. ``edges.tsv``: src, dst, weight."""
    lines = ["id\tfitness\tbasin_size\tpermutation"]
    for k in range(lon.n_v):
        perm = " ".join(str(int(v) + 1) for v in lon.perms[k])
        lines.append(f"{k}\t{_fmt_value(lon.fitness[k])}\t{int(lon.basin_size[k])}\t{perm}")
    atomic_write_text(nodes_path, "\n".join(lines) + "\n")

    src, dst, w = lon.edge_list()
    lines = ["src\tdst\tweight"]
    lines.extend(f"{int(a)}\t{int(b)}\t{float(x):.17g}" for a, b, x in zip(src, dst, w))
    atomic_write_text(edges_path, "\n".join(lines) + "\n")


def read_lon(nodes_path, edges_path, label: str | None = None) -> Lon:
    with open(nodes_path, encoding="utf-8") as fh:
        rows = [line.rstrip("\n").split("\t") for line in fh if line.strip()][1:]
    ids = [int(r[0]) for r in rows]
    if ids != list(range(len(ids))):
        raise ValueError(f"{nodes_path}: node ids must be 0..N-1 in order")
    raw = [r[1] for r in rows]
    if all(v.lstrip("-").isdigit() for v in raw):
        fitness = np.array([int(v) for v in raw], dtype=np.int64)
    else:
        fitness = np.array([float(v) for v in raw], dtype=np.float64)
    sizes = np.array([int(r[2]) for r in rows], dtype=np.int64)
    perms = np.array([[int(x) - 1 for x in r[3].split()] for r in rows], dtype=np.int64)

    edges = np.loadtxt(edges_path, delimiter="\t", skiprows=1, ndmin=2)
    n_v = len(rows)
    if edges.size:
        weights = sp.csr_matrix((edges[:, 2], (edges[:, 0].astype(np.int64), edges[:, 1].astype(np.int64))),
                                shape=(n_v, n_v))
    else:
        weights = sp.csr_matrix((n_v, n_v))
    if label is None:
        label = os.path.basename(os.fspath(nodes_path)).split(".")[0]
    return Lon(n=perms.shape[1], perms=perms, fitness=fitness, basin_size=sizes,
               weights=weights, label=label)

"""Network measures of a local optima network.

Values that a network cannot support (too few qualifying nodes, no edges) are
returned as NaN rather than raised.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from .lon import Lon
from .stats import spearman


@dataclass(frozen=True)
class Partition:
    labels: np.ndarray
    converged: bool = True
    iterations: int = 0

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0


@dataclass(frozen=True)
class LonMetrics:
    n_v: int
    cc: float
    l_opt: float
    y2: float
    f_nn: float
    q: float
    unreachable_count: int
    n_clusters: int
    mcl_converged: bool

    def as_dict(self):
        return asdict(self)


def _undirected(lon: Lon) -> sp.csr_matrix:
    """Symmetric weights ``u_ij = w_ij + w_ji`` without self-loops."""
    w = lon.out_weights()
    u = (w + w.T).tocsr()
    u.eliminate_zeros()
    return u


def clustering_coefficient(lon: Lon) -> float:
    """Mean local clustering over nodes of degree >= 2 (unweighted, undirected)."""
    adj = _undirected(lon)
    adj.data[:] = 1.0
    deg = np.asarray(adj.sum(axis=1)).ravel()
    closed = np.asarray((adj @ adj).multiply(adj).sum(axis=1)).ravel()
    ok = deg >= 2
    if not ok.any():
        return math.nan
    local = closed[ok] / (deg[ok] * (deg[ok] - 1))
    return float(local.mean())


def path_length_to_optimum(lon: Lon) -> tuple[float, int]:
    """Mean over non-global nodes of the shortest path to the nearest global optimum.

    Edge ``i -> j`` has length ``1 / w_ij`` (expected moves to make that
    transition). Returns (mean, number of nodes that cannot reach any global optimum).
    """
    w = lon.out_weights()
    glob = lon.global_ids
    others = np.setdiff1d(np.arange(lon.n_v), glob)
    if others.size == 0:
        return 0.0, 0
    lengths = w.copy()
    lengths.data = 1.0 / lengths.data
    # distances *to* the optima: search from them over reversed edges
    dist = dijkstra(lengths.T.tocsr(), directed=True, indices=glob, min_only=True)
    d = dist[others]
    reach = np.isfinite(d)
    unreachable = int((~reach).sum())
    if not reach.any():
        return math.nan, unreachable
    return float(d[reach].mean()), unreachable


def node_disparity(lon: Lon) -> np.ndarray:
    """Per-node ``sum_j (w_ij / s_i)^2`` over non-self edges; NaN where ``s_i = 0``."""
    w = lon.out_weights()
    s = np.asarray(w.sum(axis=1)).ravel()
    sq = np.asarray(w.multiply(w).sum(axis=1)).ravel()
    out = np.full(lon.n_v, math.nan)
    ok = s > 0
    out[ok] = sq[ok] / s[ok] ** 2
    return out


def disparity(lon: Lon) -> float:
    y = node_disparity(lon)
    y = y[np.isfinite(y)]
    return float(y.mean()) if y.size else math.nan


def neighbor_fitness(lon: Lon) -> np.ndarray:
    """Weighted mean fitness of each node's out-neighbors; NaN where ``s_i = 0``."""
    w = lon.out_weights()
    s = np.asarray(w.sum(axis=1)).ravel()
    num = w @ lon.fitness.astype(np.float64)
    out = np.full(lon.n_v, math.nan)
    ok = s > 0
    out[ok] = num[ok] / s[ok]
    return out


def fitness_fitness_correlation(lon: Lon) -> float:
    fnn = neighbor_fitness(lon)
    ok = np.isfinite(fnn)
    if ok.sum() < 3:
        return math.nan
    return spearman(lon.fitness[ok].astype(np.float64), fnn[ok])


def _normalize_columns(m: sp.csc_matrix) -> sp.csc_matrix:
    sums = np.asarray(m.sum(axis=0)).ravel()
    sums[sums == 0] = 1.0
    return (m @ sp.diags(1.0 / sums)).tocsc()


def mcl_cluster(lon: Lon, inflation: float = 2.0, prune: float = 1e-5,
                tol: float = 1e-8, max_iter: int = 200) -> Partition:
    """Markov clustering of the symmetrized network.

    Each node gets a self-loop equal to its strongest incident weight. The
    column-stochastic flow matrix is alternately squared and raised entrywise
    to ``inflation``; entries below ``prune`` are dropped. Clusters are read off
    the attractor rows of the limit; a node claimed by several attractors goes
    to the lowest cluster id.
    """
    if inflation <= 1:
        raise ValueError("inflation must be > 1")
    n_v = lon.n_v
    u = _undirected(lon)
    loops = np.asarray(u.max(axis=1).todense()).ravel() if u.nnz else np.zeros(n_v)
    loops[loops == 0] = 1.0
    m = _normalize_columns((u + sp.diags(loops)).tocsc())

    converged = False
    it = 0
    while it < max_iter:
        it += 1
        nxt = (m @ m).power(inflation)
        nxt = _normalize_columns(nxt.tocsc())
        nxt.data[nxt.data < prune] = 0.0
        nxt.eliminate_zeros()
        nxt = _normalize_columns(nxt)
        diff = abs(nxt - m)
        m = nxt
        if diff.nnz == 0 or diff.max() < tol:
            converged = True
            break

    m = m.tocsr()
    labels = np.full(n_v, -1, dtype=np.int64)
    next_id = 0
    diag = m.diagonal()
    for a in np.flatnonzero(diag > 0):
        if labels[a] >= 0:
            continue
        members = m.indices[m.indptr[a]:m.indptr[a + 1]]
        members = members[m.data[m.indptr[a]:m.indptr[a + 1]] > 0]
        free = members[labels[members] < 0]
        labels[free] = next_id
        labels[a] = next_id
        next_id += 1
    for v in np.flatnonzero(labels < 0):
        labels[v] = next_id
        next_id += 1
    return Partition(labels=labels, converged=converged, iterations=it)


def modularity(lon: Lon, partition) -> float:
    """Newman modularity of ``partition`` on the symmetrized, loop-free weights."""
    labels = partition.labels if isinstance(partition, Partition) else np.asarray(partition)
    if labels.shape[0] != lon.n_v:
        raise ValueError("partition must label every node")
    u = _undirected(lon)
    two_w = float(u.sum())
    if two_w == 0.0:
        return math.nan
    if np.unique(labels).size == 1:
        return 0.0
    k = np.asarray(u.sum(axis=1)).ravel()
    coo = u.tocoo()
    same = labels[coo.row] == labels[coo.col]
    inside = np.bincount(labels[coo.row[same]], weights=coo.data[same], minlength=labels.max() + 1)
    degree = np.bincount(labels, weights=k, minlength=labels.max() + 1)
    return float(np.sum(inside / two_w - (degree / two_w) ** 2))


def compute_all(lon: Lon, inflation: float = 2.0, prune: float = 1e-5,
                tol: float = 1e-8, max_iter: int = 200) -> LonMetrics:
    l_opt, unreachable = path_length_to_optimum(lon)
    part = mcl_cluster(lon, inflation=inflation, prune=prune, tol=tol, max_iter=max_iter)
    return LonMetrics(
        n_v=lon.n_v,
        cc=clustering_coefficient(lon),
        l_opt=l_opt,
        y2=disparity(lon),
        f_nn=fitness_fitness_correlation(lon),
        q=modularity(lon, part),
        unreachable_count=unreachable,
        n_clusters=part.n_clusters,
        mcl_converged=part.converged,
    )

"""Random-walk autocorrelation of the cost landscape and its correlation length.

``estimate_autocorr`` averages per-walk sample autocorrelations; ``exact_autocorr``
computes the stationary-walk values exactly for small ``n`` by applying the
one-step transition operator of the swap graph to the full cost vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._accel import jit
from .qap import QapInstance, _cost_loop, _delta_loop, check_permutation, neighborhood_size, swap_moves

EXACT_MAX_N = 6


class ZeroVarianceError(ValueError):
    """The cost series (or landscape) is constant, so r(s) is undefined."""


@dataclass(frozen=True)
class AutocorrEstimate:
    r: np.ndarray
    ell: float
    s_cut: int
    walk_length: int
    n_walks: int
    exact: bool = False


_cost_kernel = jit(_cost_loop)
_delta_kernel = jit(_delta_loop)


def _walk_loop(A, B, p, moves, picks, out):
    out[0] = _cost_kernel(A, B, p)
    for t in range(picks.shape[0]):
        i = moves[picks[t], 0]
        j = moves[picks[t], 1]
        out[t + 1] = out[t] + _delta_kernel(A, B, p, i, j)
        tmp = p[i]
        p[i] = p[j]
        p[j] = tmp


walk_kernel = jit(_walk_loop)


def random_walk(inst: QapInstance, start, length: int, seed) -> np.ndarray:
    """Costs ``f(x_0), ..., f(x_length)`` along a walk of uniformly random swaps."""
    if length < 1:
        raise ValueError("walk length must be >= 1")
    p = check_permutation(start, inst.n).copy()
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, neighborhood_size(inst.n), size=length)
    out = np.empty(length + 1, dtype=inst.A.dtype)
    walk_kernel(inst.A, inst.B, p, swap_moves(inst.n), picks, out)
    return out


def autocorrelation(series, s_max: int) -> np.ndarray:
    """Sample autocorrelation ``r(0..s_max)`` of one series.

    ``r(s) = (mean_t f_t f_{t+s} - mu^2) / sigma^2`` with the lag-product mean
    over the ``len - s`` available pairs and ``mu``, ``sigma^2`` taken over the
    whole series.
    """
    f = np.asarray(series, dtype=np.float64)
    if not 0 <= s_max < f.size:
        raise ValueError("need 0 <= s_max < len(series)")
    mu = f.mean()
    g = f - mu  # shifted copy keeps the products well conditioned
    var = float(g @ g) / g.size
    if var <= 0.0 or var <= (1e-12 * abs(mu)) ** 2:
        raise ZeroVarianceError("constant series")
    r = np.empty(s_max + 1)
    size = g.size
    prefix = np.concatenate(([0.0], np.cumsum(g)))
    for s in range(s_max + 1):
        pairs = size - s
        lagged = float(g[:pairs] @ g[s:]) / pairs
        # identical to mean(f_t f_{t+s}) - mu^2 once expanded around mu
        lagged += mu * (prefix[pairs] + prefix[size] - prefix[s]) / pairs
        r[s] = lagged / var
    return r


def autocorr_length(r, epsilon: float, s_max: int | None = None) -> tuple[float, int]:
    """Sum of ``r(s)`` over lags before it first drops below ``epsilon``.

    The cut lag is capped at ``s_max`` (default: last available lag).
    """
    r = np.asarray(r, dtype=np.float64)
    if s_max is None:
        s_max = r.size - 1
    s_max = min(s_max, r.size - 1)
    below = np.flatnonzero(r[: s_max + 1] < epsilon)
    s_cut = int(below[0]) if below.size else s_max
    return float(r[:s_cut].sum()), s_cut


def _default_s_max(n):
    return n * n


def estimate_autocorr(inst: QapInstance, walk_length: int = 1_000_000, n_walks: int = 10,
                      s_max: int | None = None, seed=0, epsilon: float | None = None) -> AutocorrEstimate:
    """Average of per-walk autocorrelations and the resulting correlation length.

    Each walk starts from a uniformly random permutation. ``epsilon`` defaults
    to the white-noise band ``2 / sqrt(walk_length)``.
    """
    if n_walks < 1:
        raise ValueError("n_walks must be >= 1")
    s_max = _default_s_max(inst.n) if s_max is None else s_max
    if epsilon is None:
        epsilon = 2.0 / math.sqrt(walk_length)
    rs = []
    for child in np.random.SeedSequence(seed).spawn(n_walks):
        rng = np.random.default_rng(child)
        start = rng.permutation(inst.n)
        series = random_walk(inst, start, walk_length, rng)
        rs.append(autocorrelation(series, s_max))
    r = np.mean(rs, axis=0)
    ell, s_cut = autocorr_length(r, epsilon, s_max)
    return AutocorrEstimate(r=r, ell=ell, s_cut=s_cut, walk_length=walk_length,
                            n_walks=n_walks, exact=False)


def transition_operator(n: int):
    """Sparse one-step operator of the uniform swap walk over all ``n!`` ranks."""
    import scipy.sparse as sp

    from .qap import rank, unrank

    total = math.factorial(n)
    moves = swap_moves(n)
    rows = np.repeat(np.arange(total), moves.shape[0])
    cols = np.empty(total * moves.shape[0], dtype=np.int64)
    k = 0
    for r in range(total):
        p = unrank(r, n)
        for i, j in moves:
            q = p.copy()
            q[i], q[j] = q[j], q[i]
            cols[k] = rank(q)
            k += 1
    data = np.full(cols.size, 1.0 / moves.shape[0])
    return sp.csr_matrix((data, (rows, cols)), shape=(total, total))


def exact_autocorr(inst: QapInstance, s_max: int | None = None) -> AutocorrEstimate:
    """Exact stationary autocorrelation ``r(s) = (<f, P^s f> / N - mu^2) / sigma^2``.

    Feasible for ``n <= 6``. The length uses the same truncation rule with
    ``epsilon = 0``.
    """
    from .lon import cost_table

    n = inst.n
    if n > EXACT_MAX_N:
        raise ValueError(f"exact autocorrelation supports n <= {EXACT_MAX_N}")
    s_max = _default_s_max(n) if s_max is None else s_max
    f = cost_table(inst, max_n=EXACT_MAX_N).astype(np.float64)
    mu = f.mean()
    g = f - mu
    var = float(g @ g) / g.size
    if var <= 0.0:
        raise ZeroVarianceError("constant landscape")
    P = transition_operator(n)
    r = np.empty(s_max + 1)
    h = g.copy()
    for s in range(s_max + 1):
        r[s] = float(g @ h) / g.size / var
        h = P @ h
    ell, s_cut = autocorr_length(r, 0.0, s_max)
    return AutocorrEstimate(r=r, ell=ell, s_cut=s_cut, walk_length=0, n_walks=0, exact=True)

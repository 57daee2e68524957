"""Exhaustive enumeration kernels behind :func:`qaplon.lon.extract_lon`.

Every permutation is addressed by its lexicographic rank. The passes are

1. cost table over all ranks,
2. best-improving neighbor pointer per rank (self when locally optimal),
3. basin resolution by pointer chasing with path compression,
4. basin-to-basin transition tallies: a dense count matrix while the node
   count is small, otherwise per-basin rows written straight into CSR.

Passes 1, 2 and 4 work on independent index ranges so they can be split
across threads (the compiled kernels release the GIL).
"""

from functools import lru_cache

import numpy as np

from ._accel import jit
from .qap import _cost_loop, _swap_rank_loop, _unrank_loop, factorials

_cost_nb = jit(_cost_loop)
_unrank_nb = jit(_unrank_loop)
_swap_rank_nb = jit(_swap_rank_loop)

# Swapping positions i < j only touches the Lehmer digits of the suffix that
# starts at i, so the rank change is a function of that suffix's own rank
# (r mod (n-i)!) and of j - i. These tables hold it for short suffixes.
MAX_TABLE_SUFFIX = 9


def _suffix_table_loop(smax, fact, table, offsets):
    for s in range(2, smax + 1):
        fs = fact[:s + 1]
        p = np.empty(s, dtype=np.int64)
        digits = np.empty(s, dtype=np.int64)
        base = offsets[s]
        for rho in range(fs[s]):
            _unrank_nb(rho, s, fs, p, digits)
            for t in range(1, s):
                table[base + rho * (s - 1) + t - 1] = _swap_rank_nb(rho, p, digits, fs, 0, t) - rho


_suffix_table_nb = jit(_suffix_table_loop)


@lru_cache(maxsize=None)
def suffix_tables(smax: int):
    """Flat rank-change table for suffix lengths 2..smax and its offsets."""
    fact = factorials(max(smax, 2))
    offsets = np.zeros(smax + 2, dtype=np.int64)
    for s in range(2, smax + 1):
        offsets[s + 1] = offsets[s] + fact[s] * (s - 1)
    table = np.zeros(max(offsets[smax + 1], 1), dtype=np.int64)
    _suffix_table_nb(smax, fact, table, offsets)
    table.setflags(write=False)
    offsets.setflags(write=False)
    return table, offsets


def _neighbor_ranks_loop(r, p, digits, fact, moves, table, offsets, smax, suffix, out):
    # suffix[k] = rank of the relative order of p[k:], i.e. r mod (n-k)!
    n = p.shape[0]
    acc = 0
    for k in range(n - 1, -1, -1):
        acc += digits[k] * fact[n - 1 - k]
        suffix[k] = acc
    for m in range(moves.shape[0]):
        i = moves[m, 0]
        j = moves[m, 1]
        s = n - i
        if s <= smax:
            out[m] = r + table[offsets[s] + suffix[i] * (s - 1) + j - i - 1]
        else:
            out[m] = _swap_rank_nb(r, p, digits, fact, i, j)


_neighbor_ranks_nb = jit(_neighbor_ranks_loop)


def _advance_loop(p, digits):
    # step p to its lexicographic successor, keeping the Lehmer digits in sync
    n = p.shape[0]
    k = n - 2
    while k >= 0 and p[k] > p[k + 1]:
        k -= 1
    if k < 0:
        return
    m = n - 1
    while p[m] < p[k]:
        m -= 1
    t = p[k]
    p[k] = p[m]
    p[m] = t
    lo = k + 1
    hi = n - 1
    while lo < hi:
        t = p[lo]
        p[lo] = p[hi]
        p[hi] = t
        lo += 1
        hi -= 1
    d = n - 2
    digits[d] += 1
    while digits[d] == n - d:
        digits[d] = 0
        d -= 1
        digits[d] += 1


_advance_nb = jit(_advance_loop)


# ---------------------------------------------------------------------------
# compiled path

def _cost_table_loop(A, B, n, fact, lo, hi, out):
    p = np.empty(n, dtype=np.int64)
    digits = np.empty(n, dtype=np.int64)
    _unrank_nb(lo, n, fact, p, digits)
    for r in range(lo, hi):
        out[r] = _cost_nb(A, B, p)
        _advance_nb(p, digits)


def _pointer_loop(costs, n, fact, moves, table, offsets, smax, lo, hi, nxt):
    p = np.empty(n, dtype=np.int64)
    digits = np.empty(n, dtype=np.int64)
    suffix = np.empty(n, dtype=np.int64)
    n_moves = moves.shape[0]
    nbr = np.empty(n_moves, dtype=np.int64)
    _unrank_nb(lo, n, fact, p, digits)
    for r in range(lo, hi):
        _neighbor_ranks_nb(r, p, digits, fact, moves, table, offsets, smax, suffix, nbr)
        best = costs[r]
        best_rank = r
        for m in range(n_moves):
            q = nbr[m]
            c = costs[q]
            if c < best:
                best = c
                best_rank = q
        nxt[r] = best_rank
        _advance_nb(p, digits)


def _resolve_loop(nxt, basin, stack):
    total = nxt.shape[0]
    for r in range(total):
        if basin[r] >= 0:
            continue
        x = r
        depth = 0
        while basin[x] < 0 and nxt[x] != x:
            stack[depth] = x
            depth += 1
            x = nxt[x]
        root = basin[x]
        if root < 0:
            root = x
            basin[x] = x
        for k in range(depth):
            basin[stack[k]] = root


def _tally_loop(basin_node, order, starts, n, fact, moves, table, offsets, smax,
                node_lo, node_hi, row_offset, indices, counts, row_len, scratch, touched):
    p = np.empty(n, dtype=np.int64)
    digits = np.empty(n, dtype=np.int64)
    suffix = np.empty(n, dtype=np.int64)
    n_moves = moves.shape[0]
    nbr = np.empty(n_moves, dtype=np.int64)
    for u in range(node_lo, node_hi):
        n_touched = 0
        for pos in range(starts[u], starts[u + 1]):
            r = order[pos]
            _unrank_nb(r, n, fact, p, digits)
            _neighbor_ranks_nb(r, p, digits, fact, moves, table, offsets, smax, suffix, nbr)
            for m in range(n_moves):
                v = basin_node[nbr[m]]
                if scratch[v] == 0:
                    touched[n_touched] = v
                    n_touched += 1
                scratch[v] += 1
        dst = np.sort(touched[:n_touched])
        base = row_offset[u]
        for k in range(n_touched):
            v = dst[k]
            indices[base + k] = v
            counts[base + k] = scratch[v]
            scratch[v] = 0
        row_len[u] = n_touched


def _tally_dense_loop(basin_node, n, fact, moves, table, offsets, smax, lo, hi, counts):
    p = np.empty(n, dtype=np.int64)
    digits = np.empty(n, dtype=np.int64)
    suffix = np.empty(n, dtype=np.int64)
    n_moves = moves.shape[0]
    nbr = np.empty(n_moves, dtype=np.int64)
    _unrank_nb(lo, n, fact, p, digits)
    for r in range(lo, hi):
        _neighbor_ranks_nb(r, p, digits, fact, moves, table, offsets, smax, suffix, nbr)
        u = basin_node[r]
        for m in range(n_moves):
            counts[u, basin_node[nbr[m]]] += 1
        _advance_nb(p, digits)


cost_table_nb = jit(_cost_table_loop)
tally_dense_nb = jit(_tally_dense_loop)
pointer_nb = jit(_pointer_loop)
resolve_nb = jit(_resolve_loop)
tally_nb = jit(_tally_loop)


# ---------------------------------------------------------------------------
# numpy path

BLOCK = 1 << 15


def unrank_block(ranks, n, fact):
    """Vectorized unrank: permutations and Lehmer digits for an array of ranks."""
    m = ranks.shape[0]
    digits = np.empty((m, n), dtype=np.int64)
    rem = ranks.astype(np.int64, copy=True)
    for k in range(n):
        f = fact[n - 1 - k]
        digits[:, k] = rem // f
        rem -= digits[:, k] * f
    perms = np.empty((m, n), dtype=np.int64)
    avail = np.ones((m, n), dtype=bool)
    rows = np.arange(m)
    for k in range(n):
        # pick the (digit+1)-th still-available value
        pos = np.cumsum(avail, axis=1)
        choice = np.argmax(pos == (digits[:, k] + 1)[:, None], axis=1)
        perms[:, k] = choice
        avail[rows, choice] = False
    return perms, digits


def swap_rank_block(ranks, perms, digits, fact, i, j):
    n = perms.shape[1]
    a = perms[:, i]
    b = perms[:, j]
    mid = perms[:, i + 1:j]
    below_a = (mid < a[:, None]).sum(axis=1)
    below_b = (mid < b[:, None]).sum(axis=1)
    step = (a[:, None] < mid).astype(np.int64) - (b[:, None] < mid).astype(np.int64)
    change = step @ fact[n - 1 - np.arange(i + 1, j)] if j > i + 1 else 0
    new_di = below_b + digits[:, j] + (a < b)
    new_dj = digits[:, i] - below_a - (b < a)
    change = change + (new_di - digits[:, i]) * fact[n - 1 - i] + (new_dj - digits[:, j]) * fact[n - 1 - j]
    return ranks + change


def _blocks(lo, hi):
    for start in range(lo, hi, BLOCK):
        yield np.arange(start, min(start + BLOCK, hi), dtype=np.int64)


def cost_table_np(A, B, n, fact, lo, hi, out):
    for ranks in _blocks(lo, hi):
        perms, _ = unrank_block(ranks, n, fact)
        acc = np.zeros(ranks.shape[0], dtype=out.dtype)
        for i in range(n):
            for j in range(n):
                if A[i, j] != 0:
                    acc += A[i, j] * B[perms[:, i], perms[:, j]]
        out[ranks] = acc


def pointer_np(costs, n, fact, moves, lo, hi, nxt):
    for ranks in _blocks(lo, hi):
        perms, digits = unrank_block(ranks, n, fact)
        best = costs[ranks].copy()
        best_rank = ranks.copy()
        for i, j in moves:
            q = swap_rank_block(ranks, perms, digits, fact, i, j)
            c = costs[q]
            better = c < best
            best[better] = c[better]
            best_rank[better] = q[better]
        nxt[ranks] = best_rank


def resolve_np(nxt, basin):
    cur = nxt.astype(np.int64)
    while True:
        jumped = cur[cur]
        if np.array_equal(jumped, cur):
            break
        cur = jumped
    basin[:] = cur


def tally_np(basin_node, n, fact, moves, n_nodes):
    """Return (src, dst, count) triples sorted by (src, dst)."""
    total = basin_node.shape[0]
    keys_acc = np.empty(0, dtype=np.int64)
    cnt_acc = np.empty(0, dtype=np.int64)
    for ranks in _blocks(0, total):
        perms, digits = unrank_block(ranks, n, fact)
        src = basin_node[ranks].astype(np.int64) * n_nodes
        parts = [src + basin_node[swap_rank_block(ranks, perms, digits, fact, i, j)]
                 for i, j in moves]
        keys, cnt = np.unique(np.concatenate(parts), return_counts=True)
        keys, inv = np.unique(np.concatenate([keys_acc, keys]), return_inverse=True)
        cnt_acc = np.bincount(inv, weights=np.concatenate([cnt_acc, cnt]),
                              minlength=keys.shape[0]).astype(np.int64)
        keys_acc = keys
    return keys_acc // n_nodes, keys_acc % n_nodes, cnt_acc

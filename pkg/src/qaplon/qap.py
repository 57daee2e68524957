"""QAP instances, cost evaluation under the swap neighborhood, permutation ranking
and the QAPLIB-like instance file format.

Permutations are plain 1-D integer numpy arrays holding 0-based location
indices; ``p[i]`` is the index assigned to position ``i``. A swap move is a
pair ``(i, j)`` with ``i < j``.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._accel import jit

MAX_RANK_N = 20  # 20! still fits in int64


class InstanceFormatError(ValueError):
    """Raised for malformed instance text."""


@dataclass(frozen=True, eq=False)
class QapInstance:
    """A QAP instance: distance matrix ``A`` and flow matrix ``B``.

    Matrices whose entries are all integral are stored as ``int64`` so that
    every cost comparison downstream is exact; anything else is ``float64``.
    """

    A: np.ndarray
    B: np.ndarray
    label: str = ""

    def __post_init__(self):
        A = _coerce_matrix(self.A, "A")
        B = _coerce_matrix(self.B, "B")
        if A.shape != B.shape:
            raise ValueError(f"A is {A.shape} but B is {B.shape}")
        if A.shape[0] < 2:
            raise ValueError("instance size must be at least 2")
        if A.dtype != B.dtype:
            A = A.astype(np.float64)
            B = B.astype(np.float64)
        A.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def integral(self) -> bool:
        return self.A.dtype.kind == "i"

    def __eq__(self, other):
        if not isinstance(other, QapInstance):
            return NotImplemented
        return (self.label == other.label and self.A.dtype == other.A.dtype
                and np.array_equal(self.A, other.A) and np.array_equal(self.B, other.B))

    def __hash__(self):
        return hash((self.label, self.A.tobytes(), self.B.tobytes()))

    def __repr__(self):
        return f"QapInstance(n={self.n}, label={self.label!r}, dtype={self.A.dtype})"


def _coerce_matrix(m, name):
    m = np.array(m, dtype=np.float64 if np.asarray(m).dtype.kind == "f" else None, copy=True)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {m.shape}")
    if m.dtype.kind not in "iuf":
        raise ValueError(f"{name} must be numeric")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    if np.any(m < 0):
        raise ValueError(f"{name} has negative entries")
    if m.dtype.kind == "f" and np.all(m == np.round(m)) and np.all(m < 2.0**53):
        return m.astype(np.int64)
    if m.dtype.kind in "iu":
        return m.astype(np.int64)
    return m


# ---------------------------------------------------------------------------
# permutations and moves

def identity(n: int) -> np.ndarray:
    return np.arange(n, dtype=np.int64)


def check_permutation(p, n: int | None = None) -> np.ndarray:
    p = np.asarray(p)
    if p.ndim != 1 or p.dtype.kind not in "iu":
        raise ValueError("a permutation must be a 1-D integer array")
    if n is not None and p.size != n:
        raise ValueError(f"permutation has length {p.size}, instance has n={n}")
    if not np.array_equal(np.sort(p), np.arange(p.size)):
        raise ValueError("not a permutation of 0..n-1")
    return p.astype(np.int64, copy=False)


def is_permutation(p) -> bool:
    try:
        check_permutation(p)
    except ValueError:
        return False
    return True


@lru_cache(maxsize=None)
def _swap_table(n: int) -> np.ndarray:
    ii, jj = np.triu_indices(n, k=1)
    table = np.stack([ii, jj], axis=1).astype(np.int64)
    table.setflags(write=False)
    return table


def swap_moves(n: int) -> np.ndarray:
    """All ``n(n-1)/2`` swap moves as an ``(M, 2)`` array in lexicographic order."""
    if n < 2:
        raise ValueError("the swap neighborhood needs n >= 2")
    return _swap_table(n)


def neighbors(p) -> list[tuple[int, int]]:
    n = len(p)
    return [(int(i), int(j)) for i, j in swap_moves(n)]


def neighborhood_size(n: int) -> int:
    return n * (n - 1) // 2


def _check_move(n, move):
    i, j = int(move[0]), int(move[1])
    if not 0 <= i < j < n:
        raise ValueError(f"invalid swap move ({i}, {j}) for n={n}")
    return i, j


def apply_swap(p, move) -> np.ndarray:
    i, j = _check_move(len(p), move)
    q = np.array(p, dtype=np.int64, copy=True)
    q[i], q[j] = q[j], q[i]
    return q


# ---------------------------------------------------------------------------
# cost evaluation

def _cost_loop(A, B, p):
    n = p.shape[0]
    total = A[0, 0] * B[0, 0] * 0
    for i in range(n):
        pi = p[i]
        for j in range(n):
            total += A[i, j] * B[pi, p[j]]
    return total


def _delta_loop(A, B, p, r, s):
    pr = p[r]
    ps = p[s]
    n = p.shape[0]
    d = (A[r, r] * (B[ps, ps] - B[pr, pr]) + A[s, s] * (B[pr, pr] - B[ps, ps])
         + A[r, s] * (B[ps, pr] - B[pr, ps]) + A[s, r] * (B[pr, ps] - B[ps, pr]))
    for k in range(n):
        if k == r or k == s:
            continue
        pk = p[k]
        d += ((A[k, r] - A[k, s]) * (B[pk, ps] - B[pk, pr])
              + (A[r, k] - A[s, k]) * (B[ps, pk] - B[pr, pk]))
    return d


cost_kernel = jit(_cost_loop)
delta_kernel = jit(_delta_loop)


def cost(inst: QapInstance, p):
    """Total cost ``sum_ij a_ij * b_{p_i p_j}``."""
    p = check_permutation(p, inst.n)
    value = np.sum(inst.A * inst.B[np.ix_(p, p)])
    return int(value) if inst.integral else float(value)


def swap_delta(inst: QapInstance, p, move):
    """Cost change caused by exchanging the contents of positions ``move``, in O(n)."""
    p = check_permutation(p, inst.n)
    r, s = _check_move(inst.n, move)
    value = delta_kernel(inst.A, inst.B, p, r, s)
    return int(value) if inst.integral else float(value)


# ---------------------------------------------------------------------------
# lexicographic ranking

@lru_cache(maxsize=None)
def factorials(n: int) -> np.ndarray:
    f = np.ones(n + 1, dtype=np.int64)
    for k in range(2, n + 1):
        f[k] = f[k - 1] * k
    f.setflags(write=False)
    return f


def rank(p) -> int:
    """Lexicographic index of ``p`` among all permutations of its length."""
    p = check_permutation(p)
    n = p.size
    if n > MAX_RANK_N:
        raise ValueError(f"ranking supports n <= {MAX_RANK_N}")
    return int(_rank_loop(p, factorials(n)))


def unrank(index: int, n: int) -> np.ndarray:
    """Inverse of :func:`rank`."""
    if not 1 <= n <= MAX_RANK_N:
        raise ValueError(f"ranking supports 1 <= n <= {MAX_RANK_N}")
    index = int(index)
    if not 0 <= index < math.factorial(n):
        raise ValueError(f"index {index} outside [0, {n}!)")
    out = np.empty(n, dtype=np.int64)
    digits = np.empty(n, dtype=np.int64)
    _unrank_loop(index, n, factorials(n), out, digits)
    return out


def _rank_loop(p, fact):
    n = p.shape[0]
    r = 0
    for k in range(n):
        smaller = 0
        for m in range(k + 1, n):
            if p[m] < p[k]:
                smaller += 1
        r += smaller * fact[n - 1 - k]
    return r


def _unrank_loop(index, n, fact, out, digits):
    # digits receives the Lehmer code; out receives the permutation
    used = 0
    rem = index
    for k in range(n):
        f = fact[n - 1 - k]
        d = rem // f
        rem -= d * f
        digits[k] = d
        seen = -1
        for v in range(n):
            if not (used >> v) & 1:
                seen += 1
                if seen == d:
                    out[k] = v
                    used |= 1 << v
                    break


def _swap_rank_loop(r, p, digits, fact, i, j):
    # rank of p with positions i < j exchanged, in O(j - i)
    n = p.shape[0]
    a = p[i]
    b = p[j]
    below_a = 0
    below_b = 0
    change = 0
    for k in range(i + 1, j):
        c = p[k]
        if c < a:
            below_a += 1
        if c < b:
            below_b += 1
        step = 0
        if a < c:
            step += 1
        if b < c:
            step -= 1
        change += step * fact[n - 1 - k]
    new_di = below_b + digits[j] + (1 if a < b else 0)
    new_dj = digits[i] - below_a - (1 if b < a else 0)
    change += (new_di - digits[i]) * fact[n - 1 - i] + (new_dj - digits[j]) * fact[n - 1 - j]
    return r + change


rank_kernel = jit(_rank_loop)
unrank_kernel = jit(_unrank_loop)
swap_rank_kernel = jit(_swap_rank_loop)


# ---------------------------------------------------------------------------
# file format

def _format_entry(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_instance(inst: QapInstance) -> str:
    """Canonical text: ``n``, blank line, rows of A, blank line, rows of B."""
    parts = [str(inst.n), ""]
    for M in (inst.A, inst.B):
        parts.extend(" ".join(_format_entry(v) for v in row.tolist()) for row in M)
        parts.append("")
    return "\n".join(parts[:-1]) + "\n"


def _parse_number(tok: str):
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        v = float(tok)
    except ValueError:
        raise InstanceFormatError(f"non-numeric entry {tok!r}") from None
    if not math.isfinite(v):
        raise InstanceFormatError(f"non-finite entry {tok!r}")
    return v


def read_instance(text: str, label: str = "") -> QapInstance:
    tokens = text.split()
    if not tokens:
        raise InstanceFormatError("empty instance text")
    try:
        n = int(tokens[0])
    except ValueError:
        raise InstanceFormatError(f"malformed dimension {tokens[0]!r}") from None
    if n < 2:
        raise InstanceFormatError(f"dimension must be >= 2, got {n}")
    entries = tokens[1:]
    if len(entries) != 2 * n * n:
        raise InstanceFormatError(
            f"expected {2 * n * n} matrix entries for n={n}, found {len(entries)}")
    values = [_parse_number(t) for t in entries]
    use_float = any(isinstance(v, float) for v in values)
    arr = np.array(values, dtype=np.float64 if use_float else np.int64)
    try:
        return QapInstance(arr[: n * n].reshape(n, n), arr[n * n:].reshape(n, n), label)
    except ValueError as exc:
        raise InstanceFormatError(str(exc)) from None


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_instance(path, label: str | None = None) -> QapInstance:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if label is None:
        label = os.path.splitext(os.path.basename(os.fspath(path)))[0]
    return read_instance(text, label)


def save_instance(path, inst: QapInstance) -> None:
    atomic_write_text(path, write_instance(inst))

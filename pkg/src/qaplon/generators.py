"""Seeded generators for the two instance classes.

``uniform``: every off-diagonal distance and flow is an independent uniform
integer. ``real-like``: Euclidean distances between random points and sparse,
heavy-tailed (log-uniform) flows.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np

from .qap import QapInstance, save_instance

CLASSES = ("uniform", "real-like")
_CLASS_CODES = {"uniform": 1, "real-like": 2}


@dataclass(frozen=True)
class GeneratorParams:
    cls: str = "uniform"
    n: int = 9
    seed: int = 0
    uniform_lo: int = 0
    uniform_hi: int = 99
    rl_zero_prob: float = 0.6
    rl_exponent_max: float = 4.0
    rl_grid: float = 100.0

    def __post_init__(self):
        if self.cls not in CLASSES:
            raise ValueError(f"unknown instance class {self.cls!r}; expected one of {CLASSES}")
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.uniform_lo > self.uniform_hi or self.uniform_lo < 0:
            raise ValueError("need 0 <= uniform_lo <= uniform_hi")
        if not 0 <= self.rl_zero_prob < 1:
            raise ValueError("rl_zero_prob must lie in [0, 1)")
        if self.rl_exponent_max <= 0:
            raise ValueError("rl_exponent_max must be positive")
        if self.rl_grid < self.n:
            raise ValueError("rl_grid must be >= n")


def derive_seed(master: int, cls: str, n: int, index: int) -> int:
    """Per-instance seed as a hash of (master seed, class, size, index)."""
    ss = np.random.SeedSequence([int(master), _CLASS_CODES[cls], int(n), int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


def _label(params):
    return f"{params.cls}-n{params.n}-s{params.seed}"


def gen_uniform(params: GeneratorParams) -> QapInstance:
    if params.cls != "uniform":
        raise ValueError("gen_uniform needs params.cls == 'uniform'")
    rng = np.random.default_rng(params.seed)
    n, lo, hi = params.n, params.uniform_lo, params.uniform_hi
    A = rng.integers(lo, hi, size=(n, n), endpoint=True)
    B = rng.integers(lo, hi, size=(n, n), endpoint=True)
    np.fill_diagonal(A, 0)
    np.fill_diagonal(B, 0)
    return QapInstance(A, B, _label(params))


def gen_real_like(params: GeneratorParams) -> QapInstance:
    if params.cls != "real-like":
        raise ValueError("gen_real_like needs params.cls == 'real-like'")
    rng = np.random.default_rng(params.seed)
    n = params.n
    pts = rng.uniform(0.0, params.rl_grid, size=(n, 2))
    A = np.rint(np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)).astype(np.int64)
    np.fill_diagonal(A, 0)

    # u in (0, max]: 1 - U[0, 1) is in (0, 1]
    u = params.rl_exponent_max * (1.0 - rng.random((n, n)))
    B = np.floor(10.0 ** u).astype(np.int64)
    B[rng.random((n, n)) < params.rl_zero_prob] = 0
    np.fill_diagonal(B, 0)
    return QapInstance(A, B, _label(params))


def generate(params: GeneratorParams) -> QapInstance:
    if params.cls == "uniform":
        return gen_uniform(params)
    return gen_real_like(params)


def instance_path(root, cls: str, n: int, index: int) -> str:
    return os.path.join(os.fspath(root), "instances", cls, str(n), f"{index}.dat")


def generate_class(base: GeneratorParams, master_seed: int, count: int, root=None):
    """Generate ``count`` instances of ``base.cls``/``base.n``; optionally write them under ``root``."""
    out = []
    for index in range(count):
        params = replace(base, seed=derive_seed(master_seed, base.cls, base.n, index))
        inst = generate(params)
        inst = QapInstance(inst.A, inst.B, f"{base.cls}/{base.n}/{index}")
        if root is not None:
            save_instance(instance_path(root, base.cls, base.n, index), inst)
        out.append(inst)
    return out

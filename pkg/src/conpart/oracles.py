"""Independent reference computations used to cross-check the main code paths."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .combinatorics import enumerate_partitions
from .partition import shape
from .rng import RandomStream


def ewens_pitman_eppf(lam: Sequence[int], alpha: float, theta: float) -> float:
    """Pitman's closed-form probability of one partition with block sizes ``lam``."""
    k, n = len(lam), sum(lam)
    log_p = sum(math.log(theta + i * alpha) for i in range(1, k))
    log_p -= sum(math.log(theta + i) for i in range(1, n))
    log_p += sum(math.log(j - alpha) for part in lam for j in range(1, part))
    return math.exp(log_p)


def crp_shape_counts(alpha: float, theta: float, n: int, reps: int, stream: RandomStream,
                     chunk: int = 200_000) -> dict:
    """Shape counts (tables in order of opening) of the two-parameter restaurant."""
    counts: dict = {}
    done = 0
    c = 0
    while done < reps:
        size = min(chunk, reps - done)
        rng = stream.child(c).rng
        tables = np.zeros((size, n), dtype=np.int64)
        tables[:, 0] = 1
        k = np.ones(size, dtype=np.int64)
        for m in range(1, n):
            weights = np.where(tables > 0, tables - alpha, 0.0)
            weights[np.arange(size), k] = theta + k * alpha
            cum = np.cumsum(weights, axis=1)
            u = rng.random(size) * (m + theta)
            pick = (u[:, None] >= cum).sum(axis=1)
            pick = np.minimum(pick, k)  # guards float round-off at the top edge
            tables[np.arange(size), pick] += 1
            k = k + (pick == k)
        uniq, freq = np.unique(tables, axis=0, return_counts=True)
        for row, f in zip(uniq.tolist(), freq.tolist()):
            key = tuple(x for x in row if x)
            counts[key] = counts.get(key, 0) + f
        done += size
        c += 1
    return counts


def shape_enumeration_counts(n: int, rho) -> dict:
    """Number of constrained partitions of [n] of each shape, by listing them all."""
    counts: dict = {}
    for pi in enumerate_partitions(n, rho):
        lam = shape(pi)
        counts[lam] = counts.get(lam, 0) + 1
    return counts


def extension_count(pi, mu: Sequence[int], rho) -> int:
    """Constrained partitions of [|mu|] with shape mu whose restriction to [pi.n] is pi."""
    mu = tuple(mu)
    m = pi.n
    return sum(1 for big in enumerate_partitions(sum(mu), rho)
               if shape(big) == mu and np.array_equal(big.labels[:m], pi.labels))

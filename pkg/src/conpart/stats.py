"""Goodness-of-fit helpers and summaries of sampled label matrices."""
from __future__ import annotations

import math
from typing import Mapping

import numpy as np
from scipy import stats

from .combinatorics import ConstraintSeq, d_lambda

MIN_EXPECTED = 5.0


def encode_rows(labels: np.ndarray) -> np.ndarray:
    """One integer per row of a label matrix (labels are below n + 1)."""
    labels = np.asarray(labels, dtype=np.int64)
    base = labels.shape[1] + 1
    return labels @ (base ** np.arange(labels.shape[1], dtype=np.int64))


def shape_rows(labels: np.ndarray) -> np.ndarray:
    """(reps, n) block-size matrix; zeros pad the unused block slots."""
    n = labels.shape[1]
    return np.stack([(labels == b).sum(axis=1) for b in range(1, n + 1)], axis=1)


def shape_counts(labels: np.ndarray) -> dict:
    uniq, freq = np.unique(shape_rows(labels), axis=0, return_counts=True)
    return {tuple(x for x in row if x): int(f) for row, f in zip(uniq.tolist(), freq.tolist())}


def partition_counts(labels: np.ndarray) -> dict:
    """Counts keyed by label tuples."""
    uniq, freq = np.unique(labels, axis=0, return_counts=True)
    return {tuple(row): int(f) for row, f in zip(uniq.tolist(), freq.tolist())}


def formation_matrix(labels: np.ndarray, rho: ConstraintSeq, k_max: int) -> np.ndarray:
    """(reps, k_max) matrix of 1-based formation times, 0 where block k is not yet established."""
    reps, n = labels.shape
    out = np.zeros((reps, k_max), dtype=np.int64)
    for k in range(1, k_max + 1):
        hits = np.cumsum(labels == k, axis=1) >= rho(k)
        formed = hits.any(axis=1)
        out[formed, k - 1] = hits[formed].argmax(axis=1) + 1
    return out


def _pool(observed: np.ndarray, expected: np.ndarray):
    """Merge cells with small expectation into one, so the chi-square reference is usable."""
    small = expected < MIN_EXPECTED
    if small.any():
        observed = np.append(observed[~small], observed[small].sum())
        expected = np.append(expected[~small], expected[small].sum())
        if expected[-1] < MIN_EXPECTED and expected.size > 1:
            observed = np.append(observed[:-2], observed[-2:].sum())
            expected = np.append(expected[:-2], expected[-2:].sum())
    return observed, expected


def gof_pvalue(counts: Mapping, probs: Mapping) -> tuple[float, int]:
    """Chi-square p-value of ``counts`` against ``probs`` and the number of cells used.

    Observed keys missing from ``probs`` give p = 0.
    """
    if any(k not in probs for k, c in counts.items() if c):
        return 0.0, 0
    keys = sorted(probs)
    total = sum(counts.values())
    p = np.array([float(probs[k]) for k in keys])
    observed = np.array([counts.get(k, 0) for k in keys], dtype=float)
    expected = total * p / p.sum()
    observed, expected = _pool(observed, expected)
    if observed.size < 2:
        return 1.0, int(observed.size)
    return float(stats.chisquare(observed, expected).pvalue), int(observed.size)


def two_sample_pvalue(a: Mapping, b: Mapping) -> float:
    """Chi-square homogeneity test of two count tables."""
    keys = sorted(set(a) | set(b))
    table = np.array([[a.get(k, 0) for k in keys], [b.get(k, 0) for k in keys]], dtype=float)
    pooled = table.sum(axis=0)
    expected_min = pooled * min(table[0].sum(), table[1].sum()) / pooled.sum()
    keep = expected_min >= MIN_EXPECTED
    rest = table[:, ~keep].sum(axis=1, keepdims=True)
    table = np.hstack([table[:, keep], rest]) if (~keep).any() else table
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] < 2:
        return 1.0
    return float(stats.chi2_contingency(table, correction=False).pvalue)


def total_variation(a: Mapping, b: Mapping) -> float:
    na, nb = sum(a.values()), sum(b.values())
    return 0.5 * sum(abs(a.get(k, 0) / na - b.get(k, 0) / nb) for k in set(a) | set(b))


def conditional_uniformity(labels: np.ndarray, rho: ConstraintSeq) -> list[dict]:
    """Per shape class: chi-square of partition counts against the uniform law on the class.

    Classes whose expected cell count is below the pooling threshold are
    reported with ``p_value`` None.
    """
    parts = partition_counts(labels)
    by_shape: dict = {}
    for key, c in parts.items():
        sizes = tuple(x for x in np.bincount(np.asarray(key))[1:].tolist() if x)
        by_shape.setdefault(sizes, []).append(c)
    out = []
    for lam in sorted(by_shape):
        cells = d_lambda(lam, rho)
        observed = by_shape[lam]
        total = sum(observed)
        row = {"shape": list(lam), "partitions": cells, "observed_classes": len(observed),
               "samples": total, "p_value": None}
        if len(observed) > cells:
            row["p_value"] = 0.0
        elif cells > 1 and total / cells >= MIN_EXPECTED:
            full = np.array(observed + [0] * (cells - len(observed)), dtype=float)
            row["p_value"] = float(stats.chisquare(full).pvalue)
        out.append(row)
    return out


def z_score(estimate: float, reference: float, se: float) -> float:
    if se == 0:
        return 0.0 if estimate == reference else math.inf
    return float(abs(estimate - reference) / se)

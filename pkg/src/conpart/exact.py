"""Exact and Monte Carlo laws of shapes and formation sequences.

Float products are accumulated as sums of logarithms and exponentiated
once.  Passing H values as :class:`fractions.Fraction` switches the
fixed-H evaluators to exact rational arithmetic.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import special

from .combinatorics import ConstraintSeq, binom, d_lambda, is_constrained, tail_sums
from .errors import GuardViolation
from .models import (Beta, FixedH, FrequencyModel, HPath, PointMass, TwoParameter,
                     log_rising)
from .partition import SetPartition
from .rng import RandomStream

DECREMENT_NMAX = 200
CHUNK = 200_000


def _h_values(H, k):
    """H_0..H_k from a list, FixedH or HPath; H_0 = 1."""
    if isinstance(H, FixedH):
        return [H.H(j) for j in range(k + 1)]
    if isinstance(H, HPath):
        return [1.0] + H.prefix(k)
    if len(H) < k:
        raise ValueError(f"H prefix has {len(H)} values, H_{k} needed")
    one = Fraction(1) if H and isinstance(H[0], Fraction) else 1.0
    return [one] + list(H[:k])


def _fixed_h_factors(lam, rho):
    """(H index i, exponent on H_i, exponent on H_{i} - H_{i+1}) per block."""
    l = len(lam)
    out = []
    for j in range(1, l + 1):
        r = rho(j)
        if j < l:
            out.append((j - 1, r, lam[j - 1] - r))
        else:
            out.append((j - 1, min(r, lam[j - 1]), max(lam[j - 1] - r, 0)))
    return out


def p_fixed_H(lam: Sequence[int], rho: ConstraintSeq, H):
    """P(shape(Pi_n) = lam) when the directing H is deterministic."""
    lam = tuple(lam)
    count = d_lambda(lam, rho)
    factors = _fixed_h_factors(lam, rho)
    need = len(lam) if factors[-1][2] > 0 else len(lam) - 1
    h = _h_values(H, need)
    if isinstance(h[0], Fraction):
        out = Fraction(count)
        for i, e1, e2 in factors:
            out *= h[i] ** e1
            if e2:
                out *= (h[i] - h[i + 1]) ** e2
        return out
    log_p = math.log(count)
    for i, e1, e2 in factors:
        for base, e in ((h[i], e1), (h[i] - h[i + 1] if e2 else 1.0, e2)):
            if e:
                if base <= 0:
                    return 0.0
                log_p += e * math.log(base)
    return math.exp(log_p)


def p_fixed_H_batch(lam: Sequence[int], rho: ConstraintSeq, H: np.ndarray) -> np.ndarray:
    """p_fixed_H for every row of an (reps, >= l) array of H_1, H_2, ..."""
    lam = tuple(lam)
    count = d_lambda(lam, rho)
    h = np.concatenate([np.ones((H.shape[0], 1)), H], axis=1)
    log_p = np.full(H.shape[0], math.log(count))
    with np.errstate(divide="ignore"):
        for i, e1, e2 in _fixed_h_factors(lam, rho):
            if e1:
                log_p += e1 * np.log(h[:, i])
            if e2:
                log_p += e2 * np.log(np.clip(h[:, i] - h[:, i + 1], 0.0, None))
    return np.exp(log_p)


def sample_shapes(model: FrequencyModel, n: int, reps: int, stream: RandomStream,
                  rho: ConstraintSeq, sampler: str = "sequential") -> dict:
    """Counts of shape(Pi_n) over ``reps`` samples, chunked on child streams."""
    from .samplers import paintbox_batch, sample_partitions_batch

    draw = sample_partitions_batch if sampler == "sequential" else paintbox_batch
    counts: dict = {}
    for c, size in enumerate(_chunks(reps)):
        labels = draw(model, n, size, stream.child(c), rho)
        sizes = np.stack([(labels == b).sum(axis=1) for b in range(1, n + 1)], axis=1)
        uniq, freq = np.unique(sizes, axis=0, return_counts=True)
        for row, f in zip(uniq.tolist(), freq.tolist()):
            key = tuple(x for x in row if x)
            counts[key] = counts.get(key, 0) + f
    return counts


def _chunks(reps, size=CHUNK):
    full, rest = divmod(reps, size)
    return [size] * full + ([rest] if rest else [])


def p_monte_carlo(lam: Sequence[int], rho: ConstraintSeq, model: FrequencyModel, reps: int,
                  stream: RandomStream, mode: str = "h") -> tuple[float, float]:
    """(estimate, standard error) of p(lam).

    ``mode="h"`` averages the fixed-H probability over drawn H paths;
    ``mode="shape"`` counts exact shape hits among sampled partitions.
    """
    lam = tuple(lam)
    if not is_constrained(lam, rho):
        raise ValueError(f"{lam} is not constrained for rho={rho}")
    if mode == "h":
        total = total_sq = 0.0
        for c, size in enumerate(_chunks(reps)):
            H = model.h_batch(stream.child(c).rng, size, len(lam))
            vals = p_fixed_H_batch(lam, rho, H)
            total += vals.sum()
            total_sq += np.square(vals).sum()
        mean = total / reps
        var = max(total_sq / reps - mean * mean, 0.0)
        return mean, math.sqrt(var / max(reps - 1, 1))
    if mode == "shape":
        hits = sample_shapes(model, sum(lam), reps, stream, rho).get(lam, 0)
        p = hits / reps
        return p, math.sqrt(p * (1 - p) / reps)
    raise ValueError(f"unknown mode {mode!r}")


# --- product formula -------------------------------------------------------

def _log_binom(n, k):
    return special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1)


def log_decrement_entry(law, r, n: int, m: int) -> float:
    """log q(n:m) for one block with establishment count ``r`` and residual law ``law``."""
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got ({n}, {m})")
    if n < r:
        return 0.0 if m == n else -math.inf
    if m < r:
        return -math.inf
    i, j = m - r, n - m  # exponents on 1 - W and W
    if isinstance(law, PointMass):
        w = law.w
        if (w == 1 and i) or (w == 0 and j):
            return -math.inf
        out = math.log(math.comb(n - r, i))
        if i:
            out += i * math.log1p(-w)
        if j:
            out += j * math.log(w)
        return out
    return float(_log_binom(n - r, i) + log_rising(law.a, i) + log_rising(law.b, j)
                 - log_rising(law.a + law.b, n - r))


def decrement_entry(law, r, n: int, m: int) -> float:
    return math.exp(log_decrement_entry(law, r, n, m))


def _block_laws(model: FrequencyModel, count: int):
    if isinstance(model, TwoParameter):
        model = model.as_indep_beta()
    if not model.independent:
        raise TypeError(f"{type(model).__name__} has no independent beta residual fractions")
    return [model.w_law(k) for k in range(1, count + 1)]


def p_product(lam: Sequence[int], rho: ConstraintSeq, model: FrequencyModel) -> float:
    """p(lam) = prod_k q_k(Lambda_k : lam_k) for independent residual fractions."""
    lam = tuple(lam)
    if not lam or not is_constrained(lam, rho):
        raise ValueError(f"{lam} is not constrained for rho={rho}")
    laws = _block_laws(model, len(lam))
    log_p = 0.0
    for k, (big, part) in enumerate(zip(tail_sums(lam), lam), start=1):
        log_p += log_decrement_entry(laws[k - 1], rho(k), big, part)
    return math.exp(log_p)


@dataclass(frozen=True)
class DecrementMatrix:
    """q[n, m] = q_k(n:m) for 1 <= m <= n <= n_max (row/column 0 unused)."""

    k: int
    rho: int
    a: float
    b: float
    q: np.ndarray

    @property
    def n_max(self) -> int:
        return self.q.shape[0] - 1

    def row_sums(self) -> np.ndarray:
        return self.q[1:, 1:].sum(axis=1)

    def pascal_residual(self) -> float:
        """Largest |q(n:m) - mixture of row n+1| over n >= rho, 1 <= m <= n < n_max."""
        q, r, worst = self.q, self.rho, 0.0
        for n in range(max(r, 1), self.n_max):
            m = np.arange(1, n + 1)
            rhs = ((m + 1 - r) * q[n + 1, m + 1] + (n + 1 - m) * q[n + 1, m]) / (n + 1 - r)
            worst = max(worst, float(np.max(np.abs(q[n, m] - rhs))))
        return worst


def decrement_matrix(rho_k: int, a_k: float, b_k: float, n_max: int, k: int = 1) -> DecrementMatrix:
    """Polya-Eggenberger rows of the decrement matrix of a Beta(a_k, b_k) block."""
    if n_max > DECREMENT_NMAX:
        raise GuardViolation("decrement-nmax", f"n_max={n_max} exceeds {DECREMENT_NMAX}")
    law = Beta(a_k, b_k)
    q = np.zeros((n_max + 1, n_max + 1))
    for n in range(1, n_max + 1):
        if n < rho_k:
            q[n, n] = 1.0
            continue
        m = np.arange(rho_k, n + 1)
        i, j = m - rho_k, n - m
        log_q = (_log_binom(n - rho_k, i) + log_rising(law.a, i) + log_rising(law.b, j)
                 - log_rising(law.a + law.b, n - rho_k))
        q[n, rho_k:n + 1] = np.exp(log_q)
    return DecrementMatrix(k, rho_k, float(a_k), float(b_k), q)


# --- formation sequence ----------------------------------------------------

def _check_q_domain(lam, rho):
    if not lam or lam[0] != rho(1) or any(lam[j] < rho(j + 1) for j in range(len(lam))):
        raise ValueError(f"formation prefix {lam} needs lam_1 = rho_1 and lam_j >= rho_j")


def _w_moment(law, s):
    if isinstance(law, PointMass):
        return law.w ** s
    return math.exp(log_rising(law.b, s) - log_rising(law.a + law.b, s))


MAX_EXPANSION = 10**6


def q_formation(lam: Sequence[int], rho: ConstraintSeq, source) -> float:
    """P(formation sequence starts lam_1, lam_1 + lam_2, ..., |lam|).

    ``source`` is a deterministic H (list, FixedH, HPath) or a model with
    independent residual fractions, for which the expectation is evaluated
    exactly by expanding each (1 - H_j) power into moments of the W's.
    """
    lam = tuple(lam)
    _check_q_domain(lam, rho)
    l = len(lam)
    coef = [math.comb(lam[j] - 1, rho(j + 1) - 1) for j in range(1, l)]
    powers = [rho(j + 1) for j in range(1, l)]
    gaps = [lam[j] - rho(j + 1) for j in range(1, l)]
    if not isinstance(source, FrequencyModel) or isinstance(source, FixedH):
        h = _h_values(source, l - 1)
        out = Fraction(1) if isinstance(h[0], Fraction) else 1.0
        for j in range(1, l):
            out *= coef[j - 1] * h[j] ** powers[j - 1] * (1 - h[j]) ** gaps[j - 1]
        return out
    laws = _block_laws(source, l - 1)
    if math.prod(g + 1 for g in gaps) > MAX_EXPANSION:
        raise GuardViolation("q-expansion", f"expansion of {lam} is too large")
    terms = []
    for picks in itertools.product(*(range(g + 1) for g in gaps)):
        # exponent of H_j, then of W_k = sum over j >= k
        e = [p + i for p, i in zip(powers, picks)]
        sign = (-1) ** sum(picks)
        weight = math.prod(math.comb(g, i) for g, i in zip(gaps, picks))
        moment = 1.0
        for k in range(l - 1):
            moment *= _w_moment(laws[k], sum(e[k:]))
        terms.append(sign * weight * moment)
    return math.prod(coef) * math.fsum(terms)


# --- two-parameter family --------------------------------------------------

def eppf_two_parameter(lam: Sequence[int], alpha: float, theta: float) -> float:
    """Probability of one particular partition whose blocks have sizes ``lam``."""
    rho = ConstraintSeq.constant(1)
    model = TwoParameter(alpha, theta)
    return p_product(lam, rho, model) / d_lambda(tuple(lam), rho)


# --- path enumeration ------------------------------------------------------

def _growth_moves(lam, rho, h):
    l = len(lam)
    for j in range(1, l):
        yield j, h[j - 1] - h[j]
    if lam[-1] < rho(l):
        yield l, h[l - 1]
    else:
        yield l, h[l - 1] - h[l]
        yield l + 1, h[l]


def shape_law(n: int, rho: ConstraintSeq, H) -> dict:
    """Exact law of shape(Pi_n) under deterministic H, by propagating the growth rules."""
    h = _h_values(H, n - 1)
    zero = h[0] - h[0]
    law = {(1,): h[0]}
    for _ in range(n - 1):
        nxt = {}
        for lam, p in law.items():
            for b, q in _growth_moves(lam, rho, h):
                if q == 0:
                    continue
                mu = list(lam) + [0] if b > len(lam) else list(lam)
                mu[b - 1] += 1
                key = tuple(mu)
                nxt[key] = nxt.get(key, zero) + p * q
        law = nxt
    return law


def partition_law(n: int, rho: ConstraintSeq, H) -> dict:
    """Exact law of Pi_n itself under deterministic H (every growth path)."""
    h = _h_values(H, n - 1)
    law = {(1,): h[0]}
    for _ in range(n - 1):
        nxt = {}
        for labels, p in law.items():
            sizes = np.bincount(labels)[1:].tolist()
            for b, q in _growth_moves(sizes, rho, h):
                if q != 0:
                    nxt[labels + (b,)] = p * q
        law = nxt
    return {SetPartition(k): v for k, v in law.items()}

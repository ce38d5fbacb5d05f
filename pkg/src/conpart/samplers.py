"""Stochastic constructions of constrained partitions.

Conventions shared by the samplers:

* element 1 always opens block 1 and consumes no randomness;
* the sequential rule turns one uniform ``u`` into a block by laying the
  frequencies P_1, P_2, ... out left to right on [0, 1), so block j is the
  natural choice when 1 - H_{j-1} <= u < 1 - H_j;
* H paths come from ``stream.child(0)`` and element uniforms from
  ``stream.child(1)``, so one seed drives a whole sample.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .combinatorics import ConstraintSeq, is_constrained, tail_sums
from .errors import GuardViolation
from .models import MAX_BLOCKS, FixedH, FrequencyModel, HPath
from .partition import SetPartition, count_blocks, shape
from .rng import RandomStream


def _H(H, k):
    if k == 0:
        return 1.0
    if isinstance(H, HPath):
        return H.H(k)
    if k > len(H):
        raise ValueError(f"H prefix has {len(H)} values, H_{k} needed")
    return float(H[k - 1])


def _choose_block(u, H, nblocks, last_fill, rho_last):
    for j in range(1, nblocks):
        if u < 1.0 - _H(H, j):
            return j
    if last_fill < rho_last:
        return nblocks
    if u < 1.0 - _H(H, nblocks):
        return nblocks
    return nblocks + 1


# --- sequential growth -------------------------------------------------------

def sequential_extend(pi: SetPartition, H, stream: RandomStream, rho: ConstraintSeq) -> SetPartition:
    """Place element n+1 by the three growth rules, using one uniform from ``stream``.

    ``H`` is a list H_1, H_2, ... (at least to index l(pi)) or an :class:`HPath`.
    """
    nblocks = count_blocks(pi)
    if not isinstance(H, HPath) and len(H) < nblocks:
        raise ValueError(f"H prefix has {len(H)} values, {nblocks} needed")
    last_fill = int(np.count_nonzero(pi.labels == nblocks))
    b = _choose_block(stream.uniform(), H, nblocks, last_fill, rho(nblocks))
    return SetPartition(np.append(pi.labels, b))


def sample_partition(model: FrequencyModel, n: int, stream: RandomStream, rho: ConstraintSeq,
                     max_blocks: int = MAX_BLOCKS) -> SetPartition:
    """Pi_n grown from ({1}) along one lazily drawn H path.

    Equivalent, draw for draw, to n-1 calls of :func:`sequential_extend` with
    the path from ``stream.child(0)`` and uniforms from ``stream.child(1)``;
    the rules are applied phase by phase on the whole uniform vector.
    """
    if n < 1:
        raise ValueError("n must be positive")
    path = model.path(stream.child(0), max_blocks)
    labels = np.zeros(n, dtype=np.int64)
    labels[0] = 1
    if n == 1:
        return SetPartition(labels)
    v = np.empty(n)
    v[0] = np.nan
    v[1:] = stream.child(1).rng.random(n - 1)
    special = np.zeros(n, dtype=bool)
    special[0] = True
    # candidates: positions after the current opening that lie in S_{k-1} = {v >= 1 - H_{k-1}}
    cand = np.arange(1, n)
    k = 1
    while True:
        r = rho(k)
        est = cand[:r - 1]
        labels[est] = k
        special[est] = True
        if est.size < r - 1:
            break
        rest = cand[r - 1:]
        cand = rest[v[rest] >= 1.0 - path.H(k)]
        if cand.size == 0:
            break
        k += 1
        if k > max_blocks:
            raise GuardViolation("max-blocks", f"partition needs more than {max_blocks} blocks")
        labels[cand[0]] = k
        special[cand[0]] = True
        cand = cand[1:]
    thresholds = 1.0 - np.array(path.prefix(k - 1), dtype=float)
    free = ~special
    labels[free] = 1 + np.searchsorted(thresholds, v[free], side="right")
    return SetPartition(labels)


def sample_partitions_batch(model: FrequencyModel, n: int, reps: int, stream: RandomStream,
                            rho: ConstraintSeq) -> np.ndarray:
    """(reps, n) label matrix of independent Pi_n, grown element by element across rows."""
    rng = stream.rng
    H = np.ones((reps, n + 1))
    if n > 1:
        H[:, 1:n] = model.h_batch(rng, reps, n - 1)
    thresholds = 1.0 - H  # column j holds 1 - H_j
    rho_of = np.array([0] + [rho(k) for k in range(1, n + 1)])
    labels = np.zeros((reps, n), dtype=np.int64)
    labels[:, 0] = 1
    nblocks = np.ones(reps, dtype=np.int64)
    fill = np.ones(reps, dtype=np.int64)
    rows = np.arange(reps)
    cols = np.arange(n + 1)
    for m in range(1, n):
        u = rng.random(reps)
        below = (u[:, None] >= thresholds) & (cols[None, :] >= 1) & (cols[None, :] < nblocks[:, None])
        natural = 1 + below.sum(axis=1)
        open_new = (natural >= nblocks) & (fill >= rho_of[nblocks]) & (u >= thresholds[rows, nblocks])
        b = np.where(natural < nblocks, natural, nblocks + open_new)
        labels[:, m] = b
        grew = b > nblocks
        fill = np.where(grew, 1, fill + (b == nblocks))
        nblocks = nblocks + grew
    return labels


# --- paintbox ----------------------------------------------------------------

@dataclass(frozen=True)
class PaintboxTrace:
    values: np.ndarray
    replaced: np.ndarray
    partition: SetPartition
    H: tuple

    def to_csv(self) -> str:
        lines = ["index,value,replaced,block"]
        for i, (val, rep, b) in enumerate(zip(self.values.tolist(), self.replaced.tolist(),
                                              self.partition.labels.tolist()), start=1):
            lines.append(f"{i},{val!r},{int(rep)},{b}")
        return "\n".join(lines) + "\n"


def _interval_block(value, H_desc):
    """Block j with H_j <= value < H_{j-1}; value 1 counts as block 1."""
    return 1 + sum(1 for h in H_desc if h > value)


def paintbox_transform(u: Sequence[float], H, rho: ConstraintSeq) -> PaintboxTrace:
    """Screen given uniforms against the tail masses ``H`` (list or :class:`HPath`).

    Once H_1..H_k have each been placed rho_1..rho_k times, the next
    rho_{k+1} uniforms falling below H_k are replaced by H_{k+1}.
    """
    u = np.asarray(u, dtype=float)
    n = u.size
    values = np.empty(n)
    replaced = np.zeros(n, dtype=bool)
    used, count = 0, 0  # H_1..H_used fully placed; count copies of H_{used+1} so far
    for m in range(n):
        if u[m] < _H(H, used):
            values[m] = _H(H, used + 1)
            replaced[m] = True
            count += 1
            if count == rho(used + 1):
                used, count = used + 1, 0
        else:
            values[m] = u[m]
    top = used + (count > 0)
    hs = [_H(H, k) for k in range(1, top + 1)]
    labels = [_interval_block(x, hs) for x in values.tolist()]
    return PaintboxTrace(values, replaced, SetPartition(labels), tuple(hs))


def paintbox_sample(model: FrequencyModel, n: int, stream: RandomStream, rho: ConstraintSeq,
                    max_blocks: int = MAX_BLOCKS) -> PaintboxTrace:
    """Paintbox construction with the H path on ``stream.child(0)`` and uniforms on ``child(1)``."""
    if n < 1:
        raise ValueError("n must be positive")
    path = model.path(stream.child(0), max_blocks)
    return paintbox_transform(stream.child(1).rng.random(n), path, rho)


def paintbox_batch(model: FrequencyModel, n: int, reps: int, stream: RandomStream,
                   rho: ConstraintSeq) -> np.ndarray:
    """(reps, n) label matrix from the paintbox screening, vectorised over rows."""
    rng = stream.rng
    H = np.ones((reps, n + 1))
    H[:, 1:] = model.h_batch(rng, reps, n)
    rho_of = np.array([0] + [rho(k) for k in range(1, n + 2)])
    rows = np.arange(reps)
    used = np.zeros(reps, dtype=np.int64)
    count = np.zeros(reps, dtype=np.int64)
    values = np.empty((reps, n))
    for m in range(n):
        u = rng.random(reps)
        hit = u < H[rows, used]
        values[:, m] = np.where(hit, H[rows, np.minimum(used + 1, n)], u)
        count = count + hit
        done = hit & (count == rho_of[used + 1])
        used = used + done
        count = np.where(done, 0, count)
    return 1 + (H[:, None, 1:] > values[:, :, None]).sum(axis=2)


def paintbox_record_violations(trace: PaintboxTrace, rho: ConstraintSeq) -> list[str]:
    """Deterministic checks on one trace; an empty list means all hold."""
    problems = []
    expected = []
    for k, h in enumerate(trace.H, start=1):
        expected.extend([h] * rho(k))
    got_replaced = trace.values[trace.replaced].tolist()
    if got_replaced != expected[:len(got_replaced)] or len(expected) - len(got_replaced) >= rho(len(trace.H)):
        problems.append("replaced values are not H_k repeated rho_k times")
    records, low = [], math.inf
    for x in trace.values.tolist():
        if x <= low:
            records.append(x)
            low = x
    if records != got_replaced:
        problems.append("lower records differ from the placed H values")
    for x, b in zip(trace.values.tolist(), trace.partition.labels.tolist()):
        if _interval_block(x, trace.H) != b:
            problems.append("block label disagrees with the interval of the value")
            break
    return problems


# --- deletion kernel -------------------------------------------------------

def delete_transition_probs(lam: Sequence[int], rho: ConstraintSeq, exact: bool = False) -> dict:
    """Closed-form law of one constrained-sampling step from ``lam``.

    Zero-probability targets are omitted; a last part that empties is dropped.
    With ``exact=True`` the probabilities are Fractions.
    """
    lam = tuple(lam)
    if not lam or not is_constrained(lam, rho):
        raise ValueError(f"{lam} is not a constrained composition for rho={rho}")
    num = Fraction if exact else float
    tails = tail_sums(lam)
    l = len(lam)
    out = {}
    reach = num(1)  # probability that the first j-1 draws all missed their box
    for j in range(1, l + 1):
        if j > 1:
            reach *= num(tails[j - 1]) / num(tails[j - 2] - rho(j - 1))
        if j < l:
            p = reach * num(lam[j - 1] - rho(j)) / num(tails[j - 1] - rho(j))
        else:
            p = reach
        if p > 0:
            mu = list(lam)
            mu[j - 1] -= 1
            if mu[j - 1] == 0:
                mu.pop()
            out[tuple(mu)] = out.get(tuple(mu), 0) + p
    return out


def delete_step(lam: Sequence[int], rho: ConstraintSeq, stream: RandomStream) -> tuple[int, ...]:
    """One constrained-sampling step run as the literal ball-painting urn."""
    lam = tuple(lam)
    if not lam or not is_constrained(lam, rho):
        raise ValueError(f"{lam} is not a constrained composition for rho={rho}")
    boxes = [["white"] * part for part in lam]
    chosen = len(boxes) - 1
    for j in range(len(boxes) - 1):
        for i in range(rho(j + 1)):
            boxes[j][i] = "black"
        whites = [(b, i) for b in range(j, len(boxes)) for i, c in enumerate(boxes[b]) if c == "white"]
        box, _ = whites[int(stream.rng.integers(len(whites)))]
        if box == j:
            chosen = j
            break
    mu = list(lam)
    mu[chosen] -= 1
    if mu[chosen] == 0:
        mu.pop(chosen)
    return tuple(mu)


def delete_chain(lam: Sequence[int], rho: ConstraintSeq, stream: RandomStream) -> list[tuple[int, ...]]:
    """Repeated deletion down to the empty composition."""
    out = [tuple(lam)]
    while out[-1]:
        out.append(delete_step(out[-1], rho, stream))
    return out


# --- block counts ----------------------------------------------------------

def _geometric(rng, p):
    """Trials up to and including the first success, elementwise; p = 0 gives inf."""
    u = 1.0 - rng.random(np.shape(p))
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.floor(np.log(u) / np.log1p(-p)) + 1.0
    return np.where(p >= 1.0, 1.0, np.where(p <= 0.0, np.inf, g))


def block_counts(model: FrequencyModel, rho: ConstraintSeq, n: int, reps: int,
                 stream: RandomStream, max_blocks: int = MAX_BLOCKS) -> np.ndarray:
    """K_n for ``reps`` independent partitions, via waiting times between block events.

    Given H, block k+1 opens a Geometric(H_k) number of elements after block k
    holds rho_k elements, and then collects its remaining rho_{k+1} - 1
    establishing elements at rate H_k.  K_n counts openings at or before n.
    """
    rng = stream.rng
    counts = np.ones(reps, dtype=np.int64)
    complete_at = np.full(reps, float(rho(1)))  # element at which block 1 is established
    h = np.ones(reps)
    active = complete_at < n
    k = 1
    while active.any():
        idx = np.flatnonzero(active)
        h[idx] = h[idx] * model.draw_w(rng, k, idx.size)
        opened = complete_at[idx] + _geometric(rng, h[idx])
        ok = opened <= n
        counts[idx[ok]] += 1
        k += 1
        if k > max_blocks:
            raise GuardViolation("max-blocks", f"more than {max_blocks} blocks requested")
        est = opened.copy()
        # rho_{k} - 1 further hits, each at rate H_{k-1} (the mass just opened)
        for _ in range(int(rho(k)) - 1):
            est += _geometric(rng, h[idx])
        complete_at[idx] = est
        active[idx] = ok & (est < n)
    return counts


# --- continuous time ---------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    """Jumps of R_t up to the horizon; ``sojourns`` keeps every gamma draw,
    the last one being the sojourn that crossed the horizon."""

    jump_times: np.ndarray
    states: np.ndarray
    sojourns: np.ndarray
    horizon: float

    @property
    def jumps(self) -> int:
        return int(self.jump_times.size)


def _check_real_rho(rho):
    for k in range(1, len(rho.prefix) + len(rho.cycle) + 1):
        if not rho(k) > 0:
            raise ValueError("rho entries must be positive")


def continuous_time_sample(model: FrequencyModel, rho: ConstraintSeq, T: float, stream: RandomStream,
                           max_blocks: int = MAX_BLOCKS) -> Trajectory:
    """R_t on [0, T]: in the k-th state s the sojourn is Gamma(rho_k) / s, then s -> s W_k."""
    if not T > 0:
        raise ValueError("horizon must be positive")
    _check_real_rho(rho)
    path = model.path(stream.child(0), max_blocks)
    rng = stream.child(1).rng
    times, states, sojourns = [], [1.0], []
    t, k = 0.0, 1
    while True:
        s = states[-1]
        g = float(rng.gamma(float(rho(k))))
        stay = g / s if s > 0 else math.inf
        sojourns.append(stay)
        t += stay
        if t > T:
            break
        times.append(t)
        states.append(path.H(k))
        k += 1
    return Trajectory(np.array(times), np.array(states), np.array(sojourns), float(T))


def jump_counts(model: FrequencyModel, rho: ConstraintSeq, T: float, reps: int,
                stream: RandomStream, max_blocks: int = MAX_BLOCKS) -> np.ndarray:
    """Number of jumps of R in [0, T] for ``reps`` independent trajectories."""
    _check_real_rho(rho)
    rng = stream.rng
    t = np.zeros(reps)
    s = np.ones(reps)
    counts = np.zeros(reps, dtype=np.int64)
    active = np.ones(reps, dtype=bool)
    k = 1
    while active.any():
        idx = np.flatnonzero(active)
        g = rng.gamma(float(rho(k)), size=idx.size)
        with np.errstate(divide="ignore"):
            t[idx] += np.where(s[idx] > 0, g / s[idx], np.inf)
        ok = t[idx] <= T
        counts[idx[ok]] += 1
        s[idx] = s[idx] * model.draw_w(rng, k, idx.size)
        active[idx] = ok
        k += 1
        if k > max_blocks:
            raise GuardViolation("max-blocks", f"more than {max_blocks} jumps requested")
    return counts


# --- chain records ---------------------------------------------------------

@dataclass(frozen=True)
class ChainRecords:
    points: np.ndarray       # (n, d) sample
    record_index: np.ndarray  # 0-based indices of the chain records
    partition: SetPartition
    H: np.ndarray            # uniform measure of the lower set of each record


def _record_indices(points: np.ndarray) -> np.ndarray:
    n = points.shape[0]
    out = [0]
    cand = np.arange(1, n)
    while cand.size:
        last = points[out[-1]]
        cand = cand[np.all(points[cand] < last, axis=1)]
        if not cand.size:
            break
        out.append(int(cand[0]))
        cand = cand[1:]
    return np.array(out, dtype=np.int64)


def chain_record_sample(d: int, n: int, stream: RandomStream) -> ChainRecords:
    """Chain records of n uniform points in [0,1]^d under the strict coordinatewise order.

    Block k holds the k-th record and the later non-record points lying in
    L(R_{k-1}) minus L(R_k), where L(R_0) is the whole cube.
    """
    if d < 1 or n < 1:
        raise ValueError("need d >= 1 and n >= 1")
    points = stream.rng.random((n, d))
    rec = _record_indices(points)
    labels = np.ones(n, dtype=np.int64)
    pos = np.arange(n)
    for k, i in enumerate(rec.tolist(), start=1):
        if k > 1:
            labels[i] = k
        below = np.all(points[i + 1:] < points[i], axis=1)
        later = pos[i + 1:]
        # later points strictly below record k sit at depth >= k+1
        labels[later[below]] = np.maximum(labels[later[below]], k + 1)
    labels[rec] = np.arange(1, rec.size + 1)
    return ChainRecords(points, rec, SetPartition(labels), np.prod(points[rec], axis=1))


def chain_record_counts(d: int, n: int, reps: int, stream: RandomStream) -> np.ndarray:
    """Number of chain records among n points, for each of ``reps`` independent samples."""
    out = np.empty(reps, dtype=np.int64)
    for r in range(reps):
        pts = stream.child(r).rng.random((n, d))
        out[r] = _record_indices(pts).size
    return out

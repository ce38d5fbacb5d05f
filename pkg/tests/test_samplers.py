import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from conpart.combinatorics import ConstraintSeq, constrained_compositions
from conpart.errors import GuardViolation, ModelExhausted
from conpart.exact import p_product, shape_law
from conpart.models import Beta, FixedH, IIDStick, PointMass, TwoParameter, Uniform
from conpart.partition import SetPartition, count_blocks, shape, validate
from conpart.rng import RandomStream
from conpart.samplers import (block_counts, chain_record_counts, chain_record_sample,
                              continuous_time_sample, delete_chain, delete_step,
                              delete_transition_probs, jump_counts, paintbox_batch,
                              paintbox_record_violations, paintbox_sample, paintbox_transform,
                              sample_partition, sample_partitions_batch, sequential_extend)
from conpart.stats import shape_counts

from conftest import RHO_SET, rhos

ONE = ConstraintSeq.constant(1)
R13 = ConstraintSeq.parse("1,3;1")
R121 = ConstraintSeq.parse("1,2;1")
UNIFORM = IIDStick(Uniform())


class FixedUniforms:
    def __init__(self, values):
        self.values = list(values)

    def uniform(self):
        return self.values.pop(0)


def test_streams_reproduce_and_split():
    a, b = RandomStream(7), RandomStream(7)
    assert a.rng.random(5).tolist() == b.rng.random(5).tolist()
    assert a.child(3).rng.random() == RandomStream(7, (3,)).rng.random()
    assert RandomStream(7).child(1).rng.random() != RandomStream(7).child(2).rng.random()


def test_rule_iii_with_one_block():
    H = [0.4, 0.1]
    start = SetPartition([1])
    assert sequential_extend(start, H, FixedUniforms([0.59]), R13).labels.tolist() == [1, 1]
    assert sequential_extend(start, H, FixedUniforms([0.61]), R13).labels.tolist() == [1, 2]


def test_rule_ii_fills_short_last_block():
    H = [0.4, 0.1]
    pi = SetPartition([1, 2])
    assert sequential_extend(pi, H, FixedUniforms([0.59]), R13).labels.tolist() == [1, 2, 1]
    for u in (0.61, 0.95, 0.9999):
        assert sequential_extend(pi, H, FixedUniforms([u]), R13).labels.tolist() == [1, 2, 2]


def test_sequential_extend_needs_prefix():
    with pytest.raises(ValueError):
        sequential_extend(SetPartition([1, 2]), [0.5], FixedUniforms([0.1]), ONE)


def test_two_paths_to_shape_21():
    law = shape_law(3, ONE, [0.5, 0.25])
    assert law[(2, 1)] == pytest.approx(0.5)
    labels = sample_partitions_batch(FixedH((0.5, 0.25), 0.5), 3, 200_000, RandomStream(1), ONE)
    freq = shape_counts(labels)[(2, 1)] / 200_000
    assert abs(freq - 0.5) < 4 * math.sqrt(0.25 / 200_000)


def test_trivial_samples():
    assert sample_partition(UNIFORM, 1, RandomStream(0), ONE) == SetPartition([1])
    always_one = IIDStick(PointMass(0.0))
    assert count_blocks(sample_partition(always_one, 50, RandomStream(0), ONE)) == 1


def test_hard_stop_raises_in_sampler():
    with pytest.raises(ModelExhausted):
        sample_partition(FixedH((0.5,)), 200, RandomStream(0), ONE)


def test_loop_and_phase_sampler_agree_draw_for_draw():
    for seed in range(10):
        for rho in RHO_SET:
            st_ = RandomStream(seed)
            fast = sample_partition(UNIFORM, 80, st_, rho)
            path, u = UNIFORM.path(st_.child(0)), st_.child(1)
            slow = SetPartition([1])
            for _ in range(79):
                slow = sequential_extend(slow, path, u, rho)
            assert fast == slow


def test_uniform_shape_law_n3():
    labels = sample_partitions_batch(UNIFORM, 3, 10**6, RandomStream(3), ONE)
    counts = shape_counts(labels)
    for lam in constrained_compositions(3, ONE):
        p = p_product(lam, ONE, UNIFORM)
        if len(lam) == 2 or lam == (3,) or lam == (1, 1, 1):
            pass
        freq = counts.get(lam, 0) / 10**6
        assert abs(freq - p) < 4 * math.sqrt(p * (1 - p) / 10**6)
    assert p_product((2, 1), ONE, UNIFORM) == pytest.approx(1 / 3)


@given(rhos, st.integers(0, 10**6), st.integers(1, 40))
def test_sampler_outputs_validate(rho, seed, n):
    for model in (UNIFORM, IIDStick(Beta(2, 3)), TwoParameter(0.5, 1.0)):
        assert validate(sample_partition(model, n, RandomStream(seed), rho), rho)
    batch = sample_partitions_batch(UNIFORM, n, 5, RandomStream(seed), rho)
    box = paintbox_batch(UNIFORM, n, 5, RandomStream(seed), rho)
    assert all(validate(SetPartition(r), rho) for r in np.vstack([batch, box]))


def test_paintbox_hand_trace():
    trace = paintbox_transform([0.9, 0.3, 0.7, 0.2], [0.5, 0.1], ONE)
    assert trace.values.tolist() == [0.5, 0.1, 0.7, 0.2]
    assert trace.replaced.tolist() == [True, True, False, False]
    assert str(trace.partition) == "{1,3}|{2,4}"
    assert trace.to_csv().splitlines()[0] == "index,value,replaced,block"


def test_paintbox_first_block_fills_first():
    rho = ConstraintSeq.parse("4;1")
    trace = paintbox_sample(UNIFORM, 4, RandomStream(2), rho)
    assert trace.replaced.all() and shape(trace.partition) == (4,)


@given(rhos, st.integers(0, 10**6), st.integers(1, 60))
def test_paintbox_records_hold_on_every_trace(rho, seed, n):
    for model in (UNIFORM, FixedH((0.6, 0.3, 0.1), 0.3), TwoParameter(0.3, 1.0)):
        trace = paintbox_sample(model, n, RandomStream(seed), rho)
        assert paintbox_record_violations(trace, rho) == []
        assert validate(trace.partition, rho)


def test_paintbox_violation_checker_catches_tampering():
    trace = paintbox_transform([0.9, 0.3, 0.7, 0.2], [0.5, 0.1], ONE)
    bad = type(trace)(trace.values, trace.replaced, SetPartition([1, 2, 2, 1]), trace.H)
    assert paintbox_record_violations(bad, ONE)


def test_paintbox_batch_matches_loop_in_law():
    n, reps = 5, 100_000
    a = shape_counts(paintbox_batch(UNIFORM, n, reps, RandomStream(4), R121))
    b = Counter(shape(paintbox_sample(UNIFORM, n, RandomStream(5).child(i), R121).partition)
                for i in range(20_000))
    for lam, c in b.items():
        p = a.get(lam, 0) / reps
        assert abs(c / 20_000 - p) < 4 * math.sqrt(p * (1 - p) * (1 / 20_000 + 1 / reps)) + 1e-9


def test_kernel_examples():
    assert delete_transition_probs((2, 1), ONE) == {(1, 1): 0.5, (2,): 0.5}
    probs = delete_transition_probs((3, 3, 2), R121, exact=True)
    assert {k: str(v) for k, v in probs.items()} == {(2, 3, 2): "2/7", (3, 2, 2): "5/21",
                                                     (3, 3, 1): "10/21"}
    assert delete_transition_probs((4,), R121) == {(3,): 1.0}
    assert delete_transition_probs((1,), R121) == {(): 1.0}
    with pytest.raises(ValueError):
        delete_transition_probs((1, 1, 1), R121)


@given(rhos, st.integers(1, 10), st.data())
def test_kernel_sums_to_one_and_stays_constrained(rho, n, data):
    comps = list(constrained_compositions(n, rho))
    lam = data.draw(st.sampled_from(comps))
    probs = delete_transition_probs(lam, rho, exact=True)
    assert sum(probs.values()) == 1 and all(p > 0 for p in probs.values())
    for mu in probs:
        assert sum(mu) == n - 1
        assert not mu or mu in set(constrained_compositions(n - 1, rho))


def test_urn_matches_formula():
    stream, steps = RandomStream(8), 10**6
    counts = Counter(delete_step((3, 3, 2), R121, stream) for _ in range(steps))
    for mu, p in delete_transition_probs((3, 3, 2), R121).items():
        assert abs(counts[mu] / steps - p) < 4 * math.sqrt(p * (1 - p) / steps)


def test_urn_small_cases():
    stream = RandomStream(9)
    assert all(delete_step((2,), ONE, stream) == (1,) for _ in range(100))
    c = Counter(delete_step((2, 1), ONE, stream) for _ in range(10**5))
    assert abs(c[(2,)] / 10**5 - 0.5) < 4 * math.sqrt(0.25 / 10**5)


def test_delete_chain_shrinks_to_empty():
    chain = delete_chain((3, 3, 2), R121, RandomStream(1))
    assert [sum(c) for c in chain] == list(range(8, -1, -1))
    assert chain[-1] == ()


def test_block_count_engine_matches_sampler():
    n, reps = 1000, 4000
    for rho in (ONE, R121):
        fast = block_counts(UNIFORM, rho, n, reps, RandomStream(1))
        slow = np.array([count_blocks(sample_partition(UNIFORM, n, RandomStream(2).child(r), rho))
                         for r in range(reps)])
        se = math.sqrt(fast.var() / reps + slow.var() / reps)
        assert abs(fast.mean() - slow.mean()) < 4 * se
        assert stats.ks_2samp(fast, slow).pvalue > 1e-3


def test_block_count_engine_exact_law_small_n():
    # K_4 law from the exact shape law under a fixed H
    H = FixedH((0.6, 0.3, 0.1), 0.3)
    law = shape_law(4, R121, [H.H(k) for k in range(1, 4)])
    k_law = Counter()
    for lam, p in law.items():
        k_law[len(lam)] += p
    k = block_counts(H, R121, 4, 200_000, RandomStream(3))
    for blocks, p in k_law.items():
        assert abs((k == blocks).mean() - p) < 4 * math.sqrt(p * (1 - p) / 200_000)


def test_shape_over_n_tracks_frequencies():
    n, good = 10**5, 0
    for r in range(100):
        st_ = RandomStream(12).child(r)
        pi = sample_partition(UNIFORM, n, st_, ONE)
        h = [1.0] + UNIFORM.path(st_.child(0)).prefix(3)
        p = np.array([h[i] - h[i + 1] for i in range(3)])
        s = np.zeros(3)
        sh = shape(pi)[:3]
        s[:len(sh)] = sh
        good += np.all(np.abs(s / n - p) < 0.01)
    assert good >= 95


def test_trajectory_invariants():
    tr = continuous_time_sample(UNIFORM, ONE, 1e4, RandomStream(4))
    assert tr.states[0] == 1.0
    assert np.all(np.diff(tr.states) < 0) and np.all(np.diff(tr.jump_times) > 0)
    assert tr.jumps == tr.states.size - 1 == tr.sojourns.size - 1
    assert tr.jump_times[-1] <= 1e4 < tr.jump_times[-1] + tr.sojourns[-1]


def test_sojourn_means():
    for rho_text in (";1", "0.5;0.5", "2.5;1"):
        rho = ConstraintSeq.parse(rho_text, real=True)
        scaled = []
        for r in range(25_000):
            tr = continuous_time_sample(UNIFORM, rho, 5.0, RandomStream(6).child(r))
            scaled.append(tr.sojourns[0] * tr.states[0])
        x = np.array(scaled)
        assert abs(x.mean() - rho(1)) < 4 * x.std() / math.sqrt(x.size)


def test_point_mass_trajectory_states():
    tr = continuous_time_sample(IIDStick(PointMass(0.5)), ONE, 1e3, RandomStream(1))
    k = np.arange(tr.states.size)
    assert np.allclose(-np.log(tr.states), k * math.log(2))


def test_jump_counts_match_trajectories():
    T = math.exp(5)
    vec = jump_counts(UNIFORM, ONE, T, 20_000, RandomStream(1))
    loop = np.array([continuous_time_sample(UNIFORM, ONE, T, RandomStream(2).child(r)).jumps
                     for r in range(5_000)])
    se = math.sqrt(vec.var() / vec.size + loop.var() / loop.size)
    assert abs(vec.mean() - loop.mean()) < 4 * se


def test_ctime_rejects_bad_input():
    with pytest.raises(ValueError):
        continuous_time_sample(UNIFORM, ONE, 0.0, RandomStream(0))
    with pytest.raises(GuardViolation):
        continuous_time_sample(UNIFORM, ONE, 1e300, RandomStream(0), max_blocks=10)


def test_chain_records_one_dimension():
    for r in range(50):
        cr = chain_record_sample(1, 200, RandomStream(3).child(r))
        x = cr.points[:, 0]
        assert cr.record_index[0] == 0
        assert np.all(np.diff(x[cr.record_index]) < 0)
        assert np.allclose(cr.H, x[cr.record_index])
        lows = np.minimum.accumulate(x)
        assert set(cr.record_index.tolist()) == set(np.flatnonzero(x == lows).tolist())
        want = 1 + (cr.H[None, :] > x[:, None]).sum(axis=1)
        assert cr.partition.labels.tolist() == want.tolist()
        assert validate(cr.partition, ONE)


@given(st.integers(1, 4), st.integers(1, 300), st.integers(0, 10**6))
def test_chain_record_structure(d, n, seed):
    cr = chain_record_sample(d, n, RandomStream(seed))
    pts, rec = cr.points, cr.record_index
    assert rec[0] == 0 and cr.partition.labels[0] == 1
    assert validate(cr.partition, ONE) and count_blocks(cr.partition) == rec.size
    for a, b in zip(rec, rec[1:]):
        assert np.all(pts[b] < pts[a])
        between = pts[a + 1:b]
        assert not np.any(np.all(between < pts[a], axis=1))
    for k, i in enumerate(rec.tolist(), start=1):
        later = np.arange(i + 1, n)
        in_band = np.all(pts[later] < pts[i], axis=1)
        if k < rec.size:
            in_band &= ~np.all(pts[later] < pts[rec[k]], axis=1)
        assert np.all(cr.partition.labels[later[in_band]] == k + 1) or k == rec.size


def test_first_record_mass_law_d2():
    h = np.array([chain_record_sample(2, 1, RandomStream(5).child(r)).H[0] for r in range(20_000)])
    # -log H_1 ~ Gamma(2, 1)
    assert stats.kstest(-np.log(h), stats.gamma(2).cdf).statistic < 1.95 / math.sqrt(h.size)


def test_counts_helper_matches_sampler():
    a = chain_record_counts(2, 300, 20, RandomStream(1))
    b = [chain_record_sample(2, 300, RandomStream(1).child(r)).record_index.size for r in range(20)]
    assert a.tolist() == b

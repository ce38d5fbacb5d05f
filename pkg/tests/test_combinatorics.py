import itertools
import math

import pytest
from hypothesis import given, strategies as st

from conpart.combinatorics import (ConstraintSeq, binom, compositions, constrained_compositions,
                                   d_lambda, d_lambda_mu, enumerate_partitions, is_constrained,
                                   tail_sums)
from conpart.errors import GuardViolation, ParseError
from conpart.oracles import extension_count, shape_enumeration_counts
from conpart.partition import shape, validate

from conftest import RHO_SET


def test_rho_grammar():
    r = ConstraintSeq.parse("1,2;1")
    assert [r(k) for k in range(1, 6)] == [1, 2, 1, 1, 1]
    assert str(r) == "1,2;1"
    assert ConstraintSeq.parse(";1") == ConstraintSeq.constant(1)
    cyc = ConstraintSeq.parse("3;1,2")
    assert cyc.take(6) == (3, 1, 2, 1, 2, 1)
    assert cyc.partial_sum(4) == 7


@pytest.mark.parametrize("text, pos", [("1,2", 3), ("1;", 2), ("1,x;1", 2), ("0;1", None), ("1;1;1", 3)])
def test_rho_parse_errors(text, pos):
    with pytest.raises(ParseError) as err:
        ConstraintSeq.parse(text)
    if pos is not None:
        assert err.value.position == pos


def test_real_rho_only_on_request():
    with pytest.raises(ParseError):
        ConstraintSeq.parse("0.5;0.5")
    assert ConstraintSeq.parse("0.5;0.5", real=True)(3) == 0.5


@given(st.lists(st.integers(1, 5), min_size=1, max_size=6))
def test_tail_sums_strictly_decrease(lam):
    t = tail_sums(lam)
    assert t[0] == sum(lam) and t[-1] == lam[-1]
    assert all(a > b for a, b in zip(t, t[1:]))


def test_is_constrained_examples():
    one, r = ConstraintSeq.constant(1), ConstraintSeq.parse("1,2;1")
    assert is_constrained((3, 1, 2), one)
    assert is_constrained((1, 2), r)
    assert not is_constrained((1, 1, 5), r)


def test_binomial_convention():
    assert binom(-2, -2) == 1
    assert binom(-3, -2) == 0
    assert binom(5, 2) == 10
    assert binom(2, 5) == 0
    assert binom(3, -1) == 0


def test_d_lambda_examples():
    one, r = ConstraintSeq.constant(1), ConstraintSeq.parse("1,2;1")
    assert d_lambda((5,), r) == 1
    assert d_lambda((2, 1), one) == 2
    assert d_lambda((3, 3, 2), r) == 63 == math.comb(7, 2) * math.comb(3, 1)
    with pytest.raises(ValueError):
        d_lambda((1, 1, 5), r)


def test_d_lambda_mu_examples():
    one, r = ConstraintSeq.constant(1), ConstraintSeq.parse("1,2;1")
    assert d_lambda_mu((2, 3), (2, 3), r) == 1
    assert d_lambda_mu((1,), (2, 1), one) == 2
    assert d_lambda_mu((2,), (2, 2), r) == 1


def test_enumeration_examples():
    assert [str(p) for p in enumerate_partitions(1, ConstraintSeq.constant(1))] == ["{1}"]
    assert len(enumerate_partitions(3, ConstraintSeq.parse("1,2;1"))) == 4
    assert len(enumerate_partitions(3, ConstraintSeq.constant(1))) == 5
    with pytest.raises(GuardViolation):
        enumerate_partitions(13, ConstraintSeq.constant(1))


def test_bell_numbers_for_unit_rho():
    bell = [1, 2, 5, 15, 52, 203, 877, 4140]
    assert [len(enumerate_partitions(n, ConstraintSeq.constant(1))) for n in range(1, 9)] == bell


@pytest.mark.parametrize("rho", RHO_SET, ids=str)
def test_counts_match_enumeration(rho):
    for n in range(1, 9):
        counts = shape_enumeration_counts(n, rho)
        comps = list(constrained_compositions(n, rho))
        assert set(counts) <= set(comps)
        assert all(d_lambda(lam, rho) == counts.get(lam, 0) for lam in comps)
        assert sum(d_lambda(lam, rho) for lam in comps) == len(enumerate_partitions(n, rho))


@pytest.mark.parametrize("rho", RHO_SET, ids=str)
def test_enumerated_partitions_are_distinct_and_valid(rho):
    pis = enumerate_partitions(7, rho)
    assert len(set(pis)) == len(pis)
    assert all(validate(p, rho) for p in pis)


@pytest.mark.parametrize("rho", RHO_SET, ids=str)
def test_extension_counts_sum_to_d(rho):
    # every big partition restricts to exactly one small one
    for big in range(2, 8):
        for small in range(1, big):
            for mu in constrained_compositions(big, rho):
                total = sum(d_lambda(lam, rho) * d_lambda_mu(lam, mu, rho)
                            for lam in constrained_compositions(small, rho) if len(lam) <= len(mu))
                assert total == d_lambda(mu, rho)


@pytest.mark.parametrize("rho", RHO_SET, ids=str)
def test_extension_counts_representative_independent(rho):
    for m in range(1, 5):
        by_shape = {}
        for pi in enumerate_partitions(m, rho):
            by_shape.setdefault(shape(pi), []).append(pi)
        for lam, reps in by_shape.items():
            for n in range(m, 7):
                for mu in constrained_compositions(n, rho):
                    if len(mu) >= len(lam):
                        want = d_lambda_mu(lam, mu, rho)
                        assert {extension_count(pi, mu, rho) for pi in reps} == {want}


def test_d_lambda_mu_rejects_bad_input():
    r = ConstraintSeq.parse("1,2;1")
    with pytest.raises(ValueError):
        d_lambda_mu((2, 2), (3,), r)
    with pytest.raises(ValueError):
        d_lambda_mu((1, 1, 1), (2, 2), r)


def test_compositions_are_complete():
    for n in range(1, 8):
        assert len(list(compositions(n))) == 2 ** (n - 1)
    rho = ConstraintSeq.parse(";2")
    want = {c for c in itertools.chain.from_iterable(compositions(n) for n in [6]) if is_constrained(c, rho)}
    assert set(constrained_compositions(6, rho)) == want

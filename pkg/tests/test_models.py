import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special

from conpart.errors import GuardViolation, ModelExhausted, ParseError
from conpart.models import (Affine, Beta, FixedH, HPath, IIDStick, IndepBeta, PointMass,
                            TwoParameter, Uniform, draw_H, log_moments, parse_model)
from conpart.rng import RandomStream


def test_fixed_geometric_tail():
    m = FixedH((0.5, 0.25), 0.5)
    assert draw_H(m, 4, RandomStream(0)) == [0.5, 0.25, 0.125, 0.0625]
    exact = FixedH((Fraction(1, 2),), Fraction(1, 3))
    assert exact.H(3) == Fraction(1, 18)


def test_fixed_hard_stop():
    m = FixedH((0.5, 0.25))
    assert draw_H(m, 2, RandomStream(0)) == [0.5, 0.25]
    with pytest.raises(ModelExhausted):
        draw_H(m, 3, RandomStream(0))


@pytest.mark.parametrize("values", [(0.5, 0.5), (1.2,), (0.3, 0.4), ()])
def test_fixed_rejects_bad_values(values):
    with pytest.raises(ValueError):
        FixedH(values, 0.5)


def test_point_mass_path():
    h = draw_H(IIDStick(PointMass(0.3)), 5, RandomStream(1))
    assert np.allclose(h, [0.3 ** k for k in range(1, 6)])


def test_lazy_path_extends_same_realisation():
    m = IIDStick(Uniform())
    path = m.path(RandomStream(9))
    first = path.prefix(3)
    longer = path.prefix(10)
    assert longer[:3] == first
    assert draw_H(m, 10, RandomStream(9)) == longer


def test_uniform_h1_mean():
    rng = RandomStream(5).rng
    h1 = IIDStick(Uniform()).h_batch(rng, 10**6, 1)[:, 0]
    se = h1.std() / math.sqrt(h1.size)
    assert abs(h1.mean() - 0.5) < 3 * se


def test_beta_orientation():
    # density (1-s)^(a-1) s^(b-1): mean of W is b / (a + b)
    w = Beta(2.0, 5.0).sample(RandomStream(3).rng, 200_000)
    assert abs(w.mean() - 5 / 7) < 4 * w.std() / math.sqrt(w.size)


@given(st.sampled_from([IIDStick(Uniform()), IIDStick(Beta(2, 3)), TwoParameter(0.5, 0.5),
                        IndepBeta(Affine(1, 0.5), Affine(2)), FixedH((0.6, 0.3, 0.1), 0.3)]),
       st.integers(0, 10**6))
def test_paths_are_nonincreasing(model, seed):
    h = np.array(draw_H(model, 30, RandomStream(seed)))
    full = np.concatenate([[1.0], h])
    assert np.all(np.diff(full) <= 0) and np.all(h >= 0)
    p = -np.diff(full)
    assert np.all(p >= 0) and p.sum() <= 1 + 1e-12


def _quad_log_moments(a, b):
    dens = lambda s: (1 - s) ** (a - 1) * s ** (b - 1) / special.beta(a, b)
    m1 = integrate.quad(lambda s: -math.log(s) * dens(s), 0, 1, epsabs=1e-13, epsrel=1e-12)[0]
    m2 = integrate.quad(lambda s: math.log(s) ** 2 * dens(s), 0, 1, epsabs=1e-13, epsrel=1e-12)[0]
    return m1, m2 - m1 * m1


@pytest.mark.parametrize("a, b", [(1, 1), (2, 3), (0.7, 1.5), (3, 0.8)])
def test_log_moments_against_quadrature(a, b):
    mu, s2 = log_moments(IIDStick(Beta(a, b)))
    qm, qv = _quad_log_moments(a, b)
    assert mu == pytest.approx(qm, rel=1e-8)
    assert s2 == pytest.approx(qv, rel=1e-8)


def test_log_moments_special_cases():
    assert log_moments(IIDStick(Uniform())) == pytest.approx((1.0, 1.0), rel=1e-12)
    assert log_moments(IIDStick(PointMass(0.25))) == (pytest.approx(math.log(4)), 0.0)
    with pytest.raises(ValueError):
        log_moments(IIDStick(PointMass(0.0)))
    with pytest.raises(TypeError):
        log_moments(TwoParameter(0.0, 1.0))


def test_step_mean_matches_log_moment():
    model = IIDStick(Beta(2, 3))
    h = model.h_batch(RandomStream(11).rng, 100_000, 1)[:, 0]
    steps = -np.log(h)
    mu, s2 = log_moments(model)
    assert abs(steps.mean() - mu) < 4 * math.sqrt(s2 / steps.size)


def test_two_parameter_laws():
    m = TwoParameter(0.5, 0.5)
    assert m.w_law(3) == Beta(0.5, 2.0)
    assert m.as_indep_beta().w_law(3) == m.w_law(3)
    for bad in [(1.0, 1.0), (-0.1, 1.0), (0.5, -0.5)]:
        with pytest.raises(ValueError):
            TwoParameter(*bad)


def test_indep_beta_positivity():
    with pytest.raises(ValueError):
        IndepBeta(Affine(1, -0.5), Affine(1))
    with pytest.raises(ValueError):
        IndepBeta(Affine(0), Affine(1))


def test_max_blocks_guard():
    path = HPath(IIDStick(Uniform()), RandomStream(0), max_blocks=5)
    with pytest.raises(GuardViolation):
        path.H(6)


@pytest.mark.parametrize("text", ["fixed:0.5,0.25;geom=0.5", "fixed:0.5,0.25;stop", "iid:uniform",
                                  "iid:beta(2,3)", "iid:point(0.3)", "indep-beta:a=1+0.5k,b=2",
                                  "gem:0.5,0.5"])
def test_model_grammar_round_trip(text):
    model = parse_model(text)
    assert parse_model(model.describe()).describe() == model.describe()


@pytest.mark.parametrize("text", ["uniform", "iid:gamma(1)", "fixed:0.5,0.6;geom=0.5",
                                  "fixed:0.5;geo=1", "gem:0.5", "nope:1"])
def test_model_grammar_errors(text):
    with pytest.raises(ParseError):
        parse_model(text)

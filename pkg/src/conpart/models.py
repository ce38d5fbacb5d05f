"""Laws of the tail masses 1 = H_0 >= H_1 >= ... >= 0.

Every model is described through its residual fractions W_k = H_k / H_{k-1}.
Beta laws follow the density (1 - s)^(a-1) s^(b-1) / B(a, b) on [0, 1],
so ``Beta(a, b)`` puts first parameter ``a`` on 1 - W:
E[(1-W)^i W^j] = (a)_i (b)_j / (a+b)_{i+j}.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import special

from .errors import GuardViolation, ModelExhausted, ParseError
from .rng import RandomStream

MAX_BLOCKS = 10**6


def log_rising(x, m):
    """log of the rising factorial (x)_m = x (x+1) ... (x+m-1)."""
    return special.gammaln(np.add(x, m)) - special.gammaln(x)


# --- residual-fraction laws -------------------------------------------------

@dataclass(frozen=True)
class PointMass:
    w: float

    def __post_init__(self):
        if not 0.0 <= self.w <= 1.0:
            raise ValueError(f"point mass must lie in [0, 1], got {self.w}")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, float(self.w))

    def describe(self) -> str:
        return f"point({self.w!r})"


@dataclass(frozen=True)
class Beta:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"beta parameters must be positive, got ({self.a}, {self.b})")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        # numpy's beta(p, q) has density s^(p-1) (1-s)^(q-1)
        return rng.beta(self.b, self.a, size)

    def describe(self) -> str:
        if self.a == 1 and self.b == 1:
            return "uniform"
        return f"beta({self.a!r},{self.b!r})"


def Uniform() -> Beta:
    return Beta(1.0, 1.0)


WDistribution = PointMass | Beta


# --- frequency models -------------------------------------------------------

@dataclass(frozen=True)
class Affine:
    """k -> c0 + c1 * k."""

    c0: float
    c1: float = 0.0

    def __call__(self, k):
        return self.c0 + self.c1 * k

    def describe(self) -> str:
        if self.c1 == 0:
            return repr(self.c0)
        sign = "+" if self.c1 >= 0 else "-"
        return f"{self.c0!r}{sign}{abs(self.c1)!r}k"


class FrequencyModel:
    """Base class; subclasses supply ``draw_w`` and ``describe``."""

    #: True when W_1, W_2, ... are independent (beta or point-mass) laws
    independent = False

    def draw_w(self, rng: np.random.Generator, k: int, size: int) -> np.ndarray:
        raise NotImplementedError

    def w_law(self, k: int) -> WDistribution:
        """Law of W_k, for models with independent residual fractions."""
        raise TypeError(f"{type(self).__name__} has no independent residual fractions")

    def describe(self) -> str:
        raise NotImplementedError

    def h_batch(self, rng: np.random.Generator, reps: int, k: int) -> np.ndarray:
        """(reps, k) array of H_1..H_k, one independent path per row."""
        _check_blocks(k)
        w = np.empty((reps, k))
        for j in range(1, k + 1):
            w[:, j - 1] = self.draw_w(rng, j, reps)
        return np.cumprod(w, axis=1)

    def path(self, stream: RandomStream, max_blocks: int = MAX_BLOCKS) -> "HPath":
        return HPath(self, stream, max_blocks)


def _check_blocks(k, limit=MAX_BLOCKS):
    if k > limit:
        raise GuardViolation("max-blocks", f"requested {k} blocks, limit is {limit}")


class FixedH(FrequencyModel):
    """Deterministic H with a geometric tail (``ratio``) or a hard stop (``ratio=None``).

    Values may be Fractions; :meth:`H` then returns exact rationals.
    """

    def __init__(self, values: Sequence, ratio=None):
        values = tuple(values)
        if not values:
            raise ValueError("FixedH needs at least one value")
        if not all(0 < v <= 1 for v in values) or any(
                b >= a for a, b in zip(values, values[1:])):
            raise ValueError(f"FixedH values must be strictly decreasing in (0, 1]: {values}")
        if ratio is not None and not 0 <= ratio < 1:
            raise ValueError(f"geometric ratio must lie in [0, 1), got {ratio}")
        self.values = values
        self.ratio = ratio

    def H(self, k: int):
        if k == 0:
            return Fraction(1) if isinstance(self.values[0], Fraction) else 1.0
        if k <= len(self.values):
            return self.values[k - 1]
        if self.ratio is None:
            raise ModelExhausted(f"FixedH has {len(self.values)} values, H_{k} requested")
        return self.values[-1] * self.ratio ** (k - len(self.values))

    def prefix(self, k: int) -> list:
        return [self.H(j) for j in range(1, k + 1)]

    def draw_w(self, rng, k, size):
        prev = float(self.H(k - 1))
        w = float(self.H(k)) / prev if prev > 0 else 0.0
        return np.full(size, w)

    def h_batch(self, rng, reps, k):
        _check_blocks(k)
        return np.tile(np.array([float(h) for h in self.prefix(k)]), (reps, 1))

    def describe(self) -> str:
        vals = ",".join(repr(float(v)) for v in self.values)
        tail = "stop" if self.ratio is None else f"geom={float(self.ratio)!r}"
        return f"fixed:{vals};{tail}"

    def __eq__(self, other):
        return isinstance(other, FixedH) and (self.values, self.ratio) == (other.values, other.ratio)

    def __hash__(self):
        return hash((self.values, self.ratio))

    def __repr__(self):
        return f"FixedH({self.values!r}, ratio={self.ratio!r})"


@dataclass(frozen=True)
class IIDStick(FrequencyModel):
    w: WDistribution

    independent = True

    def draw_w(self, rng, k, size):
        return self.w.sample(rng, size)

    def w_law(self, k):
        return self.w

    def describe(self) -> str:
        return f"iid:{self.w.describe()}"


@dataclass(frozen=True)
class IndepBeta(FrequencyModel):
    """Independent W_k ~ Beta(a_k, b_k) (density convention of this module)."""

    a: Affine
    b: Affine

    independent = True

    def __post_init__(self):
        for name in ("a", "b"):
            v = getattr(self, name)
            if not isinstance(v, Affine):
                object.__setattr__(self, name, Affine(float(v)))
        # positive for every k >= 1
        for f in (self.a, self.b):
            if f(1) <= 0 or f.c1 < 0:
                raise ValueError(f"beta parameter {f.describe()} is not positive for all k")

    def w_law(self, k):
        return Beta(self.a(k), self.b(k))

    def draw_w(self, rng, k, size):
        return self.w_law(k).sample(rng, size)

    def describe(self) -> str:
        return f"indep-beta:a={self.a.describe()},b={self.b.describe()}"


@dataclass(frozen=True)
class TwoParameter(FrequencyModel):
    """Ewens-Pitman stick-breaking: 1 - W_k ~ standard Beta(1 - alpha, theta + k alpha).

    In this module's convention that is a_k = 1 - alpha, b_k = theta + k alpha.
    """

    alpha: float
    theta: float

    independent = True

    def __post_init__(self):
        if not (0 <= self.alpha < 1 and self.theta > -self.alpha):
            raise ValueError(
                f"need 0 <= alpha < 1 and theta > -alpha, got ({self.alpha}, {self.theta})")

    def as_indep_beta(self) -> IndepBeta:
        return IndepBeta(Affine(1 - self.alpha), Affine(self.theta, self.alpha))

    def w_law(self, k):
        return Beta(1 - self.alpha, self.theta + k * self.alpha)

    def draw_w(self, rng, k, size):
        return self.w_law(k).sample(rng, size)

    def describe(self) -> str:
        return f"gem:{self.alpha!r},{self.theta!r}"


class HPath:
    """One lazily extended realisation of H_1, H_2, ...

    Residual fractions are drawn one index at a time from the path's own
    stream, so the values already realised never depend on how far the
    path is later extended.
    """

    def __init__(self, model: FrequencyModel, stream: RandomStream, max_blocks: int = MAX_BLOCKS):
        self.model = model
        self.stream = stream
        self.max_blocks = max_blocks
        self._h = [1.0]

    def __len__(self):
        return len(self._h) - 1

    def H(self, k: int) -> float:
        self.extend(k)
        return self._h[k]

    def extend(self, k: int) -> None:
        if k > self.max_blocks:
            raise GuardViolation("max-blocks", f"requested H_{k}, limit is {self.max_blocks}")
        model = self.model
        while len(self._h) <= k:
            j = len(self._h)
            if isinstance(model, FixedH):
                self._h.append(float(model.H(j)))
            else:
                self._h.append(self._h[-1] * float(model.draw_w(self.stream.rng, j, 1)[0]))

    def prefix(self, k: int) -> list[float]:
        self.extend(k)
        return self._h[1:k + 1]


def draw_H(model: FrequencyModel, k: int, stream: RandomStream) -> list[float]:
    """H_1..H_k of a fresh path on ``stream``; use :meth:`FrequencyModel.path` to extend."""
    return model.path(stream).prefix(k)


def log_moments(model: FrequencyModel) -> tuple[float, float]:
    """(E[-log W], Var[-log W]) for an iid stick-breaking model."""
    if not isinstance(model, IIDStick):
        raise TypeError("log moments are defined for iid stick-breaking models only")
    w = model.w
    if isinstance(w, PointMass):
        if w.w == 0:
            raise ValueError("PointMass(0) has infinite logarithmic moments")
        return -math.log(w.w), 0.0
    # -log W for W ~ standard Beta(b, a)
    mu = float(special.digamma(w.a + w.b) - special.digamma(w.b))
    var = float(special.polygamma(1, w.b) - special.polygamma(1, w.a + w.b))
    return mu, var


# --- CLI grammar -------------------------------------------------------------

_NUM = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_AFFINE = re.compile(rf"^\s*(?:(?P<c0>{_NUM})\s*)?(?:(?P<sign>[+-])?\s*(?P<c1>{_NUM})?\s*\*?\s*k)?\s*$")


def _parse_affine(text, token, pos) -> Affine:
    m = _AFFINE.match(token)
    if not m or not token.strip():
        raise ParseError(text, pos, f"bad affine form {token!r}")
    c0 = float(m["c0"]) if m["c0"] else 0.0
    c1 = 0.0
    if "k" in token:
        c1 = float(m["c1"]) if m["c1"] else 1.0
        if m["sign"] == "-":
            c1 = -c1
    return Affine(c0, c1)


def _float(text, token, pos) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(text, pos, f"bad number {token!r}") from None


def parse_model(text: str) -> FrequencyModel:
    """Parse ``fixed:...``, ``iid:...``, ``indep-beta:...`` or ``gem:...``."""
    kind, sep, body = text.partition(":")
    if not sep:
        raise ParseError(text, len(text), "expected '<kind>:<parameters>'")
    off = len(kind) + 1
    try:
        if kind == "fixed":
            vals, _, tail = body.partition(";")
            values = [_float(text, v, off) for v in vals.split(",")]
            tail = tail.strip()
            if tail in ("", "stop"):
                return FixedH(values)
            if not tail.startswith("geom="):
                raise ParseError(text, off + len(vals) + 1, "tail must be 'geom=<ratio>' or 'stop'")
            return FixedH(values, _float(text, tail[5:], off + len(vals) + 6))
        if kind == "iid":
            body = body.strip()
            if body == "uniform":
                return IIDStick(Uniform())
            m = re.fullmatch(rf"beta\(\s*({_NUM})\s*,\s*({_NUM})\s*\)", body)
            if m:
                return IIDStick(Beta(float(m[1]), float(m[2])))
            m = re.fullmatch(rf"point\(\s*({_NUM})\s*\)", body)
            if m:
                return IIDStick(PointMass(float(m[1])))
            raise ParseError(text, off, "iid law must be uniform, beta(a,b) or point(w)")
        if kind == "indep-beta":
            parts = {}
            m = re.fullmatch(r"\s*a=(?P<a>[^,]+),\s*b=(?P<b>[^,]+)", body)
            if not m:
                raise ParseError(text, off, "expected 'a=<affine>,b=<affine>'")
            parts["a"] = _parse_affine(text, m["a"], off + m.start("a"))
            parts["b"] = _parse_affine(text, m["b"], off + m.start("b"))
            return IndepBeta(parts["a"], parts["b"])
        if kind == "gem":
            items = body.split(",")
            if len(items) != 2:
                raise ParseError(text, off, "expected 'gem:<alpha>,<theta>'")
            return TwoParameter(_float(text, items[0], off),
                                _float(text, items[1], off + len(items[0]) + 1))
    except ParseError:
        raise
    except ValueError as exc:
        raise ParseError(text, off, str(exc)) from None
    raise ParseError(text, 0, f"unknown model kind {kind!r}")

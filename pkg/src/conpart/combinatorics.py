"""Constraint sequences, constrained compositions and their counts.

Compositions are plain tuples of positive ints.  All counts are exact
Python integers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import accumulate
from typing import Iterator, Sequence

from .errors import GuardViolation, ParseError
from .partition import SetPartition

ENUMERATION_LIMIT = 12


@dataclass(frozen=True)
class ConstraintSeq:
    """The sequence rho = prefix followed by ``cycle`` repeated forever.

    Entries must be positive integers unless ``real=True``, which only the
    continuous-time sampler accepts.
    """

    prefix: tuple = ()
    cycle: tuple = (1,)
    real: bool = False

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(self.prefix))
        object.__setattr__(self, "cycle", tuple(self.cycle))
        if not self.cycle:
            raise ValueError("rho cycle must be nonempty")
        for v in self.prefix + self.cycle:
            if self.real:
                if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                    raise ValueError(f"rho entries must be positive reals, got {v!r}")
            elif not (isinstance(v, int) and not isinstance(v, bool) and v >= 1):
                raise ValueError(f"rho entries must be integers >= 1, got {v!r}")

    @classmethod
    def constant(cls, value=1) -> "ConstraintSeq":
        return cls((), (value,))

    @classmethod
    def parse(cls, text: str, real: bool = False) -> "ConstraintSeq":
        """Parse ``"p1,p2,...;c1,c2,..."``, e.g. ``"1,2;1"`` or ``";1"``."""
        if text.count(";") != 1:
            pos = text.find(";", text.find(";") + 1) if ";" in text else len(text)
            raise ParseError(text, pos, "expected exactly one ';' separating prefix and cycle")
        head, tail = text.split(";")
        prefix = _parse_numbers(text, head, 0, real, allow_empty=True)
        cycle = _parse_numbers(text, tail, len(head) + 1, real, allow_empty=False)
        try:
            return cls(prefix, cycle, real=real)
        except ValueError as exc:
            raise ParseError(text, 0, str(exc)) from None

    def __call__(self, k: int):
        """rho_k for k >= 1."""
        if k < 1:
            raise IndexError("rho is indexed from 1")
        if k <= len(self.prefix):
            return self.prefix[k - 1]
        return self.cycle[(k - 1 - len(self.prefix)) % len(self.cycle)]

    def take(self, k: int) -> tuple:
        return tuple(self(j) for j in range(1, k + 1))

    def partial_sum(self, k: int):
        """rho_1 + ... + rho_k without materialising k terms."""
        p = len(self.prefix)
        if k <= p:
            return sum(self.prefix[:k])
        q, r = divmod(k - p, len(self.cycle))
        return sum(self.prefix) + q * sum(self.cycle) + sum(self.cycle[:r])

    def __str__(self) -> str:
        def fmt(vals):
            return ",".join(_fmt_number(v) for v in vals)

        return f"{fmt(self.prefix)};{fmt(self.cycle)}"


def _fmt_number(v) -> str:
    if isinstance(v, float) and v.is_integer():
        return repr(v)
    return str(v)


def _parse_numbers(text, chunk, offset, real, allow_empty):
    if chunk.strip() == "":
        if allow_empty:
            return ()
        raise ParseError(text, offset, "empty cycle")
    out = []
    pos = offset
    for item in chunk.split(","):
        token = item.strip()
        try:
            value = float(token) if real else int(token)
        except ValueError:
            raise ParseError(text, pos, f"bad number {token!r}") from None
        if not (value > 0):
            raise ParseError(text, pos, f"rho entries must be positive, got {token!r}")
        out.append(value)
        pos += len(item) + 1
    return tuple(out)


# --- compositions -----------------------------------------------------------

def tail_sums(lam: Sequence[int]) -> list[int]:
    """Lambda_j = lam_j + ... + lam_l, for j = 1..l (returned 0-based)."""
    return list(accumulate(reversed(lam)))[::-1]


def is_constrained(lam: Sequence[int], rho: ConstraintSeq) -> bool:
    if any(int(p) != p or p < 1 for p in lam):
        return False
    return all(lam[j] >= rho(j + 1) for j in range(len(lam) - 1))


def _require_constrained(lam, rho, name="composition"):
    if not lam or not is_constrained(lam, rho):
        raise ValueError(f"{name} {tuple(lam)} is not constrained for rho={rho}")


def compositions(n: int) -> Iterator[tuple[int, ...]]:
    """All compositions of n, in lexicographic order."""
    if n == 0:
        yield ()
        return
    for first in range(1, n + 1):
        for rest in compositions(n - first):
            yield (first,) + rest


def constrained_compositions(n: int, rho: ConstraintSeq) -> Iterator[tuple[int, ...]]:
    def rec(remaining, j):
        # the remaining mass may always close as the final part
        yield (remaining,)
        for part in range(rho(j), remaining):
            for rest in rec(remaining - part, j + 1):
                yield (part,) + rest

    if n >= 1:
        yield from rec(n, 1)


def binom(n: int, k: int) -> int:
    """Binomial coefficient, with C(-i, -j) = 1(i = j) for negative arguments."""
    if n < 0:
        return 1 if (k < 0 and n == k) else 0
    if k < 0 or k > n:
        return 0
    return math.comb(n, k)


def d_lambda(lam: Sequence[int], rho: ConstraintSeq) -> int:
    """Number of constrained partitions of [|lam|] with shape ``lam``."""
    _require_constrained(lam, rho)
    tails = tail_sums(lam)
    out = 1
    for j in range(len(lam) - 1):
        r = rho(j + 1)
        out *= binom(tails[j] - r, lam[j] - r)
    return out


def d_lambda_mu(lam: Sequence[int], mu: Sequence[int], rho: ConstraintSeq) -> int:
    """Extensions of a fixed shape-``lam`` partition of [|lam|] to shape ``mu``.

    Counts constrained partitions of [|mu|] with shape ``mu`` whose
    restriction to [|lam|] is one given partition of shape ``lam``.
    """
    _require_constrained(lam, rho, "small shape")
    _require_constrained(mu, rho, "large shape")
    l, k = len(lam), len(mu)
    if sum(lam) > sum(mu):
        raise ValueError(f"|lam|={sum(lam)} exceeds |mu|={sum(mu)}")
    if k < l:
        raise ValueError(f"mu has {k} parts, fewer than the {l} of lam")
    big = tail_sums(mu)
    small = tail_sums(lam)
    out = 1
    for j in range(l - 1):
        out *= binom(big[j] - small[j], mu[j] - lam[j])
    r = rho(l)
    out *= binom(big[l - 1] - small[l - 1] - max(r - lam[l - 1], 0),
                 mu[l - 1] - max(r, lam[l - 1]))
    for j in range(l, k - 1):
        r = rho(j + 1)
        out *= binom(big[j] - r, mu[j] - r)
    return out


def enumerate_partitions(n: int, rho: ConstraintSeq) -> list[SetPartition]:
    """Every constrained partition of [n], by depth-first growth.

    A branch is cut as soon as its prefix breaks the constraint, which is
    safe because restrictions of constrained partitions stay constrained.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if n > ENUMERATION_LIMIT:
        raise GuardViolation("enumeration-size", f"n={n} exceeds {ENUMERATION_LIMIT}")
    out = []
    labels = [1]
    counts = [0, 1]

    def rec(m):
        if m == n:
            out.append(SetPartition(labels))
            return
        blocks = len(counts) - 1
        options = list(range(1, blocks + 1))
        if counts[blocks] >= rho(blocks):
            options.append(blocks + 1)
        for b in options:
            if b > blocks:
                counts.append(0)
            counts[b] += 1
            labels.append(b)
            rec(m + 1)
            labels.pop()
            counts[b] -= 1
            if b > blocks:
                counts.pop()

    rec(1)
    return out

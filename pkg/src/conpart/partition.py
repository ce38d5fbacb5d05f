"""Finite constrained partitions stored as flat block-label arrays."""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import ParseError


class SetPartition:
    """A partition of [n] given by labels[i] = block of element i+1.

    Blocks are numbered from 1 in order of their least elements, so a valid
    label array is a restricted growth string.  Instances are immutable.
    """

    __slots__ = ("labels", "_key")

    def __init__(self, labels: Iterable[int]):
        arr = np.array(labels, dtype=np.int64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("labels must be a nonempty 1-d sequence")
        arr.flags.writeable = False
        self.labels = arr
        self._key = None

    @classmethod
    def from_blocks(cls, blocks: Sequence[Iterable[int]]) -> "SetPartition":
        blocks = [sorted(b) for b in map(list, blocks) if b]
        n = sum(len(b) for b in blocks)
        labels = np.zeros(n, dtype=np.int64)
        for k, block in enumerate(sorted(blocks, key=min), start=1):
            for x in block:
                if not 1 <= x <= n or labels[x - 1]:
                    raise ValueError(f"blocks do not partition [1..{n}]")
                labels[x - 1] = k
        return cls(labels)

    @classmethod
    def parse(cls, text: str) -> "SetPartition":
        """Inverse of :meth:`__str__`: ``{1,3,5}|{2,4,6}|{7,8}``."""
        blocks = []
        pos = 0
        for chunk in text.split("|"):
            body = chunk.strip()
            if not (body.startswith("{") and body.endswith("}")):
                raise ParseError(text, pos, "block must look like {a,b,...}")
            try:
                blocks.append([int(x) for x in body[1:-1].split(",")])
            except ValueError:
                raise ParseError(text, pos, "non-integer element") from None
            pos += len(chunk) + 1
        try:
            return cls.from_blocks(blocks)
        except ValueError as exc:
            raise ParseError(text, 0, str(exc)) from None

    @property
    def n(self) -> int:
        return int(self.labels.size)

    def blocks(self) -> list[list[int]]:
        order = np.argsort(self.labels, kind="stable")
        sizes = np.bincount(self.labels)[1:]
        elems = (order + 1).tolist()
        out, start = [], 0
        for s in sizes.tolist():
            out.append(elems[start:start + s])
            start += s
        return out

    def key(self) -> bytes:
        if self._key is None:
            self._key = self.labels.tobytes()
        return self._key

    def __eq__(self, other) -> bool:
        return isinstance(other, SetPartition) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def __str__(self) -> str:
        return "|".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks())

    def __repr__(self) -> str:
        return f"SetPartition({self})"


def _is_growth_string(labels: np.ndarray) -> bool:
    if labels.min() < 1 or labels[0] != 1:
        return False
    running_max = np.maximum.accumulate(labels)
    # each label is at most one above everything seen before it
    return bool(np.all(labels[1:] <= running_max[:-1] + 1))


def validate(pi: SetPartition, rho) -> bool:
    """Min-ordered blocks, and the rho_k-th element of B_k precedes min B_{k+1}."""
    labels = pi.labels
    if not _is_growth_string(labels):
        return False
    nblocks = int(labels.max())
    if nblocks == 1:
        return True
    _, first = np.unique(labels, return_index=True)
    first = np.concatenate(([-1], first))
    order = np.argsort(labels, kind="stable")
    sizes = np.bincount(labels, minlength=nblocks + 1)
    starts = np.concatenate(([0], np.cumsum(sizes[1:])))
    for k in range(1, nblocks):
        r = rho(k)
        if sizes[k] < r:
            return False
        if order[starts[k - 1] + r - 1] >= first[k + 1]:
            return False
    return True


def restrict(pi: SetPartition, m: int) -> SetPartition:
    if not 1 <= m <= pi.n:
        raise ValueError(f"cannot restrict a partition of [{pi.n}] to [{m}]")
    return SetPartition(pi.labels[:m])


def shape(pi: SetPartition) -> tuple[int, ...]:
    return tuple(np.bincount(pi.labels)[1:].tolist())


def count_blocks(pi: SetPartition) -> int:
    return int(pi.labels.max())


def formation_sequence(pi: SetPartition, rho) -> list[int]:
    """rho_k-th least element of every block that already holds rho_k elements."""
    out = []
    for k, block in enumerate(pi.blocks(), start=1):
        r = rho(k)
        if len(block) >= r:
            out.append(block[r - 1])
    return out

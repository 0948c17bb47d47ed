"""Finite product trees, their basic clopen sets and the prefix ultrametric.

Leaves of ``prod_i range(k_i)`` are numbered in lexicographic order, so the
basic open set ``O_t`` of a path ``t`` is always a contiguous block of leaf
indices.  Point sets are stored as integer bitmasks over those indices.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import InvalidPath, SpaceTooLarge

MAX_LEAVES = 2**20

Path = tuple[int, ...]


@dataclass(frozen=True)
class ProductTreeSpace:
    arities: tuple[int, ...]
    _strides: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        arities = tuple(int(k) for k in self.arities)
        if not arities:
            raise ValueError("a product tree needs depth >= 1")
        if any(k < 1 for k in arities):
            raise ValueError(f"arities must be positive, got {arities}")
        n = math.prod(arities)
        if n > MAX_LEAVES:
            raise SpaceTooLarge(f"{n} leaves exceeds the limit of {MAX_LEAVES}")
        strides = []
        acc = 1
        for k in reversed(arities):
            strides.append(acc)
            acc *= k
        object.__setattr__(self, "arities", arities)
        object.__setattr__(self, "_strides", tuple(reversed(strides)))

    @property
    def depth(self) -> int:
        return len(self.arities)

    @property
    def n_leaves(self) -> int:
        return self._strides[0] * self.arities[0]

    @property
    def full_mask(self) -> int:
        return (1 << self.n_leaves) - 1

    def validate_path(self, t: Sequence[int]) -> Path:
        t = tuple(int(c) for c in t)
        if len(t) > self.depth:
            raise InvalidPath(f"path {t} longer than depth {self.depth}")
        for i, c in enumerate(t):
            if not 0 <= c < self.arities[i]:
                raise InvalidPath(f"coordinate {c} at level {i} out of range(0, {self.arities[i]})")
        return t

    def leaf_index(self, leaf: Sequence[int]) -> int:
        leaf = self.validate_path(leaf)
        if len(leaf) != self.depth:
            raise InvalidPath(f"{leaf} is not a leaf of depth {self.depth}")
        return sum(c * s for c, s in zip(leaf, self._strides))

    def leaf_at(self, index: int) -> Path:
        out = []
        for s, k in zip(self._strides, self.arities):
            out.append((index // s) % k)
        return tuple(out)

    def block(self, t: Sequence[int]) -> tuple[int, int]:
        """Half-open index range ``[lo, hi)`` of the leaves extending ``t``."""
        t = self.validate_path(t)
        lo = sum(c * s for c, s in zip(t, self._strides))
        width = self._strides[len(t) - 1] if t else self.n_leaves
        return lo, lo + width

    def path_mask(self, t: Sequence[int]) -> int:
        lo, hi = self.block(t)
        return ((1 << (hi - lo)) - 1) << lo

    def children(self, t: Sequence[int]) -> list[Path]:
        t = tuple(t)
        if len(t) >= self.depth:
            return []
        return [t + (c,) for c in range(self.arities[len(t)])]

    def nodes(self, max_len: int | None = None) -> Iterator[Path]:
        """All paths in depth-first lexicographic order (root first)."""
        top = self.depth if max_len is None else max_len

        def walk(t):
            yield t
            if len(t) < top:
                for c in self.children(t):
                    yield from walk(c)

        yield from walk(())

    def format_leaf(self, leaf: Sequence[int]) -> str:
        if all(k <= 10 for k in self.arities):
            return "".join(str(c) for c in leaf)
        return ".".join(str(c) for c in leaf)

    def format_path(self, t: Sequence[int]) -> str:
        return self.format_leaf(t) if t else "()"

    def parse_path(self, token: str) -> Path:
        token = token.strip()
        if token in ("", "()", "-"):
            return ()
        try:
            if "." in token:
                parts = [int(x) for x in token.split(".")]
            elif all(k <= 10 for k in self.arities):
                parts = [int(ch) for ch in token]
            else:
                parts = [int(token)]
        except ValueError:
            raise InvalidPath(f"cannot read {token!r} as a path") from None
        return self.validate_path(parts)


def mask_bits(mask: int, n: int) -> np.ndarray:
    raw = np.frombuffer(mask.to_bytes((n + 7) // 8 or 1, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:n]


def all_mask_bits(n: int) -> np.ndarray:
    """``(2**n, n)`` 0/1 matrix; row ``m`` is the indicator of mask ``m``."""
    masks = np.arange(1 << n, dtype=np.int64)
    return ((masks[:, None] >> np.arange(n)) & 1).astype(np.uint8)


def leaves(space: ProductTreeSpace) -> list[Path]:
    return list(itertools.product(*(range(k) for k in space.arities)))


@dataclass(frozen=True)
class PointSet:
    """A set of leaves, stored as a bitmask in lexicographic leaf order."""

    space: ProductTreeSpace
    mask: int = 0

    def __post_init__(self):
        if self.mask < 0 or self.mask >> self.space.n_leaves:
            raise ValueError("mask has bits outside the space")

    @classmethod
    def empty(cls, space):
        return cls(space, 0)

    @classmethod
    def full(cls, space):
        return cls(space, space.full_mask)

    @classmethod
    def from_leaves(cls, space, leaves: Iterable[Sequence[int]]):
        mask = 0
        for leaf in leaves:
            mask |= 1 << space.leaf_index(leaf)
        return cls(space, mask)

    @classmethod
    def from_indices(cls, space, indices: Iterable[int]):
        mask = 0
        for i in indices:
            if not 0 <= i < space.n_leaves:
                raise InvalidPath(f"leaf index {i} out of range")
            mask |= 1 << int(i)
        return cls(space, mask)

    @classmethod
    def from_paths(cls, space, paths: Iterable[Sequence[int]]):
        mask = 0
        for t in paths:
            mask |= space.path_mask(t)
        return cls(space, mask)

    def indices(self) -> list[int]:
        m, out, i = self.mask, [], 0
        while m:
            if m & 1:
                out.append(i)
            m >>= 1
            i += 1
        return out

    def leaves(self) -> list[Path]:
        return [self.space.leaf_at(i) for i in self.indices()]

    def indicator(self) -> np.ndarray:
        return mask_bits(self.mask, self.space.n_leaves).astype(float)

    def _check(self, other):
        if other.space != self.space:
            raise ValueError("point sets live in different spaces")

    def __or__(self, other):
        self._check(other)
        return PointSet(self.space, self.mask | other.mask)

    def __and__(self, other):
        self._check(other)
        return PointSet(self.space, self.mask & other.mask)

    def __sub__(self, other):
        self._check(other)
        return PointSet(self.space, self.mask & ~other.mask)

    def __le__(self, other):
        self._check(other)
        return self.mask & ~other.mask == 0

    def __ge__(self, other):
        return other <= self

    def __contains__(self, leaf):
        return bool(self.mask >> self.space.leaf_index(leaf) & 1)

    def __len__(self):
        return bin(self.mask).count("1")

    def __iter__(self):
        return iter(self.leaves())

    def __bool__(self):
        return self.mask != 0

    def complement(self):
        return PointSet(self.space, self.space.full_mask & ~self.mask)

    def describe(self) -> list[str]:
        return [self.space.format_leaf(x) for x in self.leaves()]


def basic_open(space: ProductTreeSpace, t: Sequence[int]) -> PointSet:
    return PointSet(space, space.path_mask(t))


def canonical_decomposition(space: ProductTreeSpace, A: PointSet) -> list[Path]:
    """Maximal paths whose basic opens partition ``A``, in lexicographic order."""
    out: list[Path] = []

    def walk(t):
        m = space.path_mask(t)
        hit = A.mask & m
        if not hit:
            return
        if hit == m:
            out.append(t)
            return
        for c in space.children(t):
            walk(c)

    walk(())
    return out


def common_prefix_length(x: Sequence[int], y: Sequence[int]) -> int:
    n = 0
    for a, b in zip(x, y):
        if a != b:
            break
        n += 1
    return n


@dataclass(frozen=True)
class TreeMetric:
    base: Fraction = Fraction(1, 2)

    def __post_init__(self):
        base = Fraction(self.base) if not isinstance(self.base, float) else self.base
        if not 0 < base < 1:
            raise ValueError(f"metric base must lie in (0, 1), got {self.base}")
        object.__setattr__(self, "base", base)

    @classmethod
    def parse(cls, text: str) -> "TreeMetric":
        return cls(Fraction(text.strip()))

    def distance(self, x: Sequence[int], y: Sequence[int]) -> float:
        if tuple(x) == tuple(y):
            return 0.0
        return float(self.base) ** common_prefix_length(x, y)

    def diameter_of_length(self, length: int) -> float:
        return float(self.base) ** length


def diameter(space: ProductTreeSpace, metric: TreeMetric, t: Sequence[int]) -> float:
    t = space.validate_path(t)
    return metric.diameter_of_length(len(t))

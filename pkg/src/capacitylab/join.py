"""Joins of finitely many submeasures.

The join is ``b(A) = inf { sum_m c_m(A_m) : A subset of union_m A_m }``.  On a
finite space with monotone ``c_m`` any cover can be shrunk to a partition of
``A`` without raising a term, so the infimum is a minimum over the
``n^|A|`` assignments of points to submeasures.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInstance, UseGreedy
from .handles import SubmeasureHandle
from .space import PointSet

MAX_EXACT_POINTS = 20
MAX_EXACT_PARTS = 4
ZERO_TOL = 1e-12


@dataclass(frozen=True)
class JoinResult:
    value: float
    parts: tuple[PointSet, ...]
    method: str

    def assignment(self) -> dict[int, int]:
        """Leaf index -> part index."""
        return {i: m for m, part in enumerate(self.parts) for i in part.indices()}

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "method": self.method,
            "parts": [part.describe() for part in self.parts],
        }


def _check(submeasures: Sequence[SubmeasureHandle], A: PointSet):
    if not submeasures:
        raise ValueError("need at least one submeasure")
    for c in submeasures:
        if c.space != A.space:
            raise ValueError(f"submeasure {c.label!r} lives on a different space")


class _Memo:
    def __init__(self, handles):
        self.handles = handles
        self.cache = [dict() for _ in handles]

    def __call__(self, m: int, mask: int) -> float:
        cache = self.cache[m]
        if mask not in cache:
            cache[mask] = self.handles[m].value(mask)
        return cache[mask]

    def total(self, masks) -> float:
        return math.fsum(self(m, mask) for m, mask in enumerate(masks))


def _result(space, masks, memo, method):
    return JoinResult(memo.total(masks), tuple(PointSet(space, mk) for mk in masks), method)


def join_exact(submeasures: Sequence[SubmeasureHandle], A: PointSet) -> JoinResult:
    """Branch and bound over point-to-part assignments.

    The running sum of ``c_m`` over the partial parts is a lower bound for
    every completion because each ``c_m`` is monotone.
    """
    _check(submeasures, A)
    points = A.indices()
    n = len(submeasures)
    if len(points) > MAX_EXACT_POINTS or n > MAX_EXACT_PARTS:
        raise UseGreedy(f"|A| = {len(points)}, n = {n} exceeds the exact budget "
                        f"({MAX_EXACT_POINTS} points, {MAX_EXACT_PARTS} submeasures)")
    memo = _Memo(submeasures)
    space = A.space
    if not points:
        return JoinResult(0.0, tuple(PointSet.empty(space) for _ in range(n)), "exact")

    start = join_greedy(submeasures, A, iterations=1, seed=0, _memo=memo)
    best_masks = [p.mask for p in start.parts]
    best = memo.total(best_masks)
    masks = [0] * n

    def search(k: int, partial: float):
        nonlocal best, best_masks
        if partial >= best:
            return
        if k == len(points):
            best, best_masks = partial, list(masks)
            return
        bit = 1 << points[k]
        options = []
        for m in range(n):
            old = memo(m, masks[m])
            options.append((memo(m, masks[m] | bit) - old, m))
        options.sort()
        for delta, m in options:
            masks[m] |= bit
            search(k + 1, memo.total(masks))
            masks[m] &= ~bit

    search(0, 0.0)
    return _result(space, best_masks, memo, "exact")


def join_greedy(submeasures: Sequence[SubmeasureHandle], A: PointSet, iterations: int = 20, seed: int = 0,
                _memo: _Memo | None = None) -> JoinResult:
    """Single-point reassignment local search; an upper bound on the join.

    The first start puts all of ``A`` on the cheapest single submeasure,
    later starts are random assignments drawn from ``seed``.
    """
    _check(submeasures, A)
    memo = _memo or _Memo(submeasures)
    space = A.space
    n = len(submeasures)
    points = A.indices()
    if not points:
        return JoinResult(0.0, tuple(PointSet.empty(space) for _ in range(n)), "greedy")
    rng = np.random.default_rng(seed)
    best_masks, best = None, math.inf
    for it in range(max(1, iterations)):
        if it == 0:
            m0 = min(range(n), key=lambda m: memo(m, A.mask))
            assign = [m0] * len(points)
        else:
            assign = [int(x) for x in rng.integers(0, n, size=len(points))]
        masks = [0] * n
        for i, m in zip(points, assign):
            masks[m] |= 1 << i
        current = memo.total(masks)
        improved = True
        while improved:
            improved = False
            for k, i in enumerate(points):
                bit = 1 << i
                src = assign[k]
                for dst in range(n):
                    if dst == src:
                        continue
                    masks[src] &= ~bit
                    masks[dst] |= bit
                    value = memo.total(masks)
                    if value < current - 1e-15:
                        current, assign[k], src, improved = value, dst, dst, True
                    else:
                        masks[dst] &= ~bit
                        masks[src] |= bit
        if current < best:
            best, best_masks = current, list(masks)
    return _result(space, best_masks, memo, "greedy")


def join_table(submeasures: Sequence[SubmeasureHandle]) -> np.ndarray:
    """Join on every subset by min-plus convolution over submasks; spaces up to 16 leaves."""
    space = submeasures[0].space
    n = space.n_leaves
    if n > 16:
        raise UseGreedy("join tables need at most 16 leaves")
    total = 1 << n
    b = np.asarray(submeasures[0].table(), dtype=float)
    for c in submeasures[1:]:
        t = np.asarray(c.table(), dtype=float)
        out = np.empty(total)
        for A in range(total):
            subs = _submasks(A)
            out[A] = np.min(b[subs] + t[A & ~subs])
        b = out
    return b


def _submasks(A: int) -> np.ndarray:
    out = [A]
    S = A
    while S:
        S = (S - 1) & A
        out.append(S)
    return np.array(out, dtype=np.int64)


def join_handle(submeasures: Sequence[SubmeasureHandle], label: str = "") -> SubmeasureHandle:
    """The join as a handle; single sets go through :func:`join_exact`."""
    submeasures = tuple(submeasures)
    if not submeasures:
        raise ValueError("need at least one submeasure")
    space = submeasures[0].space
    cache = []

    def batch(masks):
        if not cache:
            cache.append(join_table(submeasures))
        return cache[0][np.asarray(masks, dtype=np.int64)]

    return SubmeasureHandle(lambda A: join_exact(submeasures, A).value, space,
                            label or "join(" + ",".join(c.label for c in submeasures) + ")",
                            frozenset({"monotone", "subadditive"}), source=submeasures, batch=batch)


def null_decompose(submeasures: Sequence[SubmeasureHandle], A: PointSet) -> tuple[PointSet, ...] | None:
    """A partition of ``A`` with ``c_m(part_m) = 0`` for every ``m``, if one exists."""
    result = join_exact(submeasures, A)
    if result.value <= ZERO_TOL:
        return result.parts
    return None


@dataclass(frozen=True)
class UnionBoundVerdict:
    increase: float
    budget: float
    passed: bool


def union_bound_check(c: SubmeasureHandle, B: PointSet, pairs: Sequence[tuple[PointSet, PointSet]],
                      epsilons: Sequence[float], tol: float = 1e-9) -> UnionBoundVerdict:
    """Check ``c(B_0 | B_1 | ... | B) - c(B) <= sum eps_i``.

    ``pairs`` holds ``(A_i, B_i)`` with ``A_i <= B_i & B`` and
    ``c(B_i) - c(A_i) <= eps_i``; the bound is guaranteed for strongly
    subadditive ``c``.
    """
    if len(pairs) != len(epsilons):
        raise InvalidInstance("one epsilon per pair")
    union = B
    for i, ((a, b), eps) in enumerate(zip(pairs, epsilons)):
        if not a <= (b & B):
            raise InvalidInstance(f"pair {i}: A_i is not inside B_i & B")
        if c(b) - c(a) > eps + tol:
            raise InvalidInstance(f"pair {i}: c(B_i) - c(A_i) = {c(b) - c(a)} exceeds eps_i = {eps}")
        union = union | b
    increase = c(union) - c(B)
    budget = math.fsum(epsilons)
    return UnionBoundVerdict(increase, budget, increase <= budget + tol)

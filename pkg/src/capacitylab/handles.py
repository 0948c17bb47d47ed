"""Uniform ``c(A)`` evaluators over a finite product-tree space."""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .space import PointSet, ProductTreeSpace

PROPERTIES = frozenset({"monotone", "subadditive", "strongly_subadditive", "probability"})


@dataclass(eq=False)
class SubmeasureHandle:
    """Set function on the subsets of ``space``.

    ``declared`` lists properties the caller claims; they are checked by
    the verification suite, never assumed.  ``source`` keeps the object the
    evaluator came from (a tower capacity, a potential problem, a list of
    joined handles) so claim-specific checks can reach it.
    """

    evaluator: Callable[[PointSet], float]
    space: ProductTreeSpace
    label: str = ""
    declared: frozenset = frozenset()
    source: object = None
    batch: Callable[[np.ndarray], np.ndarray] | None = None
    calls: int = field(default=0, init=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    def __post_init__(self):
        self.declared = frozenset(self.declared)
        unknown = self.declared - PROPERTIES
        if unknown:
            raise ValueError(f"unknown declared properties {sorted(unknown)}")

    def __call__(self, A: PointSet) -> float:
        with self._lock:
            self.calls += 1
        return float(self.evaluator(A))

    def value(self, mask: int) -> float:
        return self(PointSet(self.space, mask))

    def table(self) -> np.ndarray:
        """Value on every subset, indexed by mask (not cached on the handle)."""
        n = self.space.n_leaves
        if n > 20:
            raise ValueError("full tables need at most 20 leaves")
        if self.batch is not None:
            with self._lock:
                self.calls += 1 << n
            return np.asarray(self.batch(np.arange(1 << n, dtype=np.int64)), dtype=float)
        return np.array([self.value(m) for m in range(1 << n)])

    # constructors

    @classmethod
    def from_capacity(cls, cap, label: str = "", declared: Iterable[str] = ("monotone", "subadditive", "probability")):
        def batch(masks):
            if len(masks) == 1 << cap.space.n_leaves:
                return cap.table()
            return cap.evaluate_masks(masks)

        return cls(cap, cap.space, label, frozenset(declared), source=cap, batch=batch)

    @classmethod
    def measure(cls, space: ProductTreeSpace, weights: Sequence[float], label: str = ""):
        w = np.asarray(weights, dtype=float)
        if w.shape != (space.n_leaves,) or np.any(w < 0):
            raise ValueError("a measure needs one nonnegative weight per leaf")
        declared = {"monotone", "subadditive", "strongly_subadditive"}
        if abs(w.sum() - 1) <= 1e-12:
            declared.add("probability")

        def batch(masks):
            masks = np.asarray(masks, dtype=np.int64)
            bits = (masks[:, None] >> np.arange(space.n_leaves)) & 1
            return bits @ w

        return cls(lambda A: float(A.indicator() @ w), space, label, frozenset(declared), source=w, batch=batch)

    @classmethod
    def uniform(cls, space: ProductTreeSpace, label: str = "uniform"):
        n = space.n_leaves
        return cls.measure(space, [1.0 / n] * n, label)

    @classmethod
    def point_mass(cls, space: ProductTreeSpace, atoms: PointSet, label: str = ""):
        """``c(A) = 1`` iff ``A`` meets ``atoms``."""

        def evaluator(A):
            return 1.0 if A.mask & atoms.mask else 0.0

        def batch(masks):
            return ((np.asarray(masks, dtype=np.int64) & atoms.mask) != 0).astype(float)

        return cls(evaluator, space, label, frozenset({"monotone", "subadditive"}), source=atoms, batch=batch)

    @classmethod
    def from_table(cls, space: ProductTreeSpace, values: Mapping[int, float], label: str = "", declared: Iterable[str] = ()):
        """Explicit values by mask; unlisted subsets take value 0."""
        table = {int(m): float(v) for m, v in values.items()}

        def evaluator(A):
            return table.get(A.mask, 0.0)

        def batch(masks):
            return np.array([table.get(int(m), 0.0) for m in masks])

        return cls(evaluator, space, label, frozenset(declared), source=dict(table), batch=batch)


def subsets(space: ProductTreeSpace) -> Iterable[PointSet]:
    for m in range(1 << space.n_leaves):
        yield PointSet(space, m)

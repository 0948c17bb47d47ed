"""Good norms, their iteration along a product tree, and the derived capacities.

A norm tower ``[n_0, ..., n_{d-1}]`` on ``X_0 x ... x X_{d-1}`` evaluates a
function on the leaves by collapsing the innermost coordinate first:
``m_j = n_0 * ... * n_j`` with ``(n*m)(f) = n(x -> m(y -> f(x, y)))``.
At finite depth every indicator is a step function, so the capacity of a
set is simply ``m_{d-1}`` applied to its indicator.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import DegenerateCell, SupportViolation
from .space import Path, PointSet, ProductTreeSpace, mask_bits

log = logging.getLogger(__name__)

TOL = 1e-9
DEFAULT_EPSILONS = tuple(2.0**-i for i in range(1, 11))


class GoodNorm:
    """Monotone, absolutely homogeneous norm on ``R^size`` with ``n(1) = 1``.

    Subclasses implement ``reduce``, which collapses the last axis of an
    array of nonnegative values.
    """

    size: int
    strict: bool = True

    def reduce(self, values: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, f) -> float:
        f = np.abs(np.asarray(f, dtype=float))
        if f.shape != (self.size,):
            raise ValueError(f"expected a vector of length {self.size}, got shape {f.shape}")
        return float(self.reduce(f))

    def describe(self) -> str:
        return type(self).__name__


class WeightedP(GoodNorm):
    """``(sum_i w_i |f_i|^p)^(1/p)`` with ``sum w = 1``; ``p = inf`` is the max over the support of ``w``."""

    def __init__(self, weights: Sequence, p: float = 1.0):
        exact = [w if isinstance(w, (Fraction, int)) else None for w in weights]
        self.exact_weights = None if any(e is None for e in exact) else [Fraction(e) for e in exact]
        self.weights = np.asarray([float(w) for w in weights])
        self.size = len(self.weights)
        self.p = float(p)
        if self.size == 0:
            raise ValueError("empty weight vector")
        if self.p < 1:
            raise ValueError(f"exponent must be >= 1, got {p}")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {self.weights.sum()!r}")
        self.strict = bool(np.all(self.weights > 0))
        if not self.strict:
            log.info("weighted norm %s has zero weights: flagged non-strict", self.describe())
        self._support = self.weights > 0

    @classmethod
    def uniform(cls, size: int, p: float = 1.0):
        return cls([Fraction(1, size)] * size, p)

    def reduce(self, values):
        if math.isinf(self.p):
            return values[..., self._support].max(axis=-1)
        if self.p == 1.0:
            return values @ self.weights
        return ((values**self.p) @ self.weights) ** (1.0 / self.p)

    def reduce_exact(self, values: Sequence[Fraction]) -> Fraction:
        if self.exact_weights is None or self.p != 1.0:
            raise ValueError("exact evaluation needs p = 1 and rational weights")
        return sum((w * v for w, v in zip(self.exact_weights, values)), Fraction(0))

    def describe(self):
        p = "inf" if math.isinf(self.p) else f"{self.p:g}"
        w = ",".join(str(e) for e in self.exact_weights) if self.exact_weights else ",".join(f"{x:g}" for x in self.weights)
        return f"wp p={p} w={w}"


class MaxNorm(GoodNorm):
    def __init__(self, size: int):
        if size < 1:
            raise ValueError("size must be positive")
        self.size = size
        # |f| < |g| pointwise forces max|f| < max|g| on a finite set
        self.strict = True

    def reduce(self, values):
        return values.max(axis=-1)

    def describe(self):
        return "max"


class TableNorm(GoodNorm):
    """Norm specified by its values on indicator vectors.

    Off indicators the norm is the covering extension
    ``n(f) = min { sum_S lam_S * table[S] : sum_{S containing x} lam_S >= |f(x)|, lam >= 0 }``,
    the largest monotone seminorm with ``n(chi_S) <= table[S]``.  The table must
    cover every point and extend to ``n(1) = 1``.
    """

    def __init__(self, size: int, table: dict[int, float]):
        self.size = size
        self.table = {int(m): float(v) for m, v in table.items() if m}
        if any(v < 0 for v in self.table.values()):
            raise ValueError("table values must be nonnegative")
        self._masks = sorted(self.table)
        self._cost = np.array([self.table[m] for m in self._masks])
        self._cover = np.array([mask_bits(m, size) for m in self._masks], dtype=float).T
        covered = self._cover.sum(axis=1) > 0
        if not covered.all():
            raise ValueError("every point must belong to some tabulated set")
        one = self(np.ones(size))
        if abs(one - 1.0) > 1e-12:
            raise ValueError(f"covering extension gives n(1) = {one}, not 1")
        self.consistent = all(abs(self(mask_bits(m, size)) - v) <= 1e-12 for m, v in self.table.items())
        # strictness is not implied by a table; checked by exhaustion where it matters
        self.strict = False

    def _solve(self, f):
        if not np.any(f):
            return 0.0
        res = linprog(self._cost, A_ub=-self._cover, b_ub=-f, bounds=(0, None), method="highs")
        if res.status != 0:
            raise RuntimeError(f"covering LP failed: {res.message}")
        return float(res.fun)

    def reduce(self, values):
        flat = values.reshape(-1, self.size)
        out = np.array([self._solve(row) for row in flat])
        return out.reshape(values.shape[:-1])

    def describe(self):
        return f"table[{len(self.table)} sets]"


class IteratedNorm(GoodNorm):
    """``outer * inner`` on ``X x Y``; points are ordered ``x``-major."""

    def __init__(self, outer: GoodNorm, inner: GoodNorm):
        self.outer, self.inner = outer, inner
        self.size = outer.size * inner.size
        self.strict = outer.strict and inner.strict

    def reduce(self, values):
        shaped = values.reshape(values.shape[:-1] + (self.outer.size, self.inner.size))
        return self.outer.reduce(self.inner.reduce(shaped))

    def describe(self):
        return f"({self.outer.describe()})*({self.inner.describe()})"


def iterate(n: GoodNorm, m: GoodNorm) -> IteratedNorm:
    return IteratedNorm(n, m)


def check_good_norm(norm: GoodNorm, trials: int = 200, seed: int = 0, tol: float = 1e-12) -> list[str]:
    """Randomized axiom check; returns a list of violations (empty when clean)."""
    rng = np.random.default_rng(seed)
    problems = []
    one = norm(np.ones(norm.size))
    if abs(one - 1) > tol:
        problems.append(f"n(1) = {one!r}")
    for _ in range(trials):
        f = rng.normal(size=norm.size)
        g = np.abs(f) + rng.uniform(0, 1, size=norm.size)
        h = rng.normal(size=norm.size)
        a = rng.uniform(-3, 3)
        nf, ng, nh = norm(f), norm(g), norm(h)
        if nf > ng + tol:
            problems.append(f"monotonicity: n(f)={nf} > n(g)={ng}")
        if norm.strict and not nf < ng:
            problems.append(f"strictness: n(f)={nf} !< n(g)={ng}")
        if abs(norm(a * f) - abs(a) * nf) > tol * max(1.0, abs(a) * nf) * 10:
            problems.append("homogeneity")
        if norm(f + h) > nf + nh + tol * 10:
            problems.append("triangle inequality")
    return problems


@dataclass(frozen=True)
class NormTower:
    space: ProductTreeSpace
    level_norms: tuple[GoodNorm, ...]

    def __post_init__(self):
        object.__setattr__(self, "level_norms", tuple(self.level_norms))
        if len(self.level_norms) != self.space.depth:
            raise ValueError(f"tower has {len(self.level_norms)} levels, space has depth {self.space.depth}")
        for i, (n, k) in enumerate(zip(self.level_norms, self.space.arities)):
            if n.size != k:
                raise ValueError(f"level {i}: norm on {n.size} points but arity is {k}")

    @property
    def strict(self) -> bool:
        return all(n.strict for n in self.level_norms)

    @property
    def rational(self) -> bool:
        return all(isinstance(n, WeightedP) and n.p == 1.0 and n.exact_weights for n in self.level_norms)

    def partial(self, j: int) -> GoodNorm:
        """``m_j = n_0 * ... * n_j``."""
        norm = self.level_norms[0]
        for n in self.level_norms[1 : j + 1]:
            norm = iterate(norm, n)
        return norm

    def collapse(self, values: np.ndarray, first: int, last: int) -> np.ndarray:
        """Apply ``n_last``, then ``n_{last-1}``, ..., down to ``n_first``.

        ``values`` has trailing axes ``arities[first:last+1]``.
        """
        out = np.abs(values)
        for level in range(last, first - 1, -1):
            out = self.level_norms[level].reduce(out)
        return out

    def describe(self) -> list[str]:
        return [n.describe() for n in self.level_norms]


@dataclass(frozen=True, eq=False)
class DerivedCapacity:
    """``c(A) = k(chi_A)`` for the finite-depth limit norm ``k`` of a tower."""

    tower: NormTower
    _table: list = field(default_factory=list, repr=False)

    @property
    def space(self) -> ProductTreeSpace:
        return self.tower.space

    def __call__(self, A: PointSet) -> float:
        return capacity(self, A)

    def evaluate_masks(self, masks: Sequence[int]) -> np.ndarray:
        space = self.space
        rows = np.array([mask_bits(int(m), space.n_leaves) for m in masks], dtype=float)
        if len(rows) == 0:
            return np.zeros(0)
        return self.tower.collapse(rows.reshape((len(rows),) + space.arities), 0, space.depth - 1)

    def table(self) -> np.ndarray:
        """Capacity of every subset, indexed by mask.  Cached; spaces up to 20 leaves."""
        if not self._table:
            n = self.space.n_leaves
            if n > 20:
                raise ValueError("full capacity table needs at most 20 leaves")
            out = np.empty(1 << n)
            chunk = 1 << 14
            bits = None
            for start in range(0, 1 << n, chunk):
                stop = min(start + chunk, 1 << n)
                masks = np.arange(start, stop, dtype=np.int64)
                bits = ((masks[:, None] >> np.arange(n)) & 1).astype(float)
                out[start:stop] = self.tower.collapse(bits.reshape((-1,) + self.space.arities), 0, self.space.depth - 1)
            self._table.append(out)
        return self._table[0]


def eval_step(tower: NormTower, f, j: int) -> float:
    """Value of the limit norm on a step function depending on ``x|(j+1)``.

    ``f`` is indexed by prefixes of length ``j+1`` (either shaped
    ``arities[:j+1]`` or flat in lexicographic order).
    """
    if not 0 <= j < tower.space.depth:
        raise ValueError(f"level {j} outside 0..{tower.space.depth - 1}")
    shape = tower.space.arities[: j + 1]
    f = np.asarray(f, dtype=float).reshape(shape)
    return float(tower.collapse(f, 0, j))


def refine_step(tower: NormTower, f, j: int) -> np.ndarray:
    """Re-express a level-``j`` step function at level ``j+1``."""
    shape = tower.space.arities[: j + 1]
    f = np.asarray(f, dtype=float).reshape(shape)
    return np.repeat(f[..., None], tower.space.arities[j + 1], axis=-1)


def capacity(cap: DerivedCapacity, A: PointSet) -> float:
    space = cap.space
    if A.space != space:
        raise ValueError("set is not over the tower's space")
    if not A:
        return 0.0
    return eval_step(cap.tower, A.indicator(), space.depth - 1)


def capacity_exact(cap: DerivedCapacity, A: PointSet) -> Fraction:
    """Rational evaluation for towers of ``p = 1`` norms with rational weights."""
    tower = cap.tower
    if not tower.rational:
        raise ValueError("exact mode needs every level to be a rational p=1 weighted norm")
    values = [Fraction(int(b)) for b in mask_bits(A.mask, cap.space.n_leaves)]
    for level in range(cap.space.depth - 1, -1, -1):
        norm = tower.level_norms[level]
        k = norm.size
        values = [norm.reduce_exact(values[i : i + k]) for i in range(0, len(values), k)]
    return values[0]


def _leaf_vector(space: ProductTreeSpace, f) -> np.ndarray:
    if isinstance(f, PointSet):
        return f.indicator()
    f = np.asarray(f, dtype=float).reshape(-1)
    if f.shape != (space.n_leaves,):
        raise ValueError(f"expected {space.n_leaves} leaf values, got {f.size}")
    return f


def relative_norm(tower: NormTower, t: Sequence[int], f) -> float:
    """``k_t(f)``: the limit of ``n_|t| * n_|t|+1 * ...`` on ``f`` restricted to ``O_t``."""
    space = tower.space
    t = space.validate_path(t)
    f = _leaf_vector(space, f)
    lo, hi = space.block(t)
    outside = np.concatenate([f[:lo], f[hi:]])
    if np.any(outside != 0):
        raise SupportViolation(f"function has support outside O_{space.format_path(t)}")
    inner = f[lo:hi]
    if len(t) == space.depth:
        return float(abs(inner[0]))
    return float(tower.collapse(inner.reshape(space.arities[len(t) :]), len(t), space.depth - 1))


def ratio_deviation(tower: NormTower, t: Sequence[int], f) -> float:
    """``|k_t(f) - k(f)/k(O_t)|``."""
    space = tower.space
    t = space.validate_path(t)
    f = _leaf_vector(space, f)
    cell = PointSet(space, space.path_mask(t)).indicator()
    k_cell = eval_step(tower, cell, space.depth - 1)
    if k_cell == 0:
        raise DegenerateCell(f"k(O_{space.format_path(t)}) = 0")
    k_f = eval_step(tower, f, space.depth - 1)
    return abs(relative_norm(tower, t, f) - k_f / k_cell)


def check_ratio_claim(tower: NormTower, t: Sequence[int], f, tol: float = TOL) -> bool:
    return ratio_deviation(tower, t, f) <= tol


def _node_masks(space: ProductTreeSpace) -> tuple[list[Path], list[int]]:
    paths = list(space.nodes())
    return paths, [space.path_mask(t) for t in paths]


def density_set(cap: DerivedCapacity, A: PointSet, epsilon: float) -> PointSet:
    """Leaves ``x`` with ``c(A & O_{x|n}) > (1 - epsilon) c(O_{x|n})`` for some ``n <= depth``."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    return _density_sets(cap, A, [epsilon])[0]


def _density_sets(cap: DerivedCapacity, A: PointSet, epsilons: Sequence[float]) -> list[PointSet]:
    space = cap.space
    paths, masks = _node_masks(space)
    cells = cap.evaluate_masks(masks)
    inside = cap.evaluate_masks([A.mask & m for m in masks])
    out = []
    for eps in epsilons:
        hit = 0
        for m, c_in, c_cell in zip(masks, inside, cells):
            if c_in > (1 - eps) * c_cell:
                hit |= m
        out.append(PointSet(space, hit))
    return out


@dataclass(frozen=True)
class TildeResult:
    tilde: PointSet
    epsilons: tuple[float, ...]
    density_sets: tuple[PointSet, ...]
    stabilized_at: float | None

    @property
    def stabilized(self) -> bool:
        return self.stabilized_at is not None


def tilde_report(cap: DerivedCapacity, A: PointSet, epsilon_grid: Sequence[float] = DEFAULT_EPSILONS) -> TildeResult:
    grid = tuple(float(e) for e in epsilon_grid)
    if not grid:
        raise ValueError("epsilon grid must be nonempty")
    if any(not 0 < e < 1 for e in grid):
        raise ValueError("epsilons must lie in (0, 1)")
    if any(b >= a for a, b in zip(grid, grid[1:])):
        raise ValueError("epsilon grid must be strictly decreasing")
    sets = _density_sets(cap, A, grid)
    running = cap.space.full_mask
    prefix = []
    for s in sets:
        running &= s.mask
        prefix.append(running)
    # smallest epsilon from which the running intersection no longer changes
    stable = None
    if len(prefix) >= 2 and prefix[-1] == prefix[-2]:
        i = len(prefix) - 1
        while i > 0 and prefix[i - 1] == prefix[-1]:
            i -= 1
        stable = grid[i]
    tilde = PointSet(cap.space, A.mask | running)
    return TildeResult(tilde, grid, tuple(sets), stable)


def tilde_steprans(cap: DerivedCapacity, A: PointSet, epsilon_grid: Sequence[float] = DEFAULT_EPSILONS) -> PointSet:
    """``A`` together with the intersection of the density sets over the grid."""
    return tilde_report(cap, A, epsilon_grid).tilde


@dataclass(frozen=True)
class StrongSubaddResult:
    witness: tuple[PointSet, PointSet] | None
    excess: float
    pairs_checked: int
    exhausted: bool


def strong_subadd_search(cap, max_pairs: int | None = None, tol: float = TOL) -> StrongSubaddResult:
    """Scan unordered pairs ``(A, B)`` in mask order for ``c(A|B) + c(A&B) > c(A) + c(B) + tol``.

    ``cap`` is anything with a ``space`` and a ``table()`` of values by mask.
    Returns the first witness found; ``exhausted`` means every pair was checked.
    """
    space = cap.space
    n = space.n_leaves
    if n > 16:
        raise ValueError("exhaustive strong-subadditivity scan needs at most 16 leaves")
    table = np.asarray(cap.table())
    total = 1 << n
    others = np.arange(total, dtype=np.int64)
    checked = 0
    for a in range(total):
        bs = others[a:]
        if max_pairs is not None and checked + len(bs) > max_pairs:
            bs = bs[: max_pairs - checked]
        excess = table[a | bs] + table[a & bs] - table[a] - table[bs]
        checked += len(bs)
        bad = np.nonzero(excess > tol)[0]
        if len(bad):
            b = int(bs[bad[0]])
            return StrongSubaddResult((PointSet(space, a), PointSet(space, b)), float(excess[bad[0]]), checked, False)
        if max_pairs is not None and checked >= max_pairs:
            return StrongSubaddResult(None, 0.0, checked, checked >= total * (total + 1) // 2)
    return StrongSubaddResult(None, 0.0, checked, True)

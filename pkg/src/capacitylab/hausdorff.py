"""Cover weights and ``s``-dimensional Hausdorff premeasures on tree metrics.

On the prefix ultrametric every ball is a basic open set ``O_t`` with
diameter ``base^|t|``, so the scale-``delta`` premeasure of ``A`` is an exact
minimum over covers by basic opens and a bottom-up recursion finds it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .space import Path, PointSet, ProductTreeSpace, TreeMetric

# diameters within this relative slack of delta still count as admissible
_DIAM_SLACK = 1e-12


@dataclass(frozen=True)
class CoverFamily:
    opens: tuple[Path, ...]
    s: float
    max_diam: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "opens", tuple(tuple(t) for t in self.opens))
        if self.s <= 0:
            raise ValueError("s must be positive")


def weight(E: CoverFamily, metric: TreeMetric = TreeMetric()) -> float:
    """``sum diam(O)^s`` over the members of ``E``."""
    b = float(metric.base)
    return math.fsum(b ** (E.s * len(t)) for t in E.opens)


def admissible(metric: TreeMetric, length: int, delta: float) -> bool:
    return metric.diameter_of_length(length) <= delta * (1 + _DIAM_SLACK)


def covers(space: ProductTreeSpace, E: CoverFamily, A: PointSet) -> bool:
    mask = 0
    for t in E.opens:
        mask |= space.path_mask(t)
    return A.mask & ~mask == 0


@dataclass(frozen=True)
class PremeasureResult:
    value: float
    optimal_cover: CoverFamily


def min_weight_cover(space: ProductTreeSpace, metric: TreeMetric, A: PointSet, s: float, delta: float) -> PremeasureResult:
    """Cheapest cover of ``A`` by basic opens of diameter at most ``delta``.

    ``cost(t)`` is 0 when ``O_t`` misses ``A``; otherwise the smaller of
    ``diam(O_t)^s`` (if admissible) and the children's total.  Leaves are
    always admissible so that every set has a cover.  Ties keep the
    coarser node.
    """
    if s <= 0:
        raise ValueError("s must be positive")
    b = float(metric.base)

    def solve(t) -> tuple[float, list[Path]]:
        hit = A.mask & space.path_mask(t)
        if not hit:
            return 0.0, []
        own = b ** (s * len(t))
        if len(t) == space.depth:
            return own, [t]
        total, chosen = 0.0, []
        for c in space.children(t):
            v, cover = solve(c)
            total += v
            chosen.extend(cover)
        if admissible(metric, len(t), delta) and own <= total:
            return own, [t]
        return total, chosen

    _, cover = solve(())
    family = CoverFamily(tuple(cover), s, delta)
    return PremeasureResult(weight(family, metric), family)


def premeasure_profile(space: ProductTreeSpace, metric: TreeMetric, A: PointSet, s: float,
                       delta_sequence: Sequence[float]) -> list[tuple[float, float, int]]:
    """``(delta, value, cover size)`` for each scale of a strictly decreasing sequence."""
    deltas = [float(d) for d in delta_sequence]
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("delta sequence must be strictly decreasing")
    out = []
    for d in deltas:
        r = min_weight_cover(space, metric, A, s, d)
        out.append((d, r.value, len(r.optimal_cover.opens)))
    return out

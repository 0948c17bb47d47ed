"""Property suite for submeasure handles.

Each :class:`PropertySpec` names one law.  Exhaustive checks read the full
table of the handle (at most ``2^10`` sets per operand) and scan every
operand tuple; randomized checks draw operands from a seeded generator and
evaluate the handle on demand.  Failures keep the first witness in scan
order, stored as masks so that :func:`replay_witness` can re-evaluate them
through the bare handle.
"""
from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import CapacityLabError
from .handles import SubmeasureHandle
from .join import _submasks, join_exact, join_greedy, null_decompose
from .potential import PotentialProblem, _verdict
from .space import PointSet, ProductTreeSpace
from .steprans import DerivedCapacity

SCHEMA = "capacitylab.property_report/1"
EXHAUSTIVE_LEAVES = 10
NAMES = (
    "monotone",
    "subadditive",
    "strongly_subadditive",
    "normalized",
    "chain_continuity",
    "ratio_claim",
    "stability_biconditional",
    "join_consistency",
    "gamelemma",
)
GAME_GRID = tuple(k / 8 for k in range(1, 9))


@dataclass(frozen=True)
class PropertySpec:
    name: str
    mode: str = "exhaustive"
    trials: int = 200
    seed: int = 0
    tolerance: float = 1e-9

    def __post_init__(self):
        if self.name not in NAMES:
            raise ValueError(f"unknown property {self.name!r}")
        if self.mode not in ("exhaustive", "randomized"):
            raise ValueError(f"mode must be exhaustive or randomized, got {self.mode!r}")
        if self.trials < 1 or self.tolerance < 0:
            raise ValueError("trials must be positive and tolerance nonnegative")


@dataclass
class Verdict:
    name: str
    status: str  # pass | fail | unknown | skipped
    checked: int = 0
    witness: dict | None = None
    reason: str = ""
    detail: dict = field(default_factory=dict)

    def to_json(self, space: ProductTreeSpace | None = None) -> dict:
        out = {"name": self.name, "status": self.status, "checked": self.checked}
        if self.witness is not None:
            w = dict(self.witness)
            if space is not None:
                w["sets"] = {k: PointSet(space, m).describe() for k, m in w.get("masks", {}).items()}
            out["witness"] = w
        if self.reason:
            out["reason"] = self.reason
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass
class PropertyReport:
    label: str
    space: ProductTreeSpace
    verdicts: list[Verdict]
    wall_time: float = 0.0

    @property
    def totals(self) -> dict[str, int]:
        out = {s: 0 for s in ("pass", "fail", "unknown", "skipped")}
        for v in self.verdicts:
            out[v.status] += 1
        return out

    @property
    def ok(self) -> bool:
        return all(v.status != "fail" for v in self.verdicts)

    def verdict(self, name: str) -> Verdict:
        return next(v for v in self.verdicts if v.name == name)

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "handle": self.label,
            "leaves": self.space.n_leaves,
            "verdicts": [v.to_json(self.space) for v in self.verdicts],
            "totals": self.totals,
        }

    def table(self) -> str:
        rows = [("property", "status", "checked", "note")]
        for v in self.verdicts:
            note = v.reason
            if v.witness is not None:
                note = " ".join(f"{k}={PointSet(self.space, m).describe()}" for k, m in v.witness["masks"].items())
            rows.append((v.name, v.status, str(v.checked), note))
        widths = [max(len(r[i]) for r in rows) for i in range(3)]
        lines = ["  ".join(r[i].ljust(widths[i]) for i in range(3)) + "  " + r[3] for r in rows]
        return "\n".join(lines)


# helpers


def _masks(n: int) -> np.ndarray:
    return np.arange(1 << n, dtype=np.int64)


def _fail(name, checked, masks: dict[str, int], values: dict[str, float], **extra) -> Verdict:
    witness = {"masks": {k: int(m) for k, m in masks.items()}, "values": {k: float(v) for k, v in values.items()}}
    witness.update(extra)
    return Verdict(name, "fail", checked, witness)


def _random_mask(rng, n) -> int:
    bits = rng.integers(0, 2, size=n)
    return int(sum(1 << i for i in range(n) if bits[i]))


def _random_submask(rng, mask, n) -> int:
    return mask & _random_mask(rng, n)


class _Evaluator:
    """Table lookup in exhaustive mode, memoized handle calls otherwise."""

    def __init__(self, handle: SubmeasureHandle, table: np.ndarray | None):
        self.handle, self.table, self.cache = handle, table, {}

    def __call__(self, mask: int) -> float:
        if self.table is not None:
            return float(self.table[mask])
        if mask not in self.cache:
            self.cache[mask] = self.handle.value(mask)
        return self.cache[mask]


# individual checks


def _monotone(spec, handle, ev, table, rng) -> Verdict:
    n = handle.space.n_leaves
    tol = spec.tolerance
    if table is not None:
        masks = _masks(n)
        checked = 0
        # A <= B for all pairs follows from single-point steps
        for i in range(n):
            bit = 1 << i
            lo = masks[(masks & bit) == 0]
            checked += len(lo)
            bad = np.nonzero(table[lo] > table[lo | bit] + tol)[0]
            if len(bad):
                a = int(lo[bad[0]])
                return _fail(spec.name, checked, {"A": a, "B": a | bit}, {"c(A)": table[a], "c(B)": table[a | bit]})
        return Verdict(spec.name, "pass", checked)
    for k in range(spec.trials):
        b = _random_mask(rng, n)
        a = _random_submask(rng, b, n)
        if ev(a) > ev(b) + tol:
            return _fail(spec.name, k + 1, {"A": a, "B": b}, {"c(A)": ev(a), "c(B)": ev(b)})
    return Verdict(spec.name, "unknown", spec.trials, reason="randomized pass")


def _pair_scan(spec, handle, ev, table, rng, excess: Callable, labels) -> Verdict:
    n = handle.space.n_leaves
    tol = spec.tolerance
    if table is not None:
        masks = _masks(n)
        checked = 0
        for a in range(1 << n):
            bs = masks[a:]
            checked += len(bs)
            ex = excess(table, a, bs)
            bad = np.nonzero(ex > tol)[0]
            if len(bad):
                b = int(bs[bad[0]])
                return _fail(spec.name, checked, {"A": a, "B": b}, labels(table, a, b), excess=float(ex[bad[0]]))
        return Verdict(spec.name, "pass", checked)
    for k in range(spec.trials):
        a, b = _random_mask(rng, n), _random_mask(rng, n)
        vals = np.array([ev(a), ev(b), ev(a | b), ev(a & b)])
        lookup = {a: vals[0], b: vals[1], a | b: vals[2], a & b: vals[3]}
        small = _Lookup(lookup)
        ex = float(excess(small, a, np.array([b]))[0])
        if ex > tol:
            return _fail(spec.name, k + 1, {"A": a, "B": b}, labels(small, a, b), excess=ex)
    return Verdict(spec.name, "unknown", spec.trials, reason="randomized pass")


class _Lookup:
    def __init__(self, values):
        self.values = values

    def __getitem__(self, key):
        if isinstance(key, np.ndarray):
            return np.array([self.values[int(k)] for k in key])
        return self.values[int(key)]


def _subadditive(spec, handle, ev, table, rng) -> Verdict:
    return _pair_scan(
        spec, handle, ev, table, rng,
        lambda t, a, bs: t[a | bs] - t[a] - t[bs],
        lambda t, a, b: {"c(A)": t[a], "c(B)": t[b], "c(A|B)": t[a | b]},
    )


def _strongly_subadditive(spec, handle, ev, table, rng) -> Verdict:
    return _pair_scan(
        spec, handle, ev, table, rng,
        lambda t, a, bs: t[a | bs] + t[a & bs] - t[a] - t[bs],
        lambda t, a, b: {"c(A)": t[a], "c(B)": t[b], "c(A|B)": t[a | b], "c(A&B)": t[a & b]},
    )


def _normalized(spec, handle, ev, table, rng) -> Verdict:
    """``c(empty) = 0``; also ``c(X) = 1`` when the handle declares a probability."""
    full = handle.space.full_mask
    if abs(ev(0)) > spec.tolerance:
        return _fail(spec.name, 1, {"A": 0}, {"c(A)": ev(0)})
    if "probability" in handle.declared:
        if abs(ev(full) - 1) > spec.tolerance:
            return _fail(spec.name, 2, {"A": full}, {"c(A)": ev(full)})
        return Verdict(spec.name, "pass", 2)
    return Verdict(spec.name, "pass", 1)


def _chain_continuity(spec, handle, ev, table, rng) -> Verdict:
    """``c(A_k) = max_i c(A_i)`` on increasing chains ``A_0 <= ... <= A_k``."""
    n = handle.space.n_leaves
    tol = spec.tolerance
    if table is not None:
        # the maximum over a chain is attained at its top iff it is for every link,
        # so chains of length two exhaust the condition
        checked = 0
        for b in range(1 << n):
            subs = _submasks(b)
            checked += len(subs)
            top = np.maximum(table[subs], table[b])
            bad = np.nonzero(np.abs(top - table[b]) > tol)[0]
            if len(bad):
                a = int(subs[bad[0]])
                return _fail(spec.name, checked, {"A0": a, "A1": b}, {"c(A0)": table[a], "c(A1)": table[b]})
        return Verdict(spec.name, "pass", checked)
    for k in range(spec.trials):
        order = rng.permutation(n)
        cuts = sorted(int(x) for x in rng.integers(0, n + 1, size=3))
        chain = [sum(1 << int(i) for i in order[:c]) for c in cuts]
        values = [ev(m) for m in chain]
        if abs(max(values) - values[-1]) > tol:
            return _fail(spec.name, k + 1, {f"A{i}": m for i, m in enumerate(chain)},
                         {f"c(A{i})": v for i, v in enumerate(values)})
    return Verdict(spec.name, "unknown", spec.trials, reason="randomized pass")


def _ratio_claim(spec, handle, ev, table, rng) -> Verdict:
    cap = handle.source
    if not isinstance(cap, DerivedCapacity):
        return Verdict(spec.name, "skipped", reason="needs a tower capacity")
    tower, space = cap.tower, cap.space
    n = space.n_leaves
    worst, checked, degenerate = 0.0, 0, 0
    worst_at = None
    for t in space.nodes():
        lo, hi = space.block(t)
        size = hi - lo
        if spec.mode == "exhaustive":
            local = np.arange(1 << size, dtype=np.int64)
        else:
            local = rng.integers(0, 1 << size, size=min(spec.trials, 1 << size)).astype(np.int64)
        bits = ((local[:, None] >> np.arange(size)) & 1).astype(float)
        masks = local << lo
        k_cell = ev(space.path_mask(t))
        if k_cell == 0:
            degenerate += 1
            continue
        k_f = table[masks] if table is not None else np.array([ev(int(m)) for m in masks])
        if len(t) == space.depth:
            k_t = bits[:, 0]
        else:
            k_t = tower.collapse(bits.reshape((-1,) + space.arities[len(t):]), len(t), space.depth - 1)
        dev = np.abs(k_t - k_f / k_cell)
        checked += len(local)
        i = int(np.argmax(dev))
        if dev[i] > worst:
            worst, worst_at = float(dev[i]), (t, int(masks[i]), float(k_t[i]), float(k_f[i]), k_cell)
    detail = {"max_deviation": worst, "degenerate_cells": degenerate}
    if worst > spec.tolerance:
        t, m, kt, kf, kc = worst_at
        return _fail(spec.name, checked, {"f": m}, {"k_t(f)": kt, "k(f)": kf, "k(O_t)": kc},
                     t=space.format_path(t), deviation=worst)
    status = "pass" if spec.mode == "exhaustive" else "unknown"
    return Verdict(spec.name, status, checked, detail=detail)


def _stability(spec, handle, ev, table, rng) -> Verdict:
    problem = handle.source
    if not isinstance(problem, PotentialProblem):
        return Verdict(spec.name, "skipped", reason="needs a potential capacity")
    n = handle.space.n_leaves
    tol = max(spec.tolerance, 10 * problem.tol)
    pairs = []
    if spec.mode == "exhaustive":
        for b in range(1 << n):
            pairs.extend((int(a), b) for a in sorted(_submasks(b)))
    else:
        for _ in range(spec.trials):
            b = _random_mask(rng, n)
            pairs.append((_random_submask(rng, b, n), b))
    for k, (a, b) in enumerate(pairs):
        A = [i for i in range(n) if a >> i & 1]
        B = [i for i in range(n) if b >> i & 1]
        v = _verdict(problem, A, B, tol)
        if not v.ok:
            rest = sum(1 << i for i in set(B) - set(v.tilde_A))
            return _fail(spec.name, k + 1, {"A": a, "B": b, "B-tildeA": rest},
                         {"c(A)": v.c_A, "c(B)": v.c_B, "c(B-tildeA)": v.c_rest},
                         forward_ok=v.forward_ok, backward_ok=v.backward_ok)
    status = "pass" if spec.mode == "exhaustive" else "unknown"
    return Verdict(spec.name, status, len(pairs), detail={"tol": tol})


def _join_consistency(spec, handle, ev, table, rng) -> Verdict:
    """``b <= min c_m``, greedy never below exact, ``b = 0`` iff a null partition exists.

    Monotonicity and subadditivity of the join are separate properties of
    the same handle.
    """
    parts = handle.source
    if not (isinstance(parts, tuple) and parts and all(isinstance(c, SubmeasureHandle) for c in parts)):
        return Verdict(spec.name, "skipped", reason="needs a join handle")
    n = handle.space.n_leaves
    tol = spec.tolerance
    if spec.mode == "exhaustive":
        masks = list(range(1 << n))
    else:
        masks = [_random_mask(rng, n) for _ in range(spec.trials)]
    tables = [c.table() if table is not None else None for c in parts]
    equal = 0
    for k, m in enumerate(masks):
        A = PointSet(handle.space, m)
        b = ev(m)
        exact = join_exact(parts, A)
        cs = [float(t[m]) if t is not None else c.value(m) for c, t in zip(parts, tables)]
        if abs(exact.value - b) > tol:
            return _fail(spec.name, k + 1, {"A": m}, {"b(A)": b, "exact": exact.value}, check="exact")
        if b > min(cs) + tol:
            return _fail(spec.name, k + 1, {"A": m}, {"b(A)": b, "min c_m(A)": min(cs)}, check="below_min")
        greedy = join_greedy(parts, A, iterations=5, seed=spec.seed)
        if greedy.value < exact.value - tol:
            return _fail(spec.name, k + 1, {"A": m}, {"greedy": greedy.value, "exact": exact.value}, check="greedy")
        equal += abs(greedy.value - exact.value) <= tol
        witness = null_decompose(parts, A)
        if (witness is not None) != (b <= tol):
            return _fail(spec.name, k + 1, {"A": m}, {"b(A)": b}, check="null_decompose")
    status = "pass" if spec.mode == "exhaustive" else "unknown"
    return Verdict(spec.name, status, len(masks), detail={"greedy_equal": equal})


def _gamelemma(spec, handle, ev, table, rng) -> Verdict:
    from .games import MAX_LEMMA_LEAVES, verify_gamelemma

    if handle.space.n_leaves > MAX_LEMMA_LEAVES:
        return Verdict(spec.name, "skipped", reason=f"more than {MAX_LEMMA_LEAVES} leaves")
    report = verify_gamelemma(handle.space, handle, GAME_GRID)
    detail = {"boundary_cells": len(report.boundary),
              "boundary_to_I": sum(c[3] == "I" for c in report.boundary),
              "stable": report.stable}
    if not report.stable:
        # the second implication assumes stability; record, do not assert
        A, B = report.instability
        detail["instability"] = {"A": A, "B": B}
        detail["unasserted_backward_violations"] = len(report.backward_violations)
    kinds = ("forward_violations", "backward_violations", "replay_failures") if report.stable else \
        ("forward_violations", "replay_failures")
    for kind in kinds:
        cells = getattr(report, kind)
        if cells:
            B, eps, cb, winner = cells[0]
            return _fail(spec.name, len(report.cells), {"B": B}, {"c(B)": cb, "epsilon": eps},
                         winner=winner, check=kind)
    return Verdict(spec.name, "pass", len(report.cells), detail=detail)


CHECKS = {
    "monotone": _monotone,
    "subadditive": _subadditive,
    "strongly_subadditive": _strongly_subadditive,
    "normalized": _normalized,
    "chain_continuity": _chain_continuity,
    "ratio_claim": _ratio_claim,
    "stability_biconditional": _stability,
    "join_consistency": _join_consistency,
    "gamelemma": _gamelemma,
}
# checks that always need the full table
_TABLE_ONLY = {"gamelemma"}


def default_specs(seed: int = 0) -> list[PropertySpec]:
    return [PropertySpec(name, seed=seed) for name in NAMES]


def run_suite(handle: SubmeasureHandle, space: ProductTreeSpace, specs: Sequence[PropertySpec],
              workers: int | None = None) -> PropertyReport:
    """Evaluate ``specs`` against ``handle``; verdicts come back in spec order."""
    if handle.space != space:
        raise ValueError("handle lives on a different space")
    start = time.perf_counter()
    n = space.n_leaves
    table = None
    if n <= EXHAUSTIVE_LEAVES and any(s.mode == "exhaustive" or s.name in _TABLE_ONLY for s in specs):
        table = np.asarray(handle.table(), dtype=float)

    def one(spec: PropertySpec) -> Verdict:
        exhaustive = spec.mode == "exhaustive" or spec.name in _TABLE_ONLY
        if exhaustive and table is None:
            return Verdict(spec.name, "skipped", reason=f"{1 << n} sets exceeds the exhaustive bound of {1 << EXHAUSTIVE_LEAVES}")
        rng = np.random.default_rng(spec.seed)
        tab = table if exhaustive else None
        try:
            v = CHECKS[spec.name](spec, handle, _Evaluator(handle, tab), tab, rng)
        except (CapacityLabError, ValueError) as exc:
            return Verdict(spec.name, "skipped", reason=f"{type(exc).__name__}: {exc}")
        # only strong subadditivity keeps a three-valued verdict
        if v.status == "unknown" and spec.name != "strongly_subadditive":
            v.status = "pass"
        return v

    workers = workers or int(os.environ.get("CAPACITYLAB_THREADS", "1"))
    if workers > 1 and len(specs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            verdicts = list(pool.map(one, specs))
    else:
        verdicts = [one(s) for s in specs]
    return PropertyReport(handle.label, space, verdicts, time.perf_counter() - start)


def replay_witness(handle: SubmeasureHandle, verdict: Verdict, tolerance: float = 1e-9) -> bool:
    """Re-evaluate a failing witness through the bare handle; true if the violation reproduces."""
    if verdict.status != "fail" or verdict.witness is None:
        return False
    m = verdict.witness["masks"]
    c = handle.value
    name = verdict.name
    if name == "monotone":
        return c(m["A"]) > c(m["B"]) + tolerance and m["A"] & m["B"] == m["A"]
    if name == "subadditive":
        a, b = m["A"], m["B"]
        return c(a | b) > c(a) + c(b) + tolerance
    if name == "strongly_subadditive":
        a, b = m["A"], m["B"]
        return c(a | b) + c(a & b) > c(a) + c(b) + tolerance
    if name == "normalized":
        target = 0.0 if m["A"] == 0 else 1.0
        return abs(c(m["A"]) - target) > tolerance
    if name == "chain_continuity":
        chain = [m[k] for k in sorted(m)]
        values = [c(x) for x in chain]
        return abs(max(values) - values[-1]) > tolerance
    raise ValueError(f"no replay rule for {name!r}")

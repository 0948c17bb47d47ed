"""Finite truncation of the covering game ``H(B, eps)``.

Player I grows a set ``A`` of leaves, Player II fixes one coordinate per
round, and II wins when the finished leaf lies in ``B \\ A``.  Each round I
moves first, then II.  The opening move may be any set with
``c(A) <= eps``.  Afterwards I may only add sets that leave the capacity
unchanged: in the infinite game II may wait before each bit until I's
permitted increments ``2^-k`` are smaller than any positive increment
available on the finite space.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import TooLarge
from .handles import SubmeasureHandle
from .space import Path, PointSet, ProductTreeSpace, canonical_decomposition, leaves

MAX_GAME_LEAVES = 12
MAX_LEMMA_LEAVES = 8
CMP_TOL = 1e-12


@dataclass(frozen=True)
class TruncatedGameH:
    space: ProductTreeSpace
    capacity: SubmeasureHandle
    target_B: PointSet
    budget_epsilon: float
    increment_tol: float = CMP_TOL

    def __post_init__(self):
        if self.budget_epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.capacity.space != self.space or self.target_B.space != self.space:
            raise ValueError("capacity, target and game must share a space")

    @property
    def rounds(self) -> int:
        return self.space.depth


@dataclass
class GameOutcome:
    winner: str
    strategy: dict
    positions_explored: int
    opening_value: float | None = None

    def strategy_json(self, space: ProductTreeSpace) -> dict:
        out = {}
        for key, move in self.strategy.items():
            k, prefix = key[0], key[1]
            name = f"round={k} prefix={space.format_path(prefix)}"
            if len(key) == 3:
                name += f" A={_fmt_set(space, key[2])}"
            out[name] = _fmt_set(space, move) if self.winner == "I" else move
        return out

    def to_json(self, space: ProductTreeSpace) -> dict:
        return {
            "winner": self.winner,
            "positions_explored": self.positions_explored,
            "opening_value": self.opening_value,
            "strategy": self.strategy_json(space),
        }


def _fmt_set(space, mask):
    paths = canonical_decomposition(space, PointSet(space, mask))
    return [space.format_path(t) for t in paths]


class _Solver:
    """Memoized minimax for one capacity table and target; shared across budgets."""

    def __init__(self, space: ProductTreeSpace, table: np.ndarray, B: int, tol: float, ext_cache: dict | None = None):
        self.space, self.table, self.B, self.tol = space, table, B, tol
        self.full = space.full_mask
        self.leaf_idx = {leaf: i for i, leaf in enumerate(leaves(space))}
        self.memo: dict[tuple, bool] = {}
        self.ii_strategy: dict = {}
        self._ext = {} if ext_cache is None else ext_cache
        self._masks = np.arange(self.full + 1, dtype=np.int64)
        self._sizes = np.array([bin(m).count("1") for m in range(self.full + 1)])

    def _by_size(self, masks: np.ndarray) -> list[int]:
        order = np.lexsort((masks, -self._sizes[masks]))
        return [int(m) for m in masks[order]]

    def extensions(self, A: int) -> list[int]:
        """Supersets of ``A`` that do not raise the capacity; larger sets first."""
        moves = self._ext.get(A)
        if moves is None:
            ok = ((self._masks & A) == A) & (self.table <= self.table[A] + self.tol)
            moves = self._ext[A] = self._by_size(self._masks[ok])
        return moves

    def after_II(self, k: int, prefix: Path, A: int) -> bool:
        """I wins from the position where II just fixed coordinate ``k`` (ending in ``prefix``)."""
        if k == self.space.depth - 1:
            leaf = self.leaf_idx[prefix]
            return not (self.B >> leaf & 1) or bool(A >> leaf & 1)
        return self.I_to_move(k + 1, prefix, A)

    def I_to_move(self, k: int, prefix: Path, A: int) -> bool:
        key = (k, prefix, A)
        hit = self.memo.get(key)
        if hit is None:
            hit = any(self.survives(k, prefix, S) for S in self.extensions(A))
            self.memo[key] = hit
        return hit

    def survives(self, k: int, prefix: Path, S: int) -> bool:
        """I has played ``S`` in round ``k``; does I win against every coordinate II can fix?"""
        return all(self.after_II(k, prefix + (j,), S) for j in range(self.space.arities[k]))

    def openings(self, eps: float) -> list[int]:
        return self._by_size(self._masks[self.table <= eps + CMP_TOL])

    def winning_opening(self, eps: float) -> int | None:
        for S in self.openings(eps):
            if self.survives(0, (), S):
                return S
        return None

    def opening_value(self) -> float:
        """Cheapest winning opening; I wins exactly when ``eps`` reaches it."""
        best = np.inf
        for S in range(self.full + 1):
            if self.table[S] < best and self.survives(0, (), S):
                best = float(self.table[S])
        return best

    # strategies

    def I_strategy(self, opening: int) -> dict:
        strategy = {(0, ()): opening}

        def walk(k, prefix, S):
            for j in range(self.space.arities[k]):
                p = prefix + (j,)
                if k + 1 < self.space.depth:
                    move = next(T for T in self.extensions(S) if self.survives(k + 1, p, T))
                    strategy[(k + 1, p)] = move
                    walk(k + 1, p, move)

        walk(0, (), opening)
        return strategy

    def II_strategy(self, eps: float) -> dict:
        """Responses for II at every position reachable against a legal I; grows across budgets."""
        strategy = self.ii_strategy

        def respond(k, prefix, S):
            key = (k, prefix, S)
            if key in strategy:
                return
            j = next(j for j in range(self.space.arities[k]) if not self.after_II(k, prefix + (j,), S))
            strategy[key] = j
            if k + 1 < self.space.depth:
                for T in self.extensions(S):
                    respond(k + 1, prefix + (j,), T)

        for S in self.openings(eps):
            respond(0, (), S)
        return strategy


def _table(handle: SubmeasureHandle) -> np.ndarray:
    return np.asarray(handle.table(), dtype=float)


def solve_minimax(game: TruncatedGameH, with_strategy: bool = True, table: np.ndarray | None = None) -> GameOutcome:
    space = game.space
    if space.n_leaves > MAX_GAME_LEAVES:
        raise TooLarge(f"{space.n_leaves} leaves exceeds the game limit of {MAX_GAME_LEAVES}")
    table = _table(game.capacity) if table is None else table
    solver = _Solver(space, table, game.target_B.mask, game.increment_tol)
    opening = solver.winning_opening(game.budget_epsilon)
    if opening is not None:
        strategy = solver.I_strategy(opening) if with_strategy else {}
        return GameOutcome("I", strategy, len(solver.memo), float(table[opening]))
    strategy = solver.II_strategy(game.budget_epsilon) if with_strategy else {}
    return GameOutcome("II", strategy, len(solver.memo))


def replay(game: TruncatedGameH, outcome: GameOutcome, table: np.ndarray | None = None,
           _cleared: set | None = None, _solver: _Solver | None = None) -> bool:
    """Play the winner's strategy against every counter-line of the loser."""
    space = game.space
    table = _table(game.capacity) if table is None else table
    B = game.target_B.mask
    tol = game.increment_tol
    d = space.depth

    if outcome.winner == "I":
        for leaf in itertools.product(*(range(k) for k in space.arities)):
            A = 0
            base = None
            for k in range(d):
                move = outcome.strategy.get((k, leaf[:k]))
                if move is None or move & A != A:
                    return False
                if k == 0:
                    if table[move] > game.budget_epsilon + CMP_TOL:
                        return False
                elif table[move] > table[A] + tol:
                    return False
                A = move
            i = space.leaf_index(leaf)
            if B >> i & 1 and not A >> i & 1:
                return False
        return True

    solver = _solver or _Solver(space, table, B, tol)
    cleared = set() if _cleared is None else _cleared

    def lines(k, prefix, A):
        if (k, prefix, A) in cleared:
            return True
        moves = solver.openings(game.budget_epsilon) if k == 0 else solver.extensions(A)
        for S in moves:
            j = outcome.strategy.get((k, prefix, S))
            if j is None:
                return False
            p = prefix + (j,)
            if k == d - 1:
                i = solver.leaf_idx[p]
                if not (B >> i & 1) or S >> i & 1:
                    return False
            elif not lines(k + 1, p, S):
                return False
        cleared.add((k, prefix, A))
        return True

    return lines(0, (), 0)


def stability_witness(table: np.ndarray, n_leaves: int, tol: float = CMP_TOL) -> tuple[int, int] | None:
    """First ``A`` with no stabilizer, plus a positive ``B`` that adds nothing to the best candidate.

    ``A`` is stabilized by ``S >= A`` with ``c(S) = c(A)`` when every
    ``B`` outside ``S`` with ``c(B) > 0`` has ``c(A | B) > c(A)``.  A
    larger candidate leaves fewer ``B`` to check, so only candidates that
    are maximal among same-capacity supersets are tried.  Returns ``None``
    when the capacity is stable.
    """
    full = (1 << n_leaves) - 1
    masks = np.arange(full + 1, dtype=np.int64)
    positive = table > tol
    for A in range(full + 1):
        cA = table[A]
        cand = masks[((masks & A) == A) & (np.abs(table - cA) <= tol)]
        cand_set = set(int(x) for x in cand)
        witness = None
        for S in sorted(cand_set, key=lambda m: -bin(m).count("1")):
            if any((S | (1 << i)) in cand_set for i in range(n_leaves) if not S >> i & 1):
                continue
            outside = masks[((masks & S) == 0) & positive]
            flat = outside[table[A | outside] <= cA + tol]
            if len(flat) == 0:
                witness = None
                break
            witness = int(flat[0])
        if witness is not None:
            return A, witness
    return None


@dataclass
class GameLemmaReport:
    """Cells are ``(B, eps, c(B), winner)``.

    The second implication of the lemma needs a stable capacity; on an
    unstable one its violations are kept but not counted against ``ok``.
    """

    cells: list = field(default_factory=list)
    forward_violations: list = field(default_factory=list)
    backward_violations: list = field(default_factory=list)
    boundary: list = field(default_factory=list)
    replay_failures: list = field(default_factory=list)
    stable: bool = True
    instability: tuple[int, int] | None = None

    @property
    def ok(self) -> bool:
        backward = self.backward_violations if self.stable else []
        return not (self.forward_violations or backward or self.replay_failures)

    def to_json(self, space: ProductTreeSpace) -> dict:
        def cell(c):
            B, eps, cb, w = c
            return {"B": PointSet(space, B).describe(), "epsilon": eps, "c_B": cb, "winner": w}

        return {
            "cells": len(self.cells),
            "forward_violations": [cell(c) for c in self.forward_violations],
            "backward_violations": [cell(c) for c in self.backward_violations],
            "replay_failures": [cell(c) for c in self.replay_failures],
            "boundary": [cell(c) for c in self.boundary],
            "stable": self.stable,
            "instability": None if self.instability is None else {
                "A": PointSet(space, self.instability[0]).describe(),
                "B": PointSet(space, self.instability[1]).describe(),
            },
            "ok": self.ok,
        }


def verify_gamelemma(space: ProductTreeSpace, capacity: SubmeasureHandle, epsilon_grid: Sequence[float],
                     check_replay: bool = True) -> GameLemmaReport:
    """Every target ``B`` and budget: ``c(B) < eps`` forces an I win, an I win forces ``c(B) <= eps``.

    Cells with ``c(B) = eps`` are collected in ``boundary`` without being
    asserted.  The capacity is also checked for stability, which the second
    implication assumes.
    """
    if space.n_leaves > MAX_LEMMA_LEAVES:
        raise TooLarge(f"exhaustive lemma check limited to {MAX_LEMMA_LEAVES} leaves")
    table = _table(capacity)
    report = GameLemmaReport()
    report.instability = stability_witness(table, space.n_leaves)
    report.stable = report.instability is None
    ext_cache: dict = {}
    for B in range(space.full_mask + 1):
        solver = _Solver(space, table, B, CMP_TOL, ext_cache)
        cleared: set = set()
        cb = float(table[B])
        for eps in epsilon_grid:
            eps = float(eps)
            opening = solver.winning_opening(eps)
            winner = "I" if opening is not None else "II"
            cell = (B, eps, cb, winner)
            report.cells.append(cell)
            if cb < eps - CMP_TOL and winner != "I":
                report.forward_violations.append(cell)
            if winner == "I" and cb > eps + CMP_TOL:
                report.backward_violations.append(cell)
            if abs(cb - eps) <= CMP_TOL:
                report.boundary.append(cell)
            if check_replay:
                game = TruncatedGameH(space, capacity, PointSet(space, B), eps)
                strategy = solver.I_strategy(opening) if opening is not None else solver.II_strategy(eps)
                if not replay(game, GameOutcome(winner, strategy, 0), table, cleared, solver):
                    report.replay_failures.append(cell)
    return report


def outcome_json(outcome: GameOutcome, space: ProductTreeSpace) -> str:
    return json.dumps(outcome.to_json(space), sort_keys=True)

"""Execute parsed configs and write ``report.json`` plus per-task CSV files."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, TaskSpec
from .errors import CapacityLabError, UseGreedy
from .games import TruncatedGameH, solve_minimax, verify_gamelemma
from .hausdorff import min_weight_cover
from .join import join_exact, join_greedy, null_decompose
from .potential import PotentialProblem, solve_capacity, stability_sweep
from .space import PointSet
from .steprans import DerivedCapacity, capacity_exact, tilde_report
from .verify import PropertySpec, run_suite

log = logging.getLogger(__name__)

SCHEMA = "capacitylab.run_report/1"


def fmt_real(x: float):
    """12 significant digits, then the shortest repr that round-trips."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(f"{x:.12g}") + 0.0


def clean(obj):
    """JSON-ready copy with every real rounded by :func:`fmt_real`."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return fmt_real(obj)
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (Fraction, frozenset, set)):
        return str(obj) if isinstance(obj, Fraction) else sorted(clean(v) for v in obj)
    return obj


def task_seed(seed: int, task_id: str) -> int:
    digest = hashlib.sha256(f"{seed}/{task_id}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


@dataclass
class TaskResult:
    id: str
    kind: str
    seed: int
    status: str = "ok"  # ok | failed | error
    output: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    error: str = ""
    csv: dict = field(default_factory=dict)  # file suffix -> (header, rows)
    wall_time: float = 0.0

    def to_json(self) -> dict:
        out = {"id": self.id, "kind": self.kind, "seed": self.seed, "status": self.status}
        if self.error:
            out["error"] = self.error
        if self.failures:
            out["failures"] = self.failures
        out["output"] = self.output
        return out


@dataclass
class RunReport:
    data: dict
    timing: dict
    exit_code: int
    files: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {**self.data, "timing": self.timing}

    def dumps(self) -> str:
        return json.dumps(clean(self.to_json()), indent=2) + "\n"


# tasks


def _capacity(task: TaskSpec, seed: int) -> TaskResult:
    h = task.params["submeasure"]
    res = TaskResult(task.id, task.kind, seed)
    exact = isinstance(h.source, DerivedCapacity) and h.source.tower.rational
    rows, values = [], []
    for name, A in task.params["sets"]:
        v = h(A)
        entry = {"set": name, "leaves": A.describe(), "capacity": v}
        if exact:
            entry["exact"] = str(capacity_exact(h.source, A))
        values.append(entry)
        rows.append([name, v])
    res.output = {"operation": "capacity", "submeasure": h.label, "values": values}
    res.csv[""] = (["set", "capacity"], rows)
    return res


def _join(task: TaskSpec, seed: int) -> TaskResult:
    parts = task.params["submeasures"]
    res = TaskResult(task.id, task.kind, seed)
    rows, values = [], []
    for name, A in task.params["sets"]:
        try:
            r = join_exact(parts, A)
            null = null_decompose(parts, A)
        except UseGreedy:
            r = join_greedy(parts, A, task.params["iterations"], seed)
            null = None
        assign = r.assignment()
        membership = [assign[i] for i in A.indices()]
        values.append({
            "set": name,
            "join": r.value,
            "method": r.method,
            "points": A.describe(),
            "parts": membership,
            "null_decomposition": None if null is None else [p.describe() for p in null],
        })
        rows.append([name, r.value, r.method, json.dumps(membership)])
    res.output = {"operation": "join_exact", "submeasures": [c.label for c in parts], "values": values}
    res.csv[""] = (["set", "join", "method", "parts"], rows)
    return res


def _tilde(task: TaskSpec, seed: int) -> TaskResult:
    h = task.params["submeasure"]
    res = TaskResult(task.id, task.kind, seed)
    rows, values = [], []
    for name, A in task.params["sets"]:
        if isinstance(h.source, PotentialProblem):
            tilde = PointSet.from_indices(h.space, h.source.tilde(A.indices()))
            entry = {"set": name, "tilde": tilde.describe(), "operation": "potential_tilde"}
            stable = None
        else:
            rep = tilde_report(h.source, A, task.params["epsilons"])
            tilde, stable = rep.tilde, rep.stabilized_at
            entry = {"set": name, "tilde": tilde.describe(), "operation": "tilde_steprans", "stabilized_at": stable}
        entry["c(A)"] = h(A)
        entry["c(tilde)"] = h(tilde)
        values.append(entry)
        rows.append([name, " ".join(tilde.describe()), "" if stable is None else stable])
    res.output = {"submeasure": h.label, "values": values}
    res.csv[""] = (["set", "tilde", "stabilized_at"], rows)
    return res


def _hausdorff(task: TaskSpec, seed: int) -> TaskResult:
    p = task.params
    space, metric, s = p["space"], p["metric"], p["s"]
    res = TaskResult(task.id, task.kind, seed)
    rows, profiles = [], []
    for name, A in p["sets"]:
        prof = []
        for d in p["deltas"]:
            r = min_weight_cover(space, metric, A, s, d)
            cover = [space.format_path(t) for t in r.optimal_cover.opens]
            prof.append({"delta": d, "value": r.value, "cover_size": len(cover), "cover": cover})
            rows.append([name, d, r.value, len(cover)])
        profiles.append({"set": name, "profile": prof})
    res.output = {"operation": "premeasure_profile", "s": s, "base": str(metric.base), "values": profiles}
    res.csv[""] = (["set", "delta", "value", "cover_size"], rows)
    return res


def _game(task: TaskSpec, seed: int) -> TaskResult:
    p = task.params
    h = p["submeasure"]
    res = TaskResult(task.id, task.kind, seed)
    space = h.space
    if p["lemma"]:
        report = verify_gamelemma(space, h, p["epsilons"])
        res.output = {"operation": "verify_gamelemma", "submeasure": h.label, **report.to_json(space)}
        for kind in ("forward_violations", "backward_violations", "replay_failures"):
            for cell in res.output[kind]:
                res.failures.append({"check": kind, **cell})
        res.csv[""] = (["B", "epsilon", "c_B", "winner"],
                       [[" ".join(PointSet(space, B).describe()), e, cb, w] for B, e, cb, w in report.cells])
        return res
    name, target = p["target"]
    game = TruncatedGameH(space, h, target, p["epsilon"])
    outcome = solve_minimax(game, with_strategy=p["strategy"])
    out = outcome.to_json(space)
    if not p["strategy"]:
        out.pop("strategy")
    res.output = {"operation": "solve_minimax", "submeasure": h.label, "target": name,
                  "epsilon": p["epsilon"], "c(B)": h(target), **out}
    res.csv[""] = (["target", "epsilon", "winner", "positions"], [[name, p["epsilon"], outcome.winner, outcome.positions_explored]])
    return res


def _verify(task: TaskSpec, seed: int, tolerance: float) -> TaskResult:
    p = task.params
    h = p["submeasure"]
    tol = p["tolerance"] if p["tolerance"] is not None else tolerance
    specs = [PropertySpec(name, p["mode"], p["trials"], seed, tol) for name in p["properties"]]
    report = run_suite(h, h.space, specs, workers=1)
    res = TaskResult(task.id, task.kind, seed)
    res.output = {"operation": "run_suite", **report.to_json()}
    res.output["table"] = report.table().splitlines()
    for v in report.verdicts:
        if v.status == "fail" and v.name in p["expect"]:
            res.failures.append(v.to_json(h.space))
    res.csv[""] = (["property", "status", "checked"], [[v.name, v.status, v.checked] for v in report.verdicts])
    return res


def _potential(task: TaskSpec, seed: int) -> TaskResult:
    p = task.params
    problem: PotentialProblem = p["potential"]
    res = TaskResult(task.id, task.kind, seed)
    rows, values, trace_rows = [], [], []
    for name, A in p["sets"]:
        idx = A.indices()
        r = solve_capacity(problem.matrix, problem.space.weights, problem.p, idx, problem.tol, keep_trace=p["trace"])
        values.append({
            "set": name,
            "points": idx,
            "capacity": r.value,
            "kkt_residual": r.potential.kkt_residual,
            "dual_bound": r.certificate.dual_bound,
            "newton_steps": r.certificate.newton_steps,
            "potential_function": r.potential.values,
        })
        rows.append([name, r.value, r.potential.kkt_residual])
        trace_rows.extend([name, *t] for t in r.trace)
    res.output = {"operation": "capacity_gp", "potential": p["name"], "p": problem.p,
                  "kernel": problem.kernel.describe(), "flags": list(problem.flags), "values": values}
    res.csv[""] = (["set", "capacity", "kkt_residual"], rows)
    if p["trace"]:
        res.csv["_trace"] = (["set", "iteration", "objective", "barrier", "kkt_residual"], trace_rows)
    if p["stability"]:
        tol = max(1e-6, 100 * problem.tol)
        verdicts = stability_sweep(problem.space, problem.kernel, problem.p, tol)
        bad = [v for v in verdicts if not v.ok]
        res.output["stability"] = {"operation": "stability_biconditional", "tol": tol,
                                   "pairs": len(verdicts), "failures": len(bad)}
        for v in bad:
            res.failures.append({"check": "stability_biconditional", "A": sorted(v.A), "B": sorted(v.B),
                                 "c_A": v.c_A, "c_B": v.c_B, "c_rest": v.c_rest})
    return res


def run_task(task: TaskSpec, seed: int, tolerance: float) -> TaskResult:
    start = time.perf_counter()
    try:
        if task.kind == "verify":
            res = _verify(task, seed, tolerance)
        else:
            res = {
                "capacity": _capacity,
                "join": _join,
                "tilde": _tilde,
                "hausdorff": _hausdorff,
                "game": _game,
                "potential": _potential,
            }[task.kind](task, seed)
        if res.failures:
            res.status = "failed"
    except (CapacityLabError, ValueError, ArithmeticError) as exc:
        log.warning("task %s errored: %s", task.id, exc)
        res = TaskResult(task.id, task.kind, seed, "error", error=f"{type(exc).__name__}: {exc}")
    res.wall_time = time.perf_counter() - start
    return res


def thread_count() -> int:
    raw = os.environ.get("CAPACITYLAB_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            log.warning("ignoring CAPACITYLAB_THREADS=%r", raw)
    return os.cpu_count() or 1


def run(config: ExperimentConfig, output_dir=None, parallel: bool = False, seed: int | None = None,
        kinds: tuple[str, ...] | None = None) -> RunReport:
    """Run the tasks in declaration order (optionally only some kinds) and write the outputs."""
    seed = config.seed if seed is None else seed
    tasks = [t for t in config.tasks if kinds is None or t.kind in kinds]
    start = time.perf_counter()
    jobs = [(t, task_seed(seed, t.id)) for t in tasks]
    if parallel and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=thread_count()) as pool:
            results = list(pool.map(lambda j: run_task(j[0], j[1], config.tolerance), jobs))
    else:
        results = [run_task(t, s, config.tolerance) for t, s in jobs]
    errors = sum(r.status == "error" for r in results)
    failed = sum(r.status == "failed" for r in results)
    data = {
        "schema": SCHEMA,
        "tool": {"name": "capacitylab", "version": __version__},
        "config_digest": config.digest,
        "seed": seed,
        "warnings": list(config.warnings),
        "tasks": [r.to_json() for r in results],
        "summary": {"tasks": len(results), "errors": errors, "failed": failed},
    }
    timing = {"total_seconds": time.perf_counter() - start,
              "tasks": {r.id: r.wall_time for r in results}}
    report = RunReport(data, timing, 0 if errors == 0 and failed == 0 else 1)
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(report.dumps(), encoding="utf-8")
        report.files.append(str(out / "report.json"))
        for r in results:
            for suffix, (header, rows) in r.csv.items():
                path = out / f"{r.id}{suffix}.csv"
                with open(path, "w", newline="", encoding="utf-8") as fh:
                    w = csv.writer(fh)
                    w.writerow(header)
                    w.writerows([[_cell(x) for x in row] for row in rows])
                report.files.append(str(path))
    return report


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(fmt_real(x)) if math.isfinite(x) else fmt_real(x)
    return x

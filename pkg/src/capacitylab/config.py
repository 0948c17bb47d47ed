"""Line-oriented experiment configs.

::

    seed = 7

    [space S]
    arities = 2,2
    base = 1/2

    [tower T]
    space = S
    level = max
    level = wp p=1 w=1/2,1/2

    [set A]
    space = S
    leaves = 00, 01

    [submeasure c]
    kind = tower
    tower = T

    [task t1]
    kind = capacity
    submeasure = c
    sets = A

Sections are ``[kind name]``; ``#`` starts a comment.  Names may be used
only after their declaration.  Every problem found is collected and raised
together as :class:`ConfigError`.
"""
from __future__ import annotations

import hashlib
import math
import re
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConfigError
from .handles import SubmeasureHandle
from .join import join_handle
from .potential import (
    Bessel,
    Constant,
    Diagonal,
    DiscretePotentialSpace,
    ExplicitMatrix,
    PotentialProblem,
    Riesz,
    potential_handle,
)
from .space import PointSet, ProductTreeSpace, TreeMetric
from .steprans import DEFAULT_EPSILONS, DerivedCapacity, MaxNorm, NormTower, WeightedP
from .verify import NAMES as PROPERTY_NAMES

SECTION_KINDS = ("space", "tower", "set", "submeasure", "potential", "task")
TASK_KINDS = ("capacity", "join", "tilde", "hausdorff", "game", "verify", "potential")
GLOBAL_KEYS = {"seed", "tolerance", "name"}
_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_.-]*$")


@dataclass(frozen=True)
class Issue:
    line: int
    col: int
    message: str

    def __str__(self):
        return f"line {self.line}, col {self.col}: {self.message}"


@dataclass
class Entry:
    key: str
    value: str
    line: int
    col: int  # column of the value
    kcol: int = 1


@dataclass
class Section:
    kind: str
    name: str
    line: int
    entries: list[Entry] = field(default_factory=list)

    def get(self, key: str) -> Entry | None:
        for e in self.entries:
            if e.key == key:
                return e
        return None

    def all(self, key: str) -> list[Entry]:
        return [e for e in self.entries if e.key == key]


@dataclass
class TaskSpec:
    id: str
    kind: str
    params: dict
    line: int


@dataclass
class ExperimentConfig:
    seed: int = 0
    tolerance: float = 1e-9
    name: str = ""
    spaces: dict[str, tuple[ProductTreeSpace, TreeMetric]] = field(default_factory=dict)
    towers: dict[str, NormTower] = field(default_factory=dict)
    sets: dict[str, PointSet] = field(default_factory=dict)
    submeasures: dict[str, SubmeasureHandle] = field(default_factory=dict)
    potentials: dict[str, PotentialProblem] = field(default_factory=dict)
    tasks: list[TaskSpec] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    digest: str = ""


# lexing


def _strip_comment(line: str) -> str:
    i = line.find("#")
    return line if i < 0 else line[:i]


def _split(text: str) -> tuple[list[Entry], list[Section], list[Issue]]:
    globals_, sections, issues = [], [], []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).rstrip()
        if not line.strip():
            continue
        indent = len(line) - len(line.lstrip())
        body = line.strip()
        if body.startswith("["):
            if not body.endswith("]"):
                issues.append(Issue(lineno, indent + len(body), "expected ']' to close the section header"))
                current = None
                continue
            words = body[1:-1].split()
            if len(words) != 2:
                issues.append(Issue(lineno, indent + 2, "section header must be '[kind name]'"))
                current = None
                continue
            kind, name = words
            if kind not in SECTION_KINDS:
                issues.append(Issue(lineno, indent + 2, f"unknown section kind {kind!r}; expected one of {', '.join(SECTION_KINDS)}"))
                current = None
                continue
            if not _NAME.match(name):
                issues.append(Issue(lineno, indent + 2 + len(kind) + 1, f"invalid name {name!r}"))
                current = None
                continue
            current = Section(kind, name, lineno)
            sections.append(current)
            continue
        eq = body.find("=")
        if eq < 0:
            issues.append(Issue(lineno, indent + 1, "expected 'key = value'"))
            continue
        key = body[:eq].strip()
        value = body[eq + 1 :].strip()
        vcol = indent + eq + 2 + (len(body[eq + 1 :]) - len(body[eq + 1 :].lstrip()))
        if not key:
            issues.append(Issue(lineno, indent + 1, "missing key before '='"))
            continue
        entry = Entry(key, value, lineno, vcol, indent + 1)
        if current is None:
            globals_.append(entry)
        else:
            current.entries.append(entry)
    return globals_, sections, issues


def _digest(globals_: list[Entry], sections: list[Section]) -> str:
    """Hash of the normalized config: comments, blank lines and spacing do not matter."""
    def norm(value):
        return re.sub(r"\s*([,;:=])\s*", r"\1", " ".join(value.split()))

    lines = [f"{e.key}={norm(e.value)}" for e in globals_]
    for s in sections:
        lines.append(f"[{s.kind} {s.name}]")
        lines.extend(f"{e.key}={norm(e.value)}" for e in s.entries)
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()


# value parsers; each raises ValueError with a user-facing message


def _list(value: str, sep: str = ",") -> list[str]:
    return [x.strip() for x in value.split(sep) if x.strip()]


def _real(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "infinity"):
        return math.inf
    try:
        return float(Fraction(t))
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"expected a real number, got {text!r}") from None


def _int(text: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ValueError(f"expected an integer, got {text!r}") from None


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("yes", "true", "1", "on"):
        return True
    if t in ("no", "false", "0", "off"):
        return False
    raise ValueError(f"expected yes or no, got {text!r}")


def _options(text: str) -> tuple[str, dict[str, str]]:
    """``head k=v k=v`` where values contain no spaces."""
    words = text.split()
    if not words:
        raise ValueError("empty value")
    opts = {}
    for w in words[1:]:
        if "=" not in w:
            raise ValueError(f"expected key=value, got {w!r}")
        k, v = w.split("=", 1)
        opts[k] = v
    return words[0].lower(), opts


def _rows(text: str) -> np.ndarray:
    rows = [[_real(x) for x in _list(r)] for r in _list(text, ";")]
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValueError("expected ';'-separated rows of equal length")
    return np.array(rows, dtype=float)


def _norm(text: str, size: int):
    head, opts = _options(text)
    if head == "max":
        if opts:
            raise ValueError("max takes no options")
        return MaxNorm(size)
    if head == "wp":
        unknown = set(opts) - {"p", "w"}
        if unknown:
            raise ValueError(f"unknown wp options {sorted(unknown)}")
        p = _real(opts.get("p", "1"))
        if "w" in opts:
            w = [Fraction(x) if "." not in x and "e" not in x.lower() else float(x) for x in _list(opts["w"])]
            return WeightedP(w, p)
        return WeightedP.uniform(size, p)
    raise ValueError(f"level must be 'max' or 'wp p=<real> w=<list>', got {head!r}")


def _kernel(text: str, matrix_entry: Entry | None):
    head, opts = _options(text)
    allowed = {
        "riesz": {"alpha", "n", "gamma", "kmax"},
        "bessel": {"alpha", "n", "a", "step", "kmax"},
        "constant": {"value"},
        "diagonal": set(),
        "matrix": set(),
    }
    if head not in allowed:
        raise ValueError(f"unknown kernel {head!r}; expected one of {', '.join(allowed)}")
    unknown = set(opts) - allowed[head]
    if unknown:
        raise ValueError(f"unknown {head} options {sorted(unknown)}")

    def kmax():
        v = opts.get("kmax", "1e12")
        return None if v.lower() == "none" else _real(v)

    if head == "riesz":
        return Riesz(_real(opts["alpha"]), _int(opts["n"]), _real(opts.get("gamma", "1")), kmax())
    if head == "bessel":
        return Bessel(_real(opts["alpha"]), _int(opts["n"]), _real(opts.get("a", "1")), _real(opts.get("step", "0.25")), kmax())
    if head == "constant":
        return Constant(_real(opts.get("value", "1")))
    if head == "diagonal":
        return Diagonal()
    if matrix_entry is None:
        raise ValueError("kernel 'matrix' needs a 'matrix = row; row; ...' entry")
    return ExplicitMatrix(_rows(matrix_entry.value))


# building


class _Builder:
    def __init__(self, sections: list[Section], issues: list[Issue]):
        self.sections = sections
        self.issues = issues
        self.cfg = ExperimentConfig()
        self.broken: set[tuple[str, str]] = set()
        self.declared: dict[tuple[str, str], int] = {}

    def error(self, line, col, msg):
        self.issues.append(Issue(line, col, msg))

    def require(self, sec: Section, key: str) -> Entry | None:
        e = sec.get(key)
        if e is None:
            self.error(sec.line, 1, f"[{sec.kind} {sec.name}] is missing '{key}'")
        return e

    def check_keys(self, sec: Section, allowed: set[str], repeatable: set[str] = frozenset()):
        seen = set()
        for e in sec.entries:
            if e.key not in allowed:
                self.error(e.line, e.kcol, f"unknown key {e.key!r} in [{sec.kind} {sec.name}]")
            elif e.key in seen and e.key not in repeatable:
                self.error(e.line, e.kcol, f"duplicate key {e.key!r}")
            seen.add(e.key)

    def ref(self, table: dict, kind: str, entry: Entry, name: str, col: int | None = None):
        """Resolve ``name``; report a dangling reference unless the target already failed."""
        name = name.strip()
        if name in table:
            return table[name]
        if (kind, name) not in self.broken:
            self.error(entry.line, col or entry.col, f"dangling reference: undeclared {kind} {name!r}")
        return None

    def space_ref(self, entry: Entry):
        """A declared space, or the evaluation points of a potential."""
        name = entry.value.strip()
        if name in self.cfg.spaces:
            return self.cfg.spaces[name][0]
        if name in self.cfg.potentials:
            return ProductTreeSpace((self.cfg.potentials[name].space.n_eval,))
        if ("space", name) not in self.broken and ("potential", name) not in self.broken:
            self.error(entry.line, entry.col, f"dangling reference: undeclared space {name!r}")
        return None

    def guard(self, sec: Section, entry: Entry | None, fn):
        try:
            return fn()
        except (ValueError, KeyError, ZeroDivisionError) as exc:
            msg = f"missing option {exc}" if isinstance(exc, KeyError) else str(exc)
            line, col = (entry.line, entry.col) if entry is not None else (sec.line, 1)
            self.error(line, col, msg)
            return None

    def build(self) -> ExperimentConfig:
        handlers = {
            "space": self.space,
            "potential": self.potential,
            "tower": self.tower,
            "set": self.pointset,
            "submeasure": self.submeasure,
            "task": self.task,
        }
        for sec in self.sections:
            key = (sec.kind, sec.name)
            if key in self.declared:
                self.error(sec.line, 2, f"{sec.kind} {sec.name!r} already declared on line {self.declared[key]}")
                continue
            self.declared[key] = sec.line
            before = len(self.issues)
            handlers[sec.kind](sec)
            if len(self.issues) > before:
                self.broken.add(key)
        return self.cfg

    # sections

    def space(self, sec):
        self.check_keys(sec, {"arities", "base"})
        ar = self.require(sec, "arities")
        if ar is None:
            return
        arities = self.guard(sec, ar, lambda: ProductTreeSpace(tuple(_int(x) for x in _list(ar.value))))
        base = sec.get("base")
        metric = self.guard(sec, base, lambda: TreeMetric.parse(base.value)) if base else TreeMetric()
        if arities is not None and metric is not None:
            self.cfg.spaces[sec.name] = (arities, metric)

    def potential(self, sec):
        self.check_keys(sec, {"weights", "coords", "eval", "kernel", "matrix", "p", "tol"})
        w, k = self.require(sec, "weights"), self.require(sec, "kernel")
        if w is None or k is None:
            return
        weights = self.guard(sec, w, lambda: np.array([_real(x) for x in _list(w.value)]))
        coords = sec.get("coords")
        ev = sec.get("eval")
        mc = self.guard(sec, coords, lambda: _rows(coords.value)) if coords else None
        ec = self.guard(sec, ev, lambda: _rows(ev.value)) if ev else None
        kernel = self.guard(sec, k, lambda: _kernel(k.value, sec.get("matrix")))
        pe, te = sec.get("p"), sec.get("tol")
        p = self.guard(sec, pe, lambda: _real(pe.value)) if pe else 2.0
        tol = self.guard(sec, te, lambda: _real(te.value)) if te else 1e-8
        if weights is None or kernel is None or p is None or tol is None:
            return
        if p < 1:
            self.error(pe.line, pe.col, f"p must be at least 1, got {p:g}")
            return
        if p == 1:
            self.cfg.warnings.append(f"line {pe.line}: [potential {sec.name}] p = 1: uniqueness contract void")
        if tol <= 0:
            self.error(te.line, te.col, "tol must be positive")
            return

        def make():
            if ec is not None:
                space = DiscretePotentialSpace(weights, m_coords=mc, eval_coords=ec)
            else:
                space = DiscretePotentialSpace(weights, m_coords=mc)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                problem = PotentialProblem(space, kernel, p, tol)
            for flag in problem.flags:
                self.cfg.warnings.append(f"line {k.line}: [potential {sec.name}] {flag}")
            return problem

        problem = self.guard(sec, k, make)
        if problem is not None:
            self.cfg.potentials[sec.name] = problem

    def tower(self, sec):
        self.check_keys(sec, {"space", "level"}, {"level"})
        sp = self.require(sec, "space")
        levels = sec.all("level")
        if sp is None:
            return
        entry = self.cfg.spaces.get(sp.value.strip())
        if entry is None:
            self.ref(self.cfg.spaces, "space", sp, sp.value)
            return
        space = entry[0]
        if len(levels) != space.depth:
            self.error(sec.line, 1, f"[tower {sec.name}] has {len(levels)} levels but space {sp.value.strip()!r} has depth {space.depth}")
            return
        norms = [self.guard(sec, e, lambda e=e, k=k: _norm(e.value, k)) for e, k in zip(levels, space.arities)]
        if any(n is None for n in norms):
            return
        tower = self.guard(sec, None, lambda: NormTower(space, tuple(norms)))
        if tower is not None:
            self.cfg.towers[sec.name] = tower

    def pointset(self, sec):
        self.check_keys(sec, {"space", "leaves", "paths"})
        sp = self.require(sec, "space")
        if sp is None:
            return
        space = self.space_ref(sp)
        if space is None:
            return
        lv, pa = sec.get("leaves"), sec.get("paths")
        if (lv is None) == (pa is None):
            self.error(sec.line, 1, f"[set {sec.name}] needs exactly one of 'leaves' or 'paths'")
            return
        if lv is not None:
            def make():
                leaves = [space.parse_path(x) for x in _list(lv.value)]
                short = [x for x in leaves if len(x) != space.depth]
                if short:
                    raise ValueError(f"{space.format_path(short[0])} is not a leaf")
                return PointSet.from_leaves(space, leaves)

            result = self.guard(sec, lv, make)
        else:
            result = self.guard(sec, pa, lambda: PointSet.from_paths(space, [space.parse_path(x) for x in _list(pa.value)]))
        if result is not None:
            self.cfg.sets[sec.name] = result

    def submeasure(self, sec):
        kinds = {
            "tower": {"tower"},
            "measure": {"space", "weights"},
            "uniform": {"space"},
            "pointmass": {"space", "atoms"},
            "table": {"space", "entry", "declared"},
            "join": {"parts"},
            "potential": {"potential"},
        }
        ke = self.require(sec, "kind")
        if ke is None:
            return
        kind = ke.value.strip()
        if kind not in kinds:
            self.error(ke.line, ke.col, f"unknown submeasure kind {kind!r}; expected one of {', '.join(kinds)}")
            return
        self.check_keys(sec, kinds[kind] | {"kind"}, {"entry"})
        label = sec.name
        handle = None
        if kind == "tower":
            te = self.require(sec, "tower")
            tower = te and self.ref(self.cfg.towers, "tower", te, te.value)
            if tower is not None:
                handle = SubmeasureHandle.from_capacity(DerivedCapacity(tower), label)
        elif kind == "join":
            pe = self.require(sec, "parts")
            if pe is None:
                return
            parts = [self.ref(self.cfg.submeasures, "submeasure", pe, x) for x in _list(pe.value)]
            if not parts or any(p is None for p in parts):
                if not parts:
                    self.error(pe.line, pe.col, "join needs at least one part")
                return
            if len({p.space for p in parts}) != 1:
                self.error(pe.line, pe.col, "join parts live on different spaces")
                return
            handle = join_handle(parts, label)
        elif kind == "potential":
            pe = self.require(sec, "potential")
            problem = pe and self.ref(self.cfg.potentials, "potential", pe, pe.value)
            if problem is not None:
                handle = potential_handle(problem, label)
        else:
            sp = self.require(sec, "space")
            space = sp and self.space_ref(sp)
            if space is None:
                return
            if kind == "uniform":
                handle = SubmeasureHandle.uniform(space, label)
            elif kind == "measure":
                we = self.require(sec, "weights")
                if we is not None:
                    handle = self.guard(sec, we, lambda: SubmeasureHandle.measure(space, [_real(x) for x in _list(we.value)], label))
            elif kind == "pointmass":
                ae = self.require(sec, "atoms")
                atoms = ae and self.ref(self.cfg.sets, "set", ae, ae.value)
                if atoms is not None:
                    if atoms.space != space:
                        self.error(ae.line, ae.col, f"set {ae.value.strip()!r} lives on a different space")
                        return
                    handle = SubmeasureHandle.point_mass(space, atoms, label)
            else:
                handle = self.table(sec, space, label)
        if handle is not None:
            self.cfg.submeasures[sec.name] = handle

    def table(self, sec, space, label):
        values = {}
        for e in sec.all("entry"):
            if ":" not in e.value:
                self.error(e.line, e.col, "table entry must be '<leaves> : <value>'")
                continue
            left, right = e.value.rsplit(":", 1)

            def parse(left=left, right=right):
                leaves = [space.parse_path(x) for x in left.replace(",", " ").split()]
                return PointSet.from_leaves(space, leaves).mask, _real(right)

            got = self.guard(sec, e, parse)
            if got is not None:
                values[got[0]] = got[1]
        de = sec.get("declared")
        declared = _list(de.value) if de else []
        return self.guard(sec, de, lambda: SubmeasureHandle.from_table(space, values, label, declared))

    # tasks

    def task(self, sec):
        ke = self.require(sec, "kind")
        if ke is None:
            return
        kind = ke.value.strip()
        if kind not in TASK_KINDS:
            self.error(ke.line, ke.col, f"unknown task kind {kind!r}; expected one of {', '.join(TASK_KINDS)}")
            return
        keys = {
            "capacity": {"submeasure", "sets"},
            "join": {"submeasures", "sets", "iterations"},
            "tilde": {"submeasure", "sets", "epsilons"},
            "hausdorff": {"space", "sets", "s", "deltas"},
            "game": {"submeasure", "target", "epsilon", "strategy", "lemma", "epsilons"},
            "verify": {"submeasure", "properties", "mode", "trials", "tolerance", "expect"},
            "potential": {"potential", "sets", "trace", "stability"},
        }[kind]
        self.check_keys(sec, keys | {"kind"})
        params = getattr(self, f"task_{kind}")(sec)
        if params is not None:
            self.cfg.tasks.append(TaskSpec(sec.name, kind, params, sec.line))

    def _handle(self, sec, key="submeasure"):
        e = self.require(sec, key)
        return e and self.ref(self.cfg.submeasures, "submeasure", e, e.value)

    def _sets(self, sec, space, key="sets", required=True):
        e = sec.get(key) if not required else self.require(sec, key)
        if e is None:
            return [] if not required else None
        out = []
        for name in _list(e.value):
            s = self.ref(self.cfg.sets, "set", e, name)
            if s is None:
                return None
            if space is not None and s.space != space:
                self.error(e.line, e.col, f"set {name!r} lives on a different space")
                return None
            out.append((name, s))
        return out

    def _opt(self, sec, key, parse, default):
        e = sec.get(key)
        if e is None:
            return default
        return self.guard(sec, e, lambda: parse(e.value))

    def task_capacity(self, sec):
        h = self._handle(sec)
        sets = self._sets(sec, h.space if h else None)
        if h is None or sets is None:
            return None
        return {"submeasure": h, "sets": sets}

    def task_join(self, sec):
        e = self.require(sec, "submeasures")
        if e is None:
            return None
        parts = [self.ref(self.cfg.submeasures, "submeasure", e, x) for x in _list(e.value)]
        if not parts:
            self.error(e.line, e.col, "join needs at least one submeasure")
            return None
        if any(p is None for p in parts):
            return None
        if len({p.space for p in parts}) != 1:
            self.error(e.line, e.col, "submeasures live on different spaces")
            return None
        sets = self._sets(sec, parts[0].space)
        iters = self._opt(sec, "iterations", _int, 20)
        if sets is None or iters is None:
            return None
        return {"submeasures": parts, "sets": sets, "iterations": iters}

    def task_tilde(self, sec):
        h = self._handle(sec)
        sets = self._sets(sec, h.space if h else None)
        eps = self._opt(sec, "epsilons", lambda v: tuple(_real(x) for x in _list(v)), DEFAULT_EPSILONS)
        if h is None or sets is None or eps is None:
            return None
        if not isinstance(h.source, (DerivedCapacity, PotentialProblem)):
            self.error(sec.line, 1, f"tilde needs a tower or potential submeasure, {h.label!r} is neither")
            return None
        if any(not 0 < x < 1 for x in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
            e = sec.get("epsilons")
            self.error(e.line, e.col, "epsilons must be strictly decreasing inside (0, 1)")
            return None
        return {"submeasure": h, "sets": sets, "epsilons": eps}

    def task_hausdorff(self, sec):
        sp = self.require(sec, "space")
        if sp is None:
            return None
        entry = self.cfg.spaces.get(sp.value.strip())
        if entry is None:
            self.ref(self.cfg.spaces, "space", sp, sp.value)
            return None
        space, metric = entry
        sets = self._sets(sec, space)
        s = self._opt(sec, "s", _real, 1.0)
        deltas = self._opt(sec, "deltas", lambda v: tuple(_real(x) for x in _list(v)),
                           tuple(metric.diameter_of_length(j) for j in range(space.depth + 1)))
        if sets is None or s is None or deltas is None:
            return None
        if s <= 0:
            e = sec.get("s")
            self.error(e.line, e.col, "s must be positive")
            return None
        if any(b >= a for a, b in zip(deltas, deltas[1:])) or any(d <= 0 for d in deltas):
            e = sec.get("deltas")
            self.error(e.line, e.col, "deltas must be positive and strictly decreasing")
            return None
        return {"space": space, "metric": metric, "sets": sets, "s": s, "deltas": deltas}

    def task_game(self, sec):
        h = self._handle(sec)
        lemma = self._opt(sec, "lemma", _bool, False)
        strategy = self._opt(sec, "strategy", _bool, False)
        if h is None or lemma is None or strategy is None:
            return None
        if lemma:
            eps = self._opt(sec, "epsilons", lambda v: tuple(_real(x) for x in _list(v)), tuple(k / 8 for k in range(1, 9)))
            if eps is None:
                return None
            return {"submeasure": h, "lemma": True, "epsilons": eps}
        te, ee = self.require(sec, "target"), self.require(sec, "epsilon")
        target = te and self.ref(self.cfg.sets, "set", te, te.value)
        eps = ee and self.guard(sec, ee, lambda: _real(ee.value))
        if target is None or eps is None:
            return None
        if target.space != h.space:
            self.error(te.line, te.col, f"set {te.value.strip()!r} lives on a different space")
            return None
        if eps <= 0:
            self.error(ee.line, ee.col, "epsilon must be positive")
            return None
        return {"submeasure": h, "lemma": False, "target": (te.value.strip(), target), "epsilon": eps, "strategy": strategy}

    def task_verify(self, sec):
        h = self._handle(sec)

        def names(v):
            got = list(PROPERTY_NAMES) if v.strip() == "all" else _list(v)
            bad = [x for x in got if x not in PROPERTY_NAMES]
            if bad:
                raise ValueError(f"unknown properties {bad}")
            return tuple(got)

        props = self._opt(sec, "properties", names, tuple(PROPERTY_NAMES))
        expect = self._opt(sec, "expect", names, None)
        mode = self._opt(sec, "mode", lambda v: v.strip(), "exhaustive")
        trials = self._opt(sec, "trials", _int, 200)
        tol = self._opt(sec, "tolerance", _real, None)
        if None in (h, props, mode, trials):
            return None
        if mode not in ("exhaustive", "randomized"):
            e = sec.get("mode")
            self.error(e.line, e.col, f"mode must be exhaustive or randomized, got {mode!r}")
            return None
        if trials < 1:
            e = sec.get("trials")
            self.error(e.line, e.col, "trials must be positive")
            return None
        if expect is None:
            expect = tuple(p for p in props if p != "strongly_subadditive")
        return {"submeasure": h, "properties": props, "mode": mode, "trials": trials,
                "tolerance": tol, "expect": expect}

    def task_potential(self, sec):
        pe = self.require(sec, "potential")
        problem = pe and self.ref(self.cfg.potentials, "potential", pe, pe.value)
        space = ProductTreeSpace((problem.space.n_eval,)) if problem is not None else None
        sets = self._sets(sec, space, required=False)
        trace = self._opt(sec, "trace", _bool, False)
        stability = self._opt(sec, "stability", _bool, False)
        if problem is None or sets is None or trace is None or stability is None:
            return None
        if stability and problem.space.n_eval > 8:
            e = sec.get("stability")
            self.error(e.line, e.col, "exhaustive stability sweep needs at most 8 evaluation points")
            return None
        return {"potential": problem, "name": pe.value.strip(), "sets": sets, "trace": trace, "stability": stability}


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate; raise :class:`ConfigError` listing every problem."""
    globals_, sections, issues = _split(text)
    builder = _Builder(sections, issues)
    cfg = builder.build()
    seen = set()
    for e in globals_:
        if e.key not in GLOBAL_KEYS:
            issues.append(Issue(e.line, 1, f"unknown global key {e.key!r}"))
            continue
        if e.key in seen:
            issues.append(Issue(e.line, 1, f"duplicate key {e.key!r}"))
        seen.add(e.key)
        try:
            if e.key == "seed":
                cfg.seed = _int(e.value)
                if cfg.seed < 0:
                    raise ValueError("seed must be nonnegative")
            elif e.key == "tolerance":
                cfg.tolerance = _real(e.value)
                if cfg.tolerance <= 0:
                    raise ValueError("tolerance must be positive")
            else:
                cfg.name = e.value
        except ValueError as exc:
            issues.append(Issue(e.line, e.col, str(exc)))
    if issues:
        raise ConfigError(sorted(issues, key=lambda i: (i.line, i.col)))
    cfg.digest = _digest(globals_, sections)
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())

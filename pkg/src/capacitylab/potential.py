"""Discrete potential capacities ``c_{g,p}`` and their tilde sets.

A potential space is a finite measure space ``(M, nu)`` together with a
finite set of evaluation points.  A kernel turns into an ``(eval, M)``
matrix ``K`` and the potential of a density ``f`` is ``Gf = K @ (nu * f)``.
The capacity of a set ``E`` of evaluation points is

    min  sum_y nu_y f_y^p   subject to   f >= 0,  Gf >= 1 on E,

solved with a log-barrier method and damped Newton steps, then polished on
the detected active set.  Every result carries a Lagrangian dual bound, so
``value - dual_bound`` certifies optimality independently of the solver.
"""
from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import Infeasible, NoConvergence, SingularKernel

log = logging.getLogger(__name__)

DEFAULT_K_MAX = 1e12


class SingularityCapped(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class DiscretePotentialSpace:
    weights: np.ndarray
    m_coords: np.ndarray | None = None
    eval_coords: np.ndarray | None = None
    m_labels: tuple = ()
    eval_labels: tuple = ()

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.size == 0:
            raise ValueError("M must be nonempty")
        if np.any(w <= 0):
            raise ValueError("all nu weights must be positive")
        object.__setattr__(self, "weights", w)
        mc = None if self.m_coords is None else np.atleast_2d(np.asarray(self.m_coords, dtype=float))
        if mc is not None and mc.shape[0] != w.size:
            mc = mc.T if mc.shape[1] == w.size else None
            if mc is None:
                raise ValueError("one coordinate row per point of M")
        ec = self.eval_coords
        if ec is not None:
            ec = np.atleast_2d(np.asarray(ec, dtype=float))
        m_labels = tuple(self.m_labels) or tuple(range(w.size))
        if len(m_labels) != w.size:
            raise ValueError("one label per point of M")
        if ec is None and not self.eval_labels:
            ec, e_labels = mc, m_labels
        else:
            n_eval = len(self.eval_labels) if self.eval_labels else ec.shape[0]
            e_labels = tuple(self.eval_labels) or tuple(range(n_eval))
            if ec is not None and ec.shape[0] != len(e_labels):
                raise ValueError("one label per evaluation point")
        object.__setattr__(self, "m_coords", mc)
        object.__setattr__(self, "eval_coords", ec)
        object.__setattr__(self, "m_labels", m_labels)
        object.__setattr__(self, "eval_labels", e_labels)

    @property
    def n_m(self) -> int:
        return self.weights.size

    @property
    def n_eval(self) -> int:
        return len(self.eval_labels)

    @classmethod
    def on_grid(cls, coords, weights=None):
        """``M`` and the evaluation points are the same coordinate list."""
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        if weights is None:
            weights = np.ones(coords.shape[0])
        return cls(weights, m_coords=coords)

    def distances(self) -> np.ndarray:
        if self.m_coords is None or self.eval_coords is None:
            raise ValueError("this kernel needs coordinates for M and the evaluation points")
        diff = self.eval_coords[:, None, :] - self.m_coords[None, :, :]
        return np.sqrt((diff**2).sum(axis=-1))


# kernels


class Kernel:
    def matrix(self, space: DiscretePotentialSpace) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> str:
        return type(self).__name__.lower()


@dataclass(frozen=True)
class Riesz(Kernel):
    """``gamma * |x - y|^(alpha - n)``."""

    alpha: float
    n: int
    gamma: float = 1.0
    k_max: float | None = DEFAULT_K_MAX

    def __post_init__(self):
        if not 0 < self.alpha < self.n:
            raise ValueError(f"Riesz kernel needs 0 < alpha < n, got alpha={self.alpha}, n={self.n}")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")

    def radial(self, r: float) -> float:
        if r == 0:
            if self.k_max is None:
                raise SingularKernel("Riesz kernel evaluated at coincident points")
            warnings.warn(SingularityCapped(f"Riesz kernel capped at {self.k_max:g}"), stacklevel=3)
            return self.k_max
        return self.gamma * r ** (self.alpha - self.n)

    def matrix(self, space):
        r = space.distances()
        zero = r == 0
        if zero.any():
            if self.k_max is None:
                raise SingularKernel(f"{int(zero.sum())} coincident pairs and no cap configured")
            warnings.warn(SingularityCapped(f"{int(zero.sum())} coincident pairs capped at {self.k_max:g}"), stacklevel=2)
        with np.errstate(divide="ignore"):
            out = self.gamma * np.where(zero, 1.0, r) ** (self.alpha - self.n)
        out[zero] = self.k_max if self.k_max is not None else np.inf
        return out

    def describe(self):
        return f"riesz alpha={self.alpha:g} n={self.n} gamma={self.gamma:g}"


def _bessel_exponent(u, r, alpha, n):
    return 0.5 * (alpha - n) * u - math.pi * r * r * np.exp(-u) - np.exp(u) / (4 * math.pi)


def bessel_integral(r: float, alpha: float, n: int, step: float = 0.25, cutoff: float = 60.0) -> float:
    """``int_0^inf t^((alpha-n)/2) exp(-pi r^2/t - t/(4 pi)) dt/t``.

    Substituting ``t = e^u`` leaves a smooth integrand with double
    exponential decay on both sides, integrated by the trapezoid rule on a
    window around its peak.  ``step`` is scaled by the peak's curvature.
    """
    if r < 0:
        raise ValueError("radius must be nonnegative")
    d = alpha - n
    if r == 0 and d <= 0:
        raise SingularKernel(f"Bessel kernel diverges at 0 for alpha={alpha} <= n={n}")
    v = math.pi * (d + math.sqrt(d * d + 4 * r * r))
    u0 = math.log(v)
    h0 = float(_bessel_exponent(u0, r, alpha, n))
    curvature = math.pi * r * r / v + v / (4 * math.pi)
    h = step / math.sqrt(max(1.0, curvature))

    def edge(direction):
        width = 1.0
        while _bessel_exponent(u0 + direction * width, r, alpha, n) > h0 - cutoff:
            width *= 1.5
        return u0 + direction * width

    lo, hi = edge(-1), edge(1)
    count = int(math.ceil((hi - lo) / h))
    u = lo + h * np.arange(count + 1)
    vals = np.exp(_bessel_exponent(u, r, alpha, n) - h0)
    total = h * (vals.sum() - 0.5 * (vals[0] + vals[-1]))
    return float(total * math.exp(h0))


@dataclass(frozen=True)
class Bessel(Kernel):
    """``a * int_0^inf t^((alpha-n)/2) exp(-pi|x|^2/t - t/(4 pi)) dt/t``."""

    alpha: float
    n: int
    a: float = 1.0
    step: float = 0.25
    k_max: float | None = DEFAULT_K_MAX

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("Bessel kernel needs alpha > 0")
        if self.a <= 0:
            raise ValueError("a must be positive")

    def radial(self, r: float, refine: int = 1) -> float:
        if r == 0 and self.alpha <= self.n:
            if self.k_max is None:
                raise SingularKernel("Bessel kernel evaluated at coincident points")
            warnings.warn(SingularityCapped(f"Bessel kernel capped at {self.k_max:g}"), stacklevel=3)
            return self.k_max
        return self.a * bessel_integral(r, self.alpha, self.n, self.step / refine)

    def matrix(self, space):
        r = space.distances()
        cache: dict[float, float] = {}
        out = np.empty_like(r)
        for idx, rv in np.ndenumerate(r):
            rv = float(rv)
            if rv not in cache:
                cache[rv] = self.radial(rv)
            out[idx] = cache[rv]
        return out

    def describe(self):
        return f"bessel alpha={self.alpha:g} n={self.n} a={self.a:g}"


def newtonian(n: int = 3, gamma: float = 1.0) -> Riesz:
    """The Newton kernel is the Riesz kernel with ``alpha = 2``; use with ``p = 2``."""
    return Riesz(2.0, n, gamma)


@dataclass(frozen=True)
class Constant(Kernel):
    value: float = 1.0

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("kernel values must be nonnegative")

    def matrix(self, space):
        return np.full((space.n_eval, space.n_m), float(self.value))

    def describe(self):
        return f"constant value={self.value:g}"


@dataclass(frozen=True)
class Diagonal(Kernel):
    """``g(x, y) = 1/nu_y`` when ``x`` and ``y`` carry the same label, else 0; so ``Gf = f``."""

    def matrix(self, space):
        index = {lab: j for j, lab in enumerate(space.m_labels)}
        out = np.zeros((space.n_eval, space.n_m))
        for i, lab in enumerate(space.eval_labels):
            j = index.get(lab)
            if j is not None:
                out[i, j] = 1.0 / space.weights[j]
        return out

    def describe(self):
        return "diagonal"


@dataclass(frozen=True, eq=False)
class ExplicitMatrix(Kernel):
    values: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("kernel values must be finite and nonnegative")
        object.__setattr__(self, "values", v)

    def matrix(self, space):
        if self.values.shape != (space.n_eval, space.n_m):
            raise ValueError(f"matrix shape {self.values.shape} does not match ({space.n_eval}, {space.n_m})")
        return self.values

    def describe(self):
        return f"explicit {self.values.shape[0]}x{self.values.shape[1]}"


def kernel_eval(kernel: Kernel, x, y, space: DiscretePotentialSpace | None = None) -> float:
    """Kernel value at a pair of points.

    Radial kernels take coordinates; ``Diagonal`` and ``ExplicitMatrix`` take
    an evaluation index and an ``M`` index (``Diagonal`` also needs ``space``).
    """
    if isinstance(kernel, (Riesz, Bessel)):
        r = float(np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)))
        return kernel.radial(r)
    if isinstance(kernel, Constant):
        return float(kernel.value)
    if isinstance(kernel, ExplicitMatrix):
        return float(kernel.values[x, y])
    if isinstance(kernel, Diagonal):
        if space is None:
            raise ValueError("diagonal kernel needs the potential space for its weights")
        return float(kernel.matrix(space)[x, y])
    raise TypeError(f"unsupported kernel {kernel!r}")


def apply_potential(space: DiscretePotentialSpace, kernel: Kernel, f, matrix: np.ndarray | None = None) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise ValueError("densities must be nonnegative")
    K = kernel.matrix(space) if matrix is None else matrix
    return K @ (space.weights * f)


# solver


@dataclass(frozen=True)
class PotentialFunction:
    values: np.ndarray
    achieved_norm: float
    kkt_residual: float


@dataclass(frozen=True)
class Certificate:
    dual_bound: float
    duality_gap: float
    primal_infeasibility: float
    barrier_t: float
    newton_steps: int
    polished: bool
    multipliers: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class CapacityResult:
    value: float
    potential: PotentialFunction
    certificate: Certificate
    trace: tuple = ()


def _as_index_set(E, n) -> tuple[int, ...]:
    idx = sorted({int(i) for i in E})
    if idx and not (0 <= idx[0] and idx[-1] < n):
        raise IndexError(f"evaluation index out of range 0..{n - 1}")
    return tuple(idx)


def dual_bound(A: np.ndarray, nu: np.ndarray, p: float, lam: np.ndarray) -> float:
    """Lagrangian dual function at ``lam >= 0`` (a lower bound on the capacity)."""
    lam = np.maximum(lam, 0.0)
    s = A.T @ lam
    if p == 1.0:
        scale = max(1.0, float(np.max(s / nu)) if s.size else 1.0)
        return float(lam.sum() / scale)
    pos = s > 0
    fstar = np.zeros_like(s)
    fstar[pos] = (s[pos] / (p * nu[pos])) ** (1.0 / (p - 1.0))
    return float(lam.sum() - (1.0 - 1.0 / p) * (s * fstar).sum())


class PotentialProblem:
    """A potential space, kernel and exponent with the kernel matrix computed once.

    Capacities are memoized per evaluation set.
    """

    def __init__(self, space: DiscretePotentialSpace, kernel: Kernel, p: float, tol: float = 1e-8):
        if p < 1:
            raise ValueError("p must be >= 1")
        if tol <= 0:
            raise ValueError("tol must be positive")
        self.space, self.kernel, self.p, self.tol = space, kernel, float(p), float(tol)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            self.matrix = np.asarray(kernel.matrix(space), dtype=float)
        self.flags = tuple(str(w.message) for w in caught)
        if np.any(self.matrix < 0):
            raise ValueError("kernel produced negative values")
        self._cache: dict[tuple[int, ...], CapacityResult] = {}

    def potential(self, f) -> np.ndarray:
        return self.matrix @ (self.space.weights * np.asarray(f, dtype=float))

    def capacity(self, E: Iterable[int]) -> CapacityResult:
        key = _as_index_set(E, self.space.n_eval)
        if key not in self._cache:
            self._cache[key] = solve_capacity(self.matrix, self.space.weights, self.p, key, self.tol)
        return self._cache[key]

    def tilde(self, A: Iterable[int]) -> frozenset[int]:
        A = frozenset(_as_index_set(A, self.space.n_eval))
        if not A:
            return frozenset()
        res = self.capacity(A)
        G = self.potential(res.potential.values)
        return A | frozenset(int(i) for i in np.nonzero(G >= 1 - self.tol)[0])


def _newton_center(t, f, A, nu, p, max_steps):
    """Minimize ``t*phi(f) - sum log(Af - 1) - sum log f`` from a strictly feasible ``f``."""
    steps = 0

    def merit(x):
        s = A @ x - 1
        if np.any(x <= 0) or np.any(s <= 0):
            return np.inf
        return t * (nu * x**p).sum() - np.log(s).sum() - np.log(x).sum()

    current = merit(f)
    while steps < min(max_steps, 60):
        s = A @ f - 1
        inv_s, inv_f = 1.0 / s, 1.0 / f
        grad = t * p * nu * f ** (p - 1) - A.T @ inv_s - inv_f
        hdiag = inv_f**2
        if p != 1.0:
            hdiag = hdiag + t * p * (p - 1) * nu * f ** (p - 2)
        H = (A.T * inv_s**2) @ A + np.diag(hdiag)
        d = 1.0 / np.sqrt(np.diag(H))
        Hs = H * d[:, None] * d[None, :]
        try:
            step = -d * np.linalg.solve(Hs, d * grad)
        except np.linalg.LinAlgError:
            step = -d * np.linalg.lstsq(Hs, d * grad, rcond=None)[0]
        decrement = float(-grad @ step)
        steps += 1
        if decrement / 2 <= 1e-9:
            break
        # largest step keeping f and the slacks positive
        alpha = 1.0
        neg = step < 0
        if neg.any():
            alpha = min(alpha, 0.99 * float(np.min(-f[neg] / step[neg])))
        ds = A @ step
        neg = ds < 0
        if neg.any():
            alpha = min(alpha, 0.99 * float(np.min(-s[neg] / ds[neg])))
        while alpha > 1e-14:
            cand = f + alpha * step
            value = merit(cand)
            if value <= current - 0.25 * alpha * decrement:
                break
            alpha *= 0.5
        else:
            break
        f, current = cand, value
    return f, steps


def _polish(f, A, nu, p, t):
    """Solve the equality-constrained problem on the detected active set.

    Returns ``(f, lam)`` or ``None`` when the active set guess fails its checks.
    """
    s = A @ f - 1
    active = np.nonzero(s * s < 1.0 / t)[0]
    free = np.nonzero(f * f > 1.0 / t)[0]
    if len(active) == 0 or len(free) == 0:
        return None
    Asf = A[np.ix_(active, free)]
    x = f[free].copy()
    lam = 1.0 / (t * np.maximum(s[active], 1e-300))
    nf, na = len(free), len(active)
    for _ in range(60):
        g = p * nu[free] * x ** (p - 1)
        r1 = g - Asf.T @ lam
        r2 = Asf @ x - 1
        if max(np.abs(r1).max(), np.abs(r2).max()) <= 1e-15 * max(1.0, np.abs(g).max()):
            break
        H = np.diag(p * (p - 1) * nu[free] * x ** (p - 2))
        KKT = np.block([[H, -Asf.T], [Asf, np.zeros((na, na))]])
        rhs = -np.concatenate([r1, r2])
        sol = np.linalg.lstsq(KKT, rhs, rcond=None)[0]
        dx, dl = sol[:nf], sol[nf:]
        alpha = 1.0
        neg = dx < 0
        if neg.any():
            alpha = min(1.0, 0.9 * float(np.min(-x[neg] / dx[neg])))
        x, lam = x + alpha * dx, lam + alpha * dl
    if np.any(x <= 0) or np.any(lam < -1e-12):
        return None
    out = np.zeros_like(f)
    out[free] = x
    full_lam = np.zeros(A.shape[0])
    full_lam[active] = np.maximum(lam, 0.0)
    return out, full_lam


def _polish_lp(A, nu):
    """``p = 1``: the problem is a linear program; solve it by simplex and read off the duals."""
    res = linprog(nu, A_ub=-A, b_ub=-np.ones(A.shape[0]), bounds=(0, None), method="highs")
    if res.status != 0:
        return None
    return np.maximum(res.x, 0.0), np.maximum(-res.ineqlin.marginals, 0.0)


def solve_capacity(K: np.ndarray, nu: np.ndarray, p: float, E: Sequence[int], tol: float = 1e-8,
                   start: np.ndarray | None = None, max_newton: int = 500, mu: float = 20.0,
                   keep_trace: bool = False) -> CapacityResult:
    """Minimize ``sum nu f^p`` over ``f >= 0`` with ``(K @ (nu f))_i >= 1`` for ``i`` in ``E``."""
    nu = np.asarray(nu, dtype=float)
    m = nu.size
    E = list(E)
    if not E:
        zero = np.zeros(m)
        cert = Certificate(0.0, 0.0, 0.0, 0.0, 0, False, np.zeros(0))
        return CapacityResult(0.0, PotentialFunction(zero, 0.0, 0.0), cert)
    A = K[E, :] * nu[None, :]
    reach = A.sum(axis=1)
    if np.any(reach <= 0):
        bad = [E[i] for i in np.nonzero(reach <= 0)[0]]
        raise Infeasible(f"evaluation points {bad} have identically zero kernel rows")

    f = np.full(m, 2.0 / reach.min())
    if start is not None:
        cand = np.maximum(np.asarray(start, dtype=float), 0) + 1e-3 * f
        lift = max(1.0, 2.0 / float(np.min(A @ cand)))
        f = cand * lift
    n_barrier = len(E) + m
    phi = float((nu * f**p).sum())
    t = max(n_barrier / max(phi, 1e-12), 1e-6)
    target = tol * 0.1
    steps = 0
    trace = []

    def residual(x, lam):
        obj = float((nu * x**p).sum())
        infeas = float(max(0.0, np.max(1.0 - A @ x)))
        gap = max(0.0, obj - dual_bound(A, nu, p, lam))
        return obj, infeas, gap

    polished = False
    while True:
        f, used = _newton_center(t, f, A, nu, p, max_newton - steps)
        steps += used
        lam = 1.0 / (t * (A @ f - 1))
        obj, infeas, gap = residual(f, lam)
        if keep_trace:
            trace.append((len(trace), obj, t, max(infeas, gap)))
        if n_barrier / t <= target or gap <= target or steps >= max_newton:
            break
        # once roughly centered, an exact solve on the guessed active set usually finishes the job
        if p > 1.0 and n_barrier / t <= 1e-3 * max(1.0, obj):
            pol = _polish(f, A, nu, p, t)
            if pol is not None:
                pobj, pinf, pgap = residual(*pol)
                if pinf <= 1e-12 and pgap <= target:
                    (f, lam), obj, infeas, gap, polished = pol, pobj, pinf, pgap, True
                    break
        t *= mu

    if not polished:
        pol = _polish(f, A, nu, p, t) if p > 1.0 else _polish_lp(A, nu)
        if pol is not None:
            pobj, pinf, pgap = residual(*pol)
            if pinf <= 1e-12 and pgap <= gap:
                (f, lam), obj, infeas, gap, polished = pol, pobj, pinf, pgap, True
    kkt = max(infeas, gap)
    if keep_trace:
        trace.append((len(trace), obj, t, kkt))
    result = CapacityResult(obj, PotentialFunction(f, obj, kkt),
                            Certificate(obj - gap, gap, infeas, t, steps, polished, lam), tuple(trace))
    if kkt > tol:
        raise NoConvergence(f"KKT residual {kkt:.3e} above tolerance {tol:.1e}", result)
    return result


def capacity_gp(space: DiscretePotentialSpace, kernel: Kernel, p: float, E: Iterable[int], tol: float = 1e-8,
                start=None, keep_trace: bool = False) -> CapacityResult:
    if p < 1:
        raise ValueError("p must be >= 1")
    K = np.asarray(kernel.matrix(space), dtype=float)
    return solve_capacity(K, space.weights, p, _as_index_set(E, space.n_eval), tol, start=start, keep_trace=keep_trace)


def capacity_qp(space: DiscretePotentialSpace, kernel: Kernel, E: Iterable[int]) -> tuple[float, np.ndarray]:
    """The ``p = 2`` capacity as a quadratic program, solved by cvxopt's interior point QP.

    Used as an independent cross-check of the barrier solver.
    """
    from cvxopt import matrix, solvers

    E = _as_index_set(E, space.n_eval)
    nu = space.weights
    m = nu.size
    if not E:
        return 0.0, np.zeros(m)
    A = np.asarray(kernel.matrix(space), dtype=float)[list(E), :] * nu[None, :]
    if np.any(A.sum(axis=1) <= 0):
        raise Infeasible("some evaluation point has an identically zero kernel row")
    P = matrix(np.diag(2.0 * nu))
    q = matrix(np.zeros(m))
    G = matrix(np.vstack([-A, -np.eye(m)]))
    h = matrix(np.concatenate([-np.ones(len(E)), np.zeros(m)]))
    opts = {"show_progress": False, "abstol": 1e-12, "reltol": 1e-12, "feastol": 1e-12, "maxiters": 200}
    sol = solvers.qp(P, q, G, h, options=opts)
    f = np.maximum(np.array(sol["x"]).reshape(-1), 0.0)
    return float((nu * f * f).sum()), f


def potential_tilde(space: DiscretePotentialSpace, kernel: Kernel, p: float, A: Iterable[int], tol: float = 1e-8) -> frozenset[int]:
    """``A`` together with the points where the potential of ``f_A`` reaches ``1 - tol``."""
    return PotentialProblem(space, kernel, p, tol).tilde(A)


@dataclass(frozen=True)
class StabilityVerdict:
    A: frozenset
    B: frozenset
    tilde_A: frozenset
    c_A: float
    c_B: float
    c_rest: float
    forward_ok: bool
    backward_ok: bool

    @property
    def ok(self) -> bool:
        return self.forward_ok and self.backward_ok


def _verdict(problem: PotentialProblem, A, B, tol) -> StabilityVerdict:
    A, B = frozenset(A), frozenset(B)
    if not A <= B:
        raise ValueError("stability check needs A to be a subset of B")
    tilde = problem.tilde(A)
    c_a = problem.capacity(A).value
    c_b = problem.capacity(B).value
    c_rest = problem.capacity(B - tilde).value
    # c(B \ tilde A) = 0  =>  c(A) = c(B)
    forward = not (c_rest <= tol) or abs(c_b - c_a) <= 10 * tol
    # c(A) < c(B)  =>  c(B \ tilde A) > 0
    backward = not (c_b > c_a + 10 * tol) or c_rest > tol
    return StabilityVerdict(A, B, tilde, c_a, c_b, c_rest, forward, backward)


def stability_biconditional(space: DiscretePotentialSpace, kernel: Kernel, p: float, A, B, tol: float = 1e-6) -> StabilityVerdict:
    """Check both directions of ``c(A) < c(B)  <=>  c(B \\ tilde A) > 0`` for ``A <= B``.

    Capacities are solved to ``tol / 100`` so that solver error stays well
    inside the comparison thresholds.
    """
    return _verdict(PotentialProblem(space, kernel, p, tol / 100), A, B, tol)


def stability_sweep(space: DiscretePotentialSpace, kernel: Kernel, p: float, tol: float = 1e-6,
                    max_points: int = 8) -> list[StabilityVerdict]:
    """Every pair ``A <= B`` of evaluation-point sets."""
    n = space.n_eval
    if n > max_points:
        raise ValueError(f"exhaustive sweep limited to {max_points} evaluation points")
    problem = PotentialProblem(space, kernel, p, tol / 100)
    out = []
    for mask_b in range(1 << n):
        B = [i for i in range(n) if mask_b >> i & 1]
        for r in range(len(B) + 1):
            for A in itertools.combinations(B, r):
                out.append(_verdict(problem, A, B, tol))
    return out


def potential_handle(problem: PotentialProblem, label: str = ""):
    """``c_{g,p}`` on subsets of the evaluation points, seen as a one-level tree."""
    from .handles import SubmeasureHandle
    from .space import ProductTreeSpace

    space = ProductTreeSpace((problem.space.n_eval,))
    return SubmeasureHandle(lambda A: problem.capacity(A.indices()).value, space, label,
                            frozenset({"monotone", "subadditive"}), source=problem)

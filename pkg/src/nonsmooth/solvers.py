"""Iterative methods: subgradient descent variants and the MM solver.

The subgradient method is not a descent method, so every trace records the
best objective seen alongside the raw iterates.  Step schedules are plain
value objects; oracles pair an objective evaluator with a map returning one
member of the subdifferential at each point.

For least-squares piecewise-affine regression (LSPAR) this module provides
the mean-square objective, the pseudo-subgradient that pretends the basic
chain rule holds (back-propagation style, smallest index winning argmax
ties), the ridge-regularized least-squares subproblem solver, and a
non-monotone majorization-minimization loop that terminates with an exact
d-stationarity certificate.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .expr import (
    Abs,
    Affine,
    Builtin1D,
    BUILTINS,
    Const,
    Expr,
    Max,
    Min,
    Scale,
    Sq,
    Sum,
    Var,
    evaluate,
)
from .polyhedra import Ball, Box, HPolyhedron
from .stationarity import DStatCertificate, lspar_d_stationarity_check

__all__ = [
    "Constant",
    "Diminishing",
    "Geometric",
    "Polyak",
    "StepSchedule",
    "SubgradOracle",
    "oracle_from_expr",
    "SolverTrace",
    "subgradient_method",
    "projected_subgradient",
    "project",
    "ProjectionError",
    "ridge_ls_solve",
    "lspar_objective",
    "lspar_pseudo_subgrad",
    "lspar_oracle",
    "MMParams",
    "mm_lspar",
]


class ProjectionError(Exception):
    pass


# ---------------------------------------------------------------------------
# Step schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    alpha: float

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("constant step must be positive")

    def step(self, k: int, f_val: float, gnorm: float) -> float:
        return self.alpha


@dataclass(frozen=True)
class Diminishing:
    """alpha_k = c / sqrt(k + 1)."""

    c: float

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("diminishing coefficient must be positive")

    def step(self, k: int, f_val: float, gnorm: float) -> float:
        return self.c / math.sqrt(k + 1.0)


@dataclass(frozen=True)
class Geometric:
    """alpha_k = alpha0 * q^k with 0 < q < 1."""

    alpha0: float
    q: float

    def __post_init__(self):
        if self.alpha0 <= 0 or not (0.0 < self.q < 1.0):
            raise ValueError("geometric schedule needs alpha0 > 0 and q in (0,1)")

    def step(self, k: int, f_val: float, gnorm: float) -> float:
        return self.alpha0 * self.q**k


@dataclass(frozen=True)
class Polyak:
    """alpha_k = (f(x_k) - f_star + margin) / ||s_k||^2, clipped at 0."""

    f_star: float
    margin: float = 0.0

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError("polyak margin must be >= 0")

    def step(self, k: int, f_val: float, gnorm: float) -> float:
        gap = f_val - self.f_star + self.margin
        if gap <= 0 or gnorm <= 0:
            return 0.0
        return gap / (gnorm * gnorm)


StepSchedule = Union[Constant, Diminishing, Geometric, Polyak]


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubgradOracle:
    """Objective evaluator plus a map returning one subgradient element."""

    fn: Callable[[np.ndarray], float]
    subgrad: Callable[[np.ndarray], np.ndarray]


def oracle_from_expr(e: Expr) -> SubgradOracle:
    """Oracle for an expression with a deterministic subgradient tie rule.

    Argmax/argmin ties resolve to the smallest child index; the Abs node at
    zero contributes 0 (the midpoint of its subdifferential interval), so
    Sign(0) = 0.  Builtins use their registry derivative where it exists.
    """

    def sg(x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        n = x.size

        def rec(node: Expr):
            if isinstance(node, Const):
                return node.c, np.zeros(n)
            if isinstance(node, Var):
                g = np.zeros(n)
                g[node.i] = 1.0
                return float(x[node.i]), g
            if isinstance(node, Affine):
                a = np.asarray(node.a)
                return float(a @ x + node.b), a.copy()
            if isinstance(node, Sum):
                v, g = 0.0, np.zeros(n)
                for t in node.terms:
                    vt, gt = rec(t)
                    v += vt
                    g += gt
                return v, g
            if isinstance(node, Scale):
                v, g = rec(node.child)
                return node.c * v, node.c * g
            if isinstance(node, (Max, Min)):
                pairs = [rec(t) for t in node.terms]
                vals = [v for v, _ in pairs]
                v = max(vals) if isinstance(node, Max) else min(vals)
                i = vals.index(v)  # smallest index wins ties
                return v, pairs[i][1]
            if isinstance(node, Abs):
                v, g = rec(node.child)
                if v > 0:
                    return v, g
                if v < 0:
                    return -v, -g
                return 0.0, np.zeros(n)  # Sign(0) -> 0
            if isinstance(node, Sq):
                v, g = rec(node.child)
                return v * v, 2.0 * v * g
            if isinstance(node, Builtin1D):
                t0, g = rec(node.child)
                spec = BUILTINS[node.name]
                dv = spec.deriv(t0)
                if dv is None:
                    dv = spec.one_sided(t0, 1)
                if dv is None:
                    dv = 0.0
                return spec.value(t0), dv * g
            raise TypeError(f"unexpected node {node!r}")

        return rec(e)[1]

    return SubgradOracle(fn=lambda x: evaluate(e, np.atleast_1d(x)), subgrad=sg)


# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------


@dataclass
class SolverTrace:
    """Iterate/objective/step history of one solver run."""

    objectives: np.ndarray
    steps: np.ndarray
    best_f: float
    best_x: np.ndarray
    final_x: np.ndarray
    termination: str
    seed: Optional[int] = None
    wall_s: float = 0.0
    walls: Optional[np.ndarray] = None  # elapsed seconds at each iterate
    dists: Optional[np.ndarray] = None
    iterates: Optional[list] = None
    extras: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return int(self.objectives.size)


def _dist_fn(ref):
    if ref is None:
        return None
    if callable(ref):
        return ref
    ref = np.asarray(ref, dtype=float)
    return lambda x: float(np.linalg.norm(np.asarray(x) - ref))


# ---------------------------------------------------------------------------
# Subgradient methods
# ---------------------------------------------------------------------------


def subgradient_method(
    oracle: SubgradOracle,
    x0,
    schedule: StepSchedule,
    max_iter: int = 1000,
    stop_tol: float = 0.0,
    ref=None,
    record_iterates: bool = False,
) -> SolverTrace:
    """x_{k+1} = x_k - alpha_k s_k with s_k from the oracle.

    Not a descent method; the trace records the best objective seen.  Stops
    early when ||s_k|| <= stop_tol (termination SMALL_SUBGRADIENT) and
    otherwise runs ``max_iter`` steps.  ``ref`` (point or callable) adds a
    per-iterate distance column.
    """
    x = np.array(x0, dtype=float)
    dist = _dist_fn(ref)
    fs, steps, dists, walls = [], [], [], []
    iterates = [] if record_iterates else None
    best_f, best_x = math.inf, x.copy()
    termination = "MAX_ITER"
    t0 = time.perf_counter()
    for k in range(max_iter):
        f = float(oracle.fn(x))
        fs.append(f)
        walls.append(time.perf_counter() - t0)
        if dist is not None:
            dists.append(dist(x))
        if record_iterates:
            iterates.append(x.copy())
        if f < best_f:
            best_f, best_x = f, x.copy()
        s = np.asarray(oracle.subgrad(x), dtype=float)
        gnorm = float(np.linalg.norm(s))
        if gnorm <= stop_tol:
            steps.append(0.0)
            termination = "SMALL_SUBGRADIENT"
            break
        alpha = schedule.step(k, f, gnorm)
        steps.append(alpha)
        x = x - alpha * s
    return SolverTrace(
        objectives=np.array(fs),
        steps=np.array(steps),
        best_f=best_f,
        best_x=best_x,
        final_x=x,
        termination=termination,
        wall_s=time.perf_counter() - t0,
        walls=np.array(walls),
        dists=np.array(dists) if dist is not None else None,
        iterates=iterates,
    )


def project(C: Union[Box, Ball, HPolyhedron], x, max_sweeps: int = 20000) -> np.ndarray:
    """Euclidean projection onto a box, ball, or halfspace intersection.

    Boxes and balls are closed form; halfspace intersections use Dykstra's
    alternating projections with an iteration cap.
    """
    x = np.asarray(x, dtype=float).copy()
    if isinstance(C, Box):
        return np.clip(x, C.lo, C.hi)
    if isinstance(C, Ball):
        d = x - C.center
        nrm = float(np.linalg.norm(d))
        if nrm <= C.radius:
            return x
        return C.center + (C.radius / nrm) * d
    if isinstance(C, HPolyhedron):
        A, b = C.A, C.b
        norms2 = np.sum(A * A, axis=1)
        y = x.copy()
        incr = np.zeros((A.shape[0], x.size))
        for sweep in range(max_sweeps):
            max_move = 0.0
            for i in range(A.shape[0]):
                z = y + incr[i]
                viol = float(A[i] @ z - b[i])
                if viol > 0:
                    ynew = z - (viol / norms2[i]) * A[i]
                else:
                    ynew = z
                incr[i] = z - ynew
                max_move = max(max_move, float(np.abs(ynew - y).max()))
                y = ynew
            if np.all(A @ y - b <= 1e-12) and max_move <= 1e-13:
                return y
        resid = float(np.max(A @ y - b))
        if resid <= 1e-9:
            return y
        raise ProjectionError(
            f"projection did not converge in {max_sweeps} sweeps; residual {resid:.3e}"
        )
    raise ProjectionError(f"no projector for {type(C).__name__}")


def projected_subgradient(
    oracle: SubgradOracle,
    projector: Union[Box, Ball, HPolyhedron],
    x0,
    schedule: StepSchedule,
    max_iter: int = 1000,
    stop_tol: float = 0.0,
    ref=None,
) -> SolverTrace:
    """x_{k+1} = Pi_C(x_k - alpha_k s_k); every iterate feasible to 1e-9."""
    x = project(projector, np.array(x0, dtype=float))
    dist = _dist_fn(ref)
    fs, steps, dists, walls = [], [], [], []
    best_f, best_x = math.inf, x.copy()
    termination = "MAX_ITER"
    t0 = time.perf_counter()
    for k in range(max_iter):
        f = float(oracle.fn(x))
        fs.append(f)
        walls.append(time.perf_counter() - t0)
        if dist is not None:
            dists.append(dist(x))
        if f < best_f:
            best_f, best_x = f, x.copy()
        s = np.asarray(oracle.subgrad(x), dtype=float)
        gnorm = float(np.linalg.norm(s))
        if gnorm <= stop_tol:
            steps.append(0.0)
            termination = "SMALL_SUBGRADIENT"
            break
        alpha = schedule.step(k, f, gnorm)
        steps.append(alpha)
        x = project(projector, x - alpha * s)
    return SolverTrace(
        objectives=np.array(fs),
        steps=np.array(steps),
        best_f=best_f,
        best_x=best_x,
        final_x=x,
        termination=termination,
        wall_s=time.perf_counter() - t0,
        walls=np.array(walls),
        dists=np.array(dists) if dist is not None else None,
    )


# ---------------------------------------------------------------------------
# Ridge-regularized least squares (MM subproblem)
# ---------------------------------------------------------------------------


def ridge_ls_solve(X, y, c: float, anchor, nsamples: Optional[int] = None) -> np.ndarray:
    """Unique minimizer of (1/2N)||y - X w||^2 + (c/2)||w - anchor||^2.

    ``N`` defaults to the number of rows of X (pass ``nsamples`` to share a
    global scaling across blocks).  Solved by the normal equations with a
    symmetric positive-definite solve; the residual of the normal equations
    is verified to 1e-10.
    """
    if c <= 0:
        raise ValueError("ridge coefficient must be positive")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    anchor = np.asarray(anchor, dtype=float).ravel()
    N = X.shape[0] if nsamples is None else int(nsamples)
    n = anchor.size
    if X.size == 0:
        return anchor.copy()
    scale = 1.0 / max(N, 1)
    H = scale * (X.T @ X) + c * np.eye(n)
    rhs = scale * (X.T @ y) + c * anchor
    w = np.linalg.solve(H, rhs)
    resid = float(np.linalg.norm(H @ w - rhs))
    if resid > 1e-10 * max(1.0, float(np.linalg.norm(rhs))):
        raise ArithmeticError(f"normal equations residual too large: {resid:.3e}")
    return w


# ---------------------------------------------------------------------------
# LSPAR: objective, pseudo-subgradient, MM
# ---------------------------------------------------------------------------


def lspar_objective(X, y, W) -> float:
    """(1/2N) sum_s (y_s - max_i w_i^T x_s)^2."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    W = np.asarray(W, dtype=float)
    r = (X @ W).max(axis=1) - y
    return float(0.5 * np.mean(r * r))


def lspar_pseudo_subgrad(X, y, W) -> np.ndarray:
    """Chain-rule-pretending subgradient of the LSPAR objective.

    grad w.r.t. w_i = (1/N) sum_s (g_s(W) - y_s) x_s [i = argmax_j w_j^T x_s]
    with the smallest index winning argmax ties.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    W = np.asarray(W, dtype=float)
    N = X.shape[0]
    Z = X @ W
    winners = Z.argmax(axis=1)  # numpy argmax returns the first (smallest) index
    resid = Z[np.arange(N), winners] - y
    G = np.zeros_like(W)
    np.add.at(G.T, winners, (resid / N)[:, None] * X)
    return G


def lspar_oracle(dataset) -> SubgradOracle:
    X = np.asarray(dataset.X, dtype=float)
    y = np.asarray(dataset.y, dtype=float).ravel()

    return SubgradOracle(
        fn=lambda W: lspar_objective(X, y, W),
        subgrad=lambda W: lspar_pseudo_subgrad(X, y, W),
    )


def _kbest_selections(costs: list, cap: int):
    """Index tuples over the choice lists, in increasing total cost.

    ``costs`` is a list of (cost, choice) lists, each sorted ascending.
    Standard best-first enumeration over the product lattice.
    """
    if not costs:
        yield ()
        return
    start = tuple(0 for _ in costs)
    total0 = sum(c[0][0] for c in costs)
    heap = [(total0, start)]
    seen = {start}
    emitted = 0
    while heap and emitted < cap:
        total, idx = heapq.heappop(heap)
        yield tuple(costs[j][i][1] for j, i in enumerate(idx))
        emitted += 1
        for j in range(len(costs)):
            if idx[j] + 1 < len(costs[j]):
                nxt = idx[:j] + (idx[j] + 1,) + idx[j + 1 :]
                if nxt not in seen:
                    seen.add(nxt)
                    delta = costs[j][idx[j] + 1][0] - costs[j][idx[j]][0]
                    heapq.heappush(heap, (total + delta, nxt))


@dataclass(frozen=True)
class MMParams:
    """Knobs of the non-monotone MM loop (defaults are the frozen choices)."""

    eps0: Optional[float] = None  # default 0.1 * mean|y|
    c0: float = 1.0
    c_min: float = 1e-9
    eta: float = 1e-4
    shrink: float = 0.5
    max_outer: int = 200
    selection_cap: int = 256
    dstat_tol: float = 1e-6


def mm_lspar(dataset, W0, params: MMParams = MMParams()) -> tuple:
    """Majorization-minimization for LSPAR with a d-stationarity certificate.

    Outer loop: build eps-active branch sets, enumerate candidate branch
    selections for ambiguous samples (cheapest activity margins first, up to
    ``selection_cap``), solve one ridge-regularized least-squares surrogate
    per candidate, and accept the best candidate when the true objective
    decreases by at least eta * ||delta W||^2.  When no candidate passes,
    the exact d-stationarity test either certifies termination or eps
    shrinks and the proximal weight grows.

    Returns (trace, certificate); certificate is the d-stationarity record
    at the final iterate in every termination path.
    """
    X = np.asarray(dataset.X, dtype=float)
    y = np.asarray(dataset.y, dtype=float).ravel()
    N, n = X.shape
    W = np.array(W0, dtype=float)
    k = W.shape[1]
    if n * k > 16:
        raise ValueError("mm_lspar supports k*n <= 16")
    eps = params.eps0 if params.eps0 is not None else 0.1 * float(np.mean(np.abs(y)))
    eps = max(eps, 1e-12)
    c = params.c0
    fs = [lspar_objective(X, y, W)]
    steps: list = []
    walls: list = [0.0]
    t0 = time.perf_counter()
    termination = "MAX_ITER"
    cert: Optional[DStatCertificate] = None
    for outer in range(params.max_outer):
        f_cur = fs[-1]
        Z = X @ W
        g = Z.max(axis=1)
        margins = g[:, None] - Z  # >= 0
        active = margins <= eps
        ambiguous = [s for s in range(N) if active[s].sum() > 1]
        assign_base = Z.argmax(axis=1)
        cost_lists = []
        for s in ambiguous:
            choices = sorted(
                (float(margins[s, i]), int(i)) for i in np.flatnonzero(active[s])
            )
            cost_lists.append(choices)
        best_candidate = None
        best_f = math.inf
        for combo in _kbest_selections(cost_lists, params.selection_cap):
            assign = assign_base.copy()
            for s, i in zip(ambiguous, combo):
                assign[s] = i
            Wtry = np.empty_like(W)
            for i in range(k):
                rows = assign == i
                Wtry[:, i] = ridge_ls_solve(
                    X[rows], y[rows], c, W[:, i], nsamples=N
                )
            ftry = lspar_objective(X, y, Wtry)
            if ftry < best_f:
                best_f = ftry
                best_candidate = Wtry
        delta = (
            float(np.linalg.norm(best_candidate - W) ** 2)
            if best_candidate is not None
            else 0.0
        )
        if best_candidate is not None and f_cur - best_f >= params.eta * delta and best_f < f_cur:
            W = best_candidate
            fs.append(best_f)
            walls.append(time.perf_counter() - t0)
            steps.append(math.sqrt(delta))
            # successful steps relax the proximal damping so a stable branch
            # assignment converges at the rate of its least-squares subproblem
            c = max(params.c_min, 0.5 * c)
            continue
        cert = lspar_d_stationarity_check(dataset, W, tol=params.dstat_tol)
        if cert.is_d_stationary:
            termination = "CONVERGED"
            break
        eps *= params.shrink
        c *= 2.0
    if termination == "MAX_ITER":
        cert = lspar_d_stationarity_check(dataset, W, tol=params.dstat_tol)
    trace = SolverTrace(
        objectives=np.array(fs),
        steps=np.array(steps),
        best_f=float(np.min(fs)),
        best_x=W.copy(),
        final_x=W.copy(),
        termination=termination,
        wall_s=time.perf_counter() - t0,
        walls=np.array(walls),
        extras={"eps_final": eps, "c_final": c, "certificate": cert.is_d_stationary},
    )
    return trace, cert

"""Numeric sampling oracles for general locally Lipschitz functions.

These accept any evaluator (including registry builtins the exact engine
refuses) and report diagnostics instead of silently returning garbage:
difference-quotient estimates carry a convergence flag, and set estimates
carry their sampling parameters and a per-rung trace.  All sampling is
seeded through :mod:`nonsmooth.rng`, so results are reproducible
bit-for-bit.
"""

from __future__ import annotations

import math
from typing import Callable, Optional, Sequence

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
from .polyhedra import SetUnion, conv_hull, contains, set_distance
from .rng import make_rng
from .subdiff import DirDerivValue, SubdiffKind, SubdiffSet

__all__ = [
    "fd_dir_deriv",
    "sampled_clarke_dd",
    "gradient_sampling",
    "sampled_c_stationarity",
    "as_evaluator",
    "as_gradient_oracle",
    "default_schedule",
]

DEFAULT_SEED = 42


def default_schedule(k_lo: int = 8, k_hi: int = 40) -> np.ndarray:
    """The default step schedule t_k = 2^-k, k = k_lo .. k_hi."""
    return np.array([2.0 ** -k for k in range(k_lo, k_hi + 1)])


def as_evaluator(e: Expr) -> Callable[[np.ndarray], float]:
    """Plain float evaluator for an expression."""

    def f(x) -> float:
        return evaluate(e, np.atleast_1d(np.asarray(x, dtype=float)))

    return f


def as_gradient_oracle(e: Expr) -> Callable[[np.ndarray], Optional[np.ndarray]]:
    """Almost-everywhere gradient oracle for an expression.

    Returns the gradient where the expression is differentiable and ``None``
    at kinks (non-singleton activity, Abs at zero, builtin non-smooth
    points).  Builtins contribute via their registry derivative.
    """

    def grad(x) -> Optional[np.ndarray]:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        n = x.size

        def rec(node: Expr):
            if isinstance(node, Builtin1D):
                t0, g = rec(node.child)
                spec = BUILTINS[node.name]
                if any(t0 == p for p in spec.nondiff_points):
                    raise _Kink()
                dv = spec.deriv(t0)
                if dv is None:
                    raise _Kink()
                return spec.value(t0), dv * g
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
                vs, gs = zip(*(rec(t) for t in node.terms))
                return float(sum(vs)), np.sum(gs, axis=0)
            if isinstance(node, Scale):
                v, g = rec(node.child)
                return node.c * v, node.c * g
            if isinstance(node, (Max, Min)):
                pairs = [rec(t) for t in node.terms]
                vals = [v for v, _ in pairs]
                v = max(vals) if isinstance(node, Max) else min(vals)
                act = [i for i, vv in enumerate(vals) if vv == v]
                if len(act) > 1:
                    raise _Kink()
                return v, pairs[act[0]][1]
            if isinstance(node, Abs):
                v, g = rec(node.child)
                if v == 0.0:
                    raise _Kink()
                return abs(v), (g if v > 0 else -g)
            if isinstance(node, Sq):
                v, g = rec(node.child)
                return v * v, 2.0 * v * g
            raise TypeError(f"unexpected node {node!r}")

        try:
            return rec(e)[1]
        except _Kink:
            return None

    return grad


class _Kink(Exception):
    pass


def fd_dir_deriv(
    f: Callable[[np.ndarray], float],
    x,
    d,
    schedule: Optional[Sequence[float]] = None,
    osc_tol: float = 1e-7,
) -> DirDerivValue:
    """Finite-difference estimate of f'(x, d) from a decreasing t-schedule.

    Evaluates the one-sided difference quotient (f(x + t d) - f(x)) / t
    along the schedule and reports the last quotient (no extrapolation).
    The estimate is flagged NON_CONVERGENT when the last five quotients
    oscillate by more than ``osc_tol``; ``amplitude`` records the quotient
    oscillation across the whole schedule.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = np.atleast_1d(np.asarray(d, dtype=float))
    ts = default_schedule() if schedule is None else np.asarray(schedule, dtype=float)
    if np.any(ts <= 0) or np.any(np.diff(ts) >= 0):
        raise ValueError("schedule must be positive and strictly decreasing")
    f0 = f(x)
    quotients = np.array([(f(x + t * d) - f0) / t for t in ts])
    tail = quotients[-5:] if quotients.size >= 5 else quotients
    osc = float(tail.max() - tail.min())
    amp = float(quotients.max() - quotients.min())
    return DirDerivValue(
        value=float(quotients[-1]),
        kind="ordinary",
        exactness="sampled",
        converged=osc <= osc_tol,
        oscillation=osc,
        amplitude=amp,
        quotients=tuple(quotients.tolist()),
        params={"schedule": ts.tolist(), "osc_tol": osc_tol},
    )


def sampled_clarke_dd(
    f: Callable[[np.ndarray], float],
    x,
    d,
    radius: float = 0.1,
    samples: int = 2000,
    seed: int = DEFAULT_SEED,
    rungs: int = 5,
) -> DirDerivValue:
    """Sampling estimate of the Clarke directional derivative f°(x, d).

    For a shrinking radius ladder r_k = radius * 2^-k we take the max
    difference quotient over sampled base points ||x' - x|| <= r_k and
    steps t <= r_k (log-uniform, so tiny steps that expose the local slope
    are well represented).  The reported value extrapolates the per-rung
    maxima to radius 0 by a linear fit; the rung trace rides along.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = np.atleast_1d(np.asarray(d, dtype=float))
    n = x.size
    rung_radii = []
    rung_max = []
    for k in range(rungs):
        r = radius * 2.0 ** -k
        rng = make_rng(seed, 101, k)
        offs = rng.uniform(-r, r, size=(samples, n))
        texp = rng.uniform(-8.0, 0.0, size=samples)
        best = -math.inf
        for off, te in zip(offs, texp):
            xp = x + off
            t = r * 10.0 ** te
            q = (f(xp + t * d) - f(xp)) / t
            if q > best:
                best = q
        rung_radii.append(r)
        rung_max.append(best)
    rr = np.array(rung_radii)
    mm = np.array(rung_max)
    coef = np.polyfit(rr, mm, 1)  # m ~ a*r + b, report b
    value = float(coef[1])
    return DirDerivValue(
        value=value,
        kind="clarke",
        exactness="sampled",
        converged=True,
        oscillation=float(mm.max() - mm.min()),
        amplitude=float(mm.max() - mm.min()),
        quotients=tuple(mm.tolist()),
        params={
            "radius_ladder": rr.tolist(),
            "rung_max": mm.tolist(),
            "samples": samples,
            "seed": seed,
        },
    )


def gradient_sampling(
    grad: Callable[[np.ndarray], Optional[np.ndarray]],
    x,
    radius: float = 0.1,
    samples: int = 1500,
    seed: int = DEFAULT_SEED,
    rungs: int = 5,
) -> SubdiffSet:
    """Sampled Clarke subdifferential: hull of gradients near x.

    ``grad`` returns the gradient at differentiable points and ``None`` at
    kinks (which are skipped; they carry no measure).  Base points are drawn
    with log-uniform radii inside each rung so behavior at every scale near
    x contributes.  Reported set: convex hull of the final rung's gradient
    cloud; the per-rung Hausdorff trace between consecutive hulls goes into
    the notes.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = x.size
    hulls = []
    for k in range(rungs):
        r = radius * 2.0 ** -k
        rng = make_rng(seed, 202, k)
        dirs = rng.standard_normal(size=(samples, n))
        dirs /= np.maximum(np.linalg.norm(dirs, axis=1, keepdims=True), 1e-300)
        rexp = rng.uniform(-8.0, 0.0, size=samples)
        cloud = []
        for u, re_ in zip(dirs, rexp):
            y = x + (r * 10.0 ** re_) * u
            g = grad(y)
            if g is not None:
                cloud.append(np.asarray(g, dtype=float))
        if not cloud:
            raise ValueError("no differentiable samples found; enlarge the budget")
        hulls.append(conv_hull(np.array(cloud)))
    trace = [
        set_distance(SetUnion((a,)), SetUnion((b,))) for a, b in zip(hulls, hulls[1:])
    ]
    final = hulls[-1]
    return SubdiffSet(
        kind=SubdiffKind.CLARKE,
        set=SetUnion((final,)),
        at=x,
        exactness="sampled",
        tolerance=float(trace[-1]) if trace else 0.0,
        notes=(
            "rung_hausdorff=" + ",".join(f"{t:.3e}" for t in trace),
            f"samples={samples}",
            f"seed={seed}",
        ),
    )


def sampled_c_stationarity(
    grad: Callable[[np.ndarray], Optional[np.ndarray]],
    x,
    tol: float = 0.02,
    radius: float = 0.1,
    samples: int = 1500,
    seed: int = DEFAULT_SEED,
) -> bool:
    """C-stationarity from samples: is 0 within ``tol`` of the sampled hull?

    Approximate by construction; pair it with the exact engine whenever the
    fragment supports one.
    """
    ss = gradient_sampling(grad, x, radius=radius, samples=samples, seed=seed)
    return contains(ss.set, np.zeros(np.atleast_1d(np.asarray(x)).size), tol)

"""Exact subdifferentials for piecewise-affine / linear-quadratic expressions.

The exact engine rests on one construction: a *selection* fixes a branch at
every Max/Min node and a sign at every Abs node of a tree.  Each selection
linearizes the tree into a single smooth piece, valid on the polyhedral cell
cut out by the branch-dominance inequalities.  A selection is *essentially
active* at ``x`` when its cell has non-empty interior arbitrarily close to
``x`` (decided by a strict-feasibility LP); only those selections contribute
gradients.

From that one primitive we obtain, exactly:

* ``bouligand``  -- the set of essentially-active selection gradients,
* ``clarke``     -- its convex hull,
* ``dir_deriv``  -- one-sided directional derivatives by recursion on the
  tree (max over active children, signed Abs, 2 e e' for squares),
* ``clarke_dir_deriv`` -- the support function of the Clarke set,
* ``frechet``    -- the linear minorants of d -> f'(x, d), via the conic
  cells of the derivative function,
* ``limiting``   -- the union of Frechet sets over all activity patterns
  realizable arbitrarily close to ``x``.

The convex-analysis catalog (norms, max of smooth functions, eigenvalue,
scaled sums, affine precomposition, normal cones, weak convexity shifts)
lives at the bottom of the module.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

from .expr import (
    Abs,
    ActivePattern,
    Affine,
    Builtin1D,
    BUILTINS,
    Const,
    Expr,
    FragmentClass,
    Max,
    Min,
    Scale,
    Sq,
    Sum,
    Var,
    classify_fragment,
    evaluate,
)
from .polyhedra import (
    Ball,
    Box,
    Cone,
    HPolyhedron,
    SetUnion,
    VPolytope,
    cone_from_rays,
    cone_rays_from_halfspaces,
    contains,
    conv_hull,
    hpoly_is_empty,
    lp_solve,
    minkowski_sum,
    set_to_json,
    support_value,
    vertex_enumeration,
)

__all__ = [
    "SubdiffError",
    "UnsupportedFragmentError",
    "NotDirectionallyDifferentiableError",
    "EnumerationLimitError",
    "InfeasiblePointError",
    "SubdiffKind",
    "SubdiffSet",
    "DirDerivValue",
    "dir_deriv",
    "clarke_dir_deriv",
    "bouligand",
    "clarke",
    "frechet",
    "limiting",
    "L1Norm",
    "L2Norm",
    "MaxOfSmooth",
    "ScaledSum",
    "AffineCompose",
    "convex_catalog_subdiff",
    "EigmaxSubdiff",
    "eigmax_subdiff",
    "normal_cone",
    "weakly_convex_subdiff",
    "compose_affine",
]

ESSENTIAL_MARGIN = 1e-7
SELECTION_CAP = 4096


class SubdiffError(Exception):
    pass


class UnsupportedFragmentError(SubdiffError):
    """Exact oracle asked for a fragment it does not support (USE_SAMPLED)."""


class NotDirectionallyDifferentiableError(SubdiffError):
    pass


class EnumerationLimitError(SubdiffError):
    pass


class InfeasiblePointError(SubdiffError):
    """INFEASIBLE_POINT: query point outside the constraint set."""


class SubdiffKind(Enum):
    FRECHET = "frechet"
    LIMITING = "limiting"
    CLARKE = "clarke"
    BOULIGAND = "bouligand"
    CONVEX = "convex"


@dataclass(frozen=True)
class SubdiffSet:
    """A subdifferential at a point, as a finite union of convex components.

    Frechet/Clarke/Convex sets have a single convex component (or none);
    Bouligand sets are finite point sets; limiting sets may be non-convex
    unions.  ``exactness`` is "exact" or "sampled"; sampled sets carry the
    tolerance they were resolved to.
    """

    kind: SubdiffKind
    set: SetUnion
    at: np.ndarray
    exactness: str = "exact"
    tolerance: Optional[float] = None
    halfspaces: Optional[HPolyhedron] = None
    notes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "at", np.asarray(self.at, dtype=float).ravel())

    @property
    def is_empty(self) -> bool:
        return self.set.is_empty

    def contains(self, z, tol: float = 1e-9) -> bool:
        return contains(self.set, z, tol)

    def to_json(self) -> dict:
        d = {
            "kind": self.kind.value,
            "at": self.at.tolist(),
            "exactness": self.exactness,
            "set": set_to_json(self.set),
        }
        if self.tolerance is not None:
            d["tolerance"] = self.tolerance
        if self.notes:
            d["notes"] = list(self.notes)
        return d


@dataclass(frozen=True)
class DirDerivValue:
    """A directional-derivative value with provenance.

    ``kind`` is "ordinary" (f'(x, d)) or "clarke" (f°(x, d)); sampled values
    carry convergence diagnostics (see :mod:`nonsmooth.sampled`).
    """

    value: float
    kind: str
    exactness: str = "exact"
    converged: bool = True
    oscillation: float = 0.0
    amplitude: float = 0.0
    quotients: tuple = ()
    params: Optional[dict] = None

    @property
    def status(self) -> str:
        return "OK" if self.converged else "NON_CONVERGENT"


# ---------------------------------------------------------------------------
# Directional derivative recursion
# ---------------------------------------------------------------------------


def _dir_value(e: Expr, x: np.ndarray, d: np.ndarray) -> tuple:
    """(value, one-sided derivative along d) by recursion; exact ties."""

    def rec(node: Expr):
        if isinstance(node, Const):
            return node.c, 0.0
        if isinstance(node, Var):
            return float(x[node.i]), float(d[node.i])
        if isinstance(node, Affine):
            a = np.asarray(node.a)
            return float(a @ x + node.b), float(a @ d)
        if isinstance(node, Sum):
            vals = [rec(t) for t in node.terms]
            return sum(v for v, _ in vals), sum(g for _, g in vals)
        if isinstance(node, Scale):
            v, g = rec(node.child)
            return node.c * v, node.c * g
        if isinstance(node, (Max, Min)):
            pairs = [rec(t) for t in node.terms]
            vals = [v for v, _ in pairs]
            if isinstance(node, Max):
                v = max(vals)
                g = max(gg for vv, gg in pairs if vv >= v)
            else:
                v = min(vals)
                g = min(gg for vv, gg in pairs if vv <= v)
            return v, g
        if isinstance(node, Abs):
            v, g = rec(node.child)
            if v > 0.0:
                return v, g
            if v < 0.0:
                return -v, -g
            return 0.0, abs(g)
        if isinstance(node, Sq):
            v, g = rec(node.child)
            return v * v, 2.0 * v * g
        if isinstance(node, Builtin1D):
            t0, g = rec(node.child)
            spec = BUILTINS[node.name]
            val = spec.value(t0)
            if g == 0.0:
                return val, 0.0
            one = spec.one_sided(t0, 1 if g > 0 else -1)
            if one is None:
                raise NotDirectionallyDifferentiableError(
                    f"builtin {node.name!r} has no one-sided derivative at {t0}"
                )
            return val, abs(g) * one
        raise SubdiffError(f"unexpected node {node!r}")

    return rec(e)


def dir_deriv(e: Expr, x, d) -> DirDerivValue:
    """Exact one-sided directional derivative f'(x, d) for PA/PLQ trees.

    One-dimensional trees with registry builtins are also supported as long
    as every builtin involved has one-sided derivatives at the base point.
    Raises :class:`UnsupportedFragmentError` for general fragments
    (USE_SAMPLED) and :class:`NotDirectionallyDifferentiableError` when the
    one-sided limit does not exist.
    """
    frag = classify_fragment(e)
    if frag is FragmentClass.GENERAL:
        raise UnsupportedFragmentError("USE_SAMPLED: exact rules need PA/PLQ or 1-D")
    x = np.asarray(x, dtype=float).ravel()
    d = np.asarray(d, dtype=float).ravel()
    evaluate(e, x)  # dimension checks
    _, g = _dir_value(e, x, d)
    return DirDerivValue(value=float(g), kind="ordinary")


def clarke_dir_deriv(e: Expr, x, d) -> DirDerivValue:
    """Exact Clarke directional derivative as the support of the Clarke set."""
    cs = clarke(e, x)
    val = support_value(cs.set, d)
    return DirDerivValue(value=float(val), kind="clarke")


# ---------------------------------------------------------------------------
# Selections of a tree at a point
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Selection:
    branch: dict  # path -> chosen child index (Max/Min nodes)
    sign: dict  # path -> +1.0/-1.0 (Abs nodes)


def _branch_choices(e: Expr, x: np.ndarray, act_tol: float):
    """Per branch node, the locally admissible choices at x."""
    choices = []

    def rec(node: Expr, path: tuple, vals_out: dict) -> float:
        if isinstance(node, Const):
            v = node.c
        elif isinstance(node, Var):
            v = float(x[node.i])
        elif isinstance(node, Affine):
            v = float(np.dot(node.a, x) + node.b)
        elif isinstance(node, Sum):
            v = sum(rec(t, path + (i,), vals_out) for i, t in enumerate(node.terms))
        elif isinstance(node, Scale):
            v = node.c * rec(node.child, path + (0,), vals_out)
        elif isinstance(node, (Max, Min)):
            kid_vals = [rec(t, path + (i,), vals_out) for i, t in enumerate(node.terms)]
            v = max(kid_vals) if isinstance(node, Max) else min(kid_vals)
            if isinstance(node, Max):
                act = [i for i, w in enumerate(kid_vals) if w >= v - act_tol]
            else:
                act = [i for i, w in enumerate(kid_vals) if w <= v + act_tol]
            choices.append(("branch", path, tuple(act)))
        elif isinstance(node, Abs):
            w = rec(node.child, path + (0,), vals_out)
            v = abs(w)
            if abs(w) <= act_tol:
                choices.append(("sign", path, (1.0, -1.0)))
            else:
                choices.append(("sign", path, (1.0 if w > 0 else -1.0,)))
        elif isinstance(node, Sq):
            w = rec(node.child, path + (0,), vals_out)
            v = w * w
        else:
            raise UnsupportedFragmentError("selections need a PA/PLQ tree")
        vals_out[path] = v
        return v

    vals: dict = {}
    rec(e, (), vals)
    return choices, vals


def _enumerate_selections(e: Expr, x: np.ndarray, act_tol: float = 0.0):
    choices, _ = _branch_choices(e, x, act_tol)
    total = 1
    for _, _, opts in choices:
        total *= len(opts)
        if total > SELECTION_CAP:
            raise EnumerationLimitError(
                f"more than {SELECTION_CAP} local selections; perturb the point"
            )
    sels = []
    for combo in itertools.product(*[opts for _, _, opts in choices]):
        branch, sign = {}, {}
        for (kind, path, _), pick in zip(choices, combo):
            if kind == "branch":
                branch[path] = pick
            else:
                sign[path] = pick
        sels.append(_Selection(branch, sign))
    return sels


def _linearize(node: Expr, sel: _Selection, n: int, path: tuple = ()) -> tuple:
    """Affine (a, b) of a PA subtree under a full selection."""
    if isinstance(node, Const):
        return np.zeros(n), node.c
    if isinstance(node, Var):
        a = np.zeros(n)
        a[node.i] = 1.0
        return a, 0.0
    if isinstance(node, Affine):
        return np.asarray(node.a, dtype=float).copy(), node.b
    if isinstance(node, Sum):
        a, b = np.zeros(n), 0.0
        for i, t in enumerate(node.terms):
            ai, bi = _linearize(t, sel, n, path + (i,))
            a += ai
            b += bi
        return a, b
    if isinstance(node, Scale):
        a, b = _linearize(node.child, sel, n, path + (0,))
        return node.c * a, node.c * b
    if isinstance(node, (Max, Min)):
        i = sel.branch[path]
        return _linearize(node.terms[i], sel, n, path + (i,))
    if isinstance(node, Abs):
        s = sel.sign[path]
        a, b = _linearize(node.child, sel, n, path + (0,))
        return s * a, s * b
    raise SubdiffError("cannot linearize a non-PA subtree")


def _sel_constraints(e: Expr, sel: _Selection, n: int):
    """Branch-dominance rows (a, c) meaning a.z + c >= 0 for the cell of sel."""
    rows = []

    def rec(node: Expr, path: tuple):
        if isinstance(node, (Max, Min)):
            i = sel.branch[path]
            ai, bi = _linearize(node.terms[i], sel, n, path + (i,))
            for j, t in enumerate(node.terms):
                if j == i:
                    continue
                aj, bj = _linearize(t, sel, n, path + (j,))
                if isinstance(node, Max):
                    rows.append((ai - aj, bi - bj))
                else:
                    rows.append((aj - ai, bj - bi))
        if isinstance(node, Abs):
            s = sel.sign[path]
            a, b = _linearize(node.child, sel, n, path + (0,))
            rows.append((s * a, s * b))
        for i, c in enumerate(node.children()):
            rec(c, path + (i,))

    rec(e, ())
    return rows


def _sel_gradient(e: Expr, sel: _Selection, x: np.ndarray) -> np.ndarray:
    """Gradient at x of the smooth piece picked out by a full selection."""
    n = x.size

    def rec(node: Expr, path: tuple):
        if isinstance(node, Const):
            return node.c, np.zeros(n)
        if isinstance(node, Var):
            g = np.zeros(n)
            g[node.i] = 1.0
            return float(x[node.i]), g
        if isinstance(node, Affine):
            a = np.asarray(node.a, dtype=float)
            return float(a @ x + node.b), a.copy()
        if isinstance(node, Sum):
            v, g = 0.0, np.zeros(n)
            for i, t in enumerate(node.terms):
                vi, gi = rec(t, path + (i,))
                v += vi
                g += gi
            return v, g
        if isinstance(node, Scale):
            v, g = rec(node.child, path + (0,))
            return node.c * v, node.c * g
        if isinstance(node, (Max, Min)):
            i = sel.branch[path]
            return rec(node.terms[i], path + (i,))
        if isinstance(node, Abs):
            s = sel.sign[path]
            v, g = rec(node.child, path + (0,))
            return s * v, s * g
        if isinstance(node, Sq):
            v, g = rec(node.child, path + (0,))
            return v * v, 2.0 * v * g
        raise SubdiffError(f"unexpected node {node!r}")

    return rec(e, ())[1]


def _clean_rows(rows, x: np.ndarray, drop_inconsistent: bool = True):
    """Normalize rows, drop vacuous ones, report values at x."""
    out = []
    for a, c in rows:
        nrm = float(np.linalg.norm(a))
        if nrm <= 1e-13:
            if c < -1e-10 and drop_inconsistent:
                return None  # cell is empty
            continue
        out.append((a / nrm, c / nrm))
    return out


def _cell_is_essential(rows, x: np.ndarray, n: int) -> bool:
    """Strict-feasibility LP: does the cell have interior near x?

    ``rows`` are normalized (a, c) with a.z + c >= 0; only rows active at x
    constrain nearby interiors.  We look for a direction of margin >= some
    positive amount within the unit box (the problem is scale free).
    """
    scale = 1.0 + (float(np.abs(x).max()) if x.size else 0.0)
    active = [(a, c) for a, c in rows if abs(float(a @ x) + c) <= 1e-9 * scale]
    if not active:
        return True
    # vars (d, m): maximize m  s.t.  a.d >= m, |d|_inf <= 1, m <= 1
    k = len(active)
    A_ub = np.zeros((k + 2 * n + 1, n + 1))
    b_ub = np.zeros(k + 2 * n + 1)
    for i, (a, _) in enumerate(active):
        A_ub[i, :n] = -a
        A_ub[i, n] = 1.0
    A_ub[k : k + n, :n] = np.eye(n)
    b_ub[k : k + n] = 1.0
    A_ub[k + n : k + 2 * n, :n] = -np.eye(n)
    b_ub[k + n : k + 2 * n] = 1.0
    A_ub[-1, n] = 1.0
    b_ub[-1] = 1.0
    c_obj = np.zeros(n + 1)
    c_obj[n] = -1.0
    res = lp_solve(c_obj, A_ub, b_ub)
    return res.optimal and -res.value >= ESSENTIAL_MARGIN


def _essential_selection_data(e: Expr, x: np.ndarray, act_tol: float = 0.0):
    """(gradient, normalized rows) for every essentially active selection."""
    n = x.size
    out = []
    for sel in _enumerate_selections(e, x, act_tol):
        rows = _clean_rows(_sel_constraints(e, sel, n), x)
        if rows is None:
            continue
        # selections assembled from active children always contain x
        scale = 1.0 + float(np.abs(x).max())
        if any(float(a @ x) + c < -1e-8 * scale for a, c in rows):
            continue
        if _cell_is_essential(rows, x, n):
            out.append((_sel_gradient(e, sel, x), rows))
    return out


def _dedupe_points(points, tol: float = 1e-10):
    uniq: list = []
    for p in points:
        if not any(np.all(np.abs(p - q) <= tol * (1.0 + np.abs(q).max())) for q in uniq):
            uniq.append(p)
    uniq.sort(key=lambda p: tuple(p))
    return uniq


def _require_exact_fragment(e: Expr, op: str) -> FragmentClass:
    frag = classify_fragment(e)
    if frag not in (FragmentClass.PA, FragmentClass.PLQ):
        raise UnsupportedFragmentError(f"USE_SAMPLED: {op} needs a PA/PLQ tree")
    return frag


def bouligand(e: Expr, x) -> SubdiffSet:
    """Exact Bouligand subdifferential of a PA/PLQ tree at x (dim <= 4).

    Returns the finite set of gradients of essentially active smooth
    selections, one singleton component per gradient.
    """
    _require_exact_fragment(e, "bouligand")
    x = np.asarray(x, dtype=float).ravel()
    if x.size > 4:
        raise SubdiffError("dimension cap exceeded (bouligand supports dim <= 4)")
    grads = [g for g, _ in _essential_selection_data(e, x)]
    pts = _dedupe_points(grads)
    comps = tuple(VPolytope(np.array([p])) for p in pts)
    return SubdiffSet(kind=SubdiffKind.BOULIGAND, set=SetUnion(comps), at=x)


def clarke(e: Expr, x) -> SubdiffSet:
    """Exact Clarke subdifferential: convex hull of the Bouligand set."""
    b = bouligand(e, x)
    pts = np.vstack([c.vertices for c in b.set.components])
    hull = conv_hull(pts)
    return SubdiffSet(kind=SubdiffKind.CLARKE, set=SetUnion((hull,)), at=b.at)


# ---------------------------------------------------------------------------
# Frechet subdifferential via the conic cells of d -> f'(x, d)
# ---------------------------------------------------------------------------


def _derivative_expr_from_pattern(e: Expr, pattern: ActivePattern) -> Expr:
    """The PA function d -> f'(y, d) for any y realizing ``pattern``."""

    def rec(node: Expr, path: tuple) -> Expr:
        if isinstance(node, Const):
            return Const(0.0)
        if isinstance(node, Var):
            return Var(node.i)
        if isinstance(node, Affine):
            return Affine(node.a, 0.0)
        if isinstance(node, Sum):
            return Sum(tuple(rec(t, path + (i,)) for i, t in enumerate(node.terms)))
        if isinstance(node, Scale):
            return Scale(node.c, rec(node.child, path + (0,)))
        if isinstance(node, (Max, Min)):
            act = pattern.branch_active[path]
            kids = tuple(rec(node.terms[i], path + (i,)) for i in act)
            if len(kids) == 1:
                return kids[0]
            return Max(kids) if isinstance(node, Max) else Min(kids)
        if isinstance(node, Abs):
            s = pattern.abs_sign[path]
            inner = rec(node.child, path + (0,))
            if s == "+":
                return inner
            if s == "-":
                return Scale(-1.0, inner)
            return Abs(inner)
        raise SubdiffError("pattern-based derivative needs a PA tree")

    return rec(e, ())


def _phi_cells(phi: Expr, n: int):
    """Essential conic cells of a positively homogeneous PA function.

    Returns a list of (g, rows) pairs: on the cone {d : rows.d >= 0} the
    function equals g.d.
    """
    zero = np.zeros(n)
    cells = []
    seen = set()
    for sel in _enumerate_selections(phi, zero, act_tol=0.0):
        rows_raw = _sel_constraints(phi, sel, n)
        rows = _clean_rows(rows_raw, zero)
        if rows is None:
            continue
        g, b = _linearize(phi, sel, n)
        key = (tuple(np.round(g, 12)), tuple(sorted(tuple(np.round(a, 12)) for a, _ in rows)))
        if key in seen:
            continue
        seen.add(key)
        if _cell_is_essential(rows, zero, n):
            cells.append((g, [a for a, _ in rows]))
    return cells


def _frechet_from_phi(phi: Expr, n: int, at: np.ndarray) -> SubdiffSet:
    cells = _phi_cells(phi, n)
    grads = np.array([g for g, _ in cells])
    rows_A, rows_b = [], []
    for g, rows in cells:
        rays = (
            cone_rays_from_halfspaces(np.array(rows), n)
            if rows
            else np.vstack([np.eye(n), -np.eye(n)])
        )
        for r in rays:
            rows_A.append(r)
            rows_b.append(float(g @ r))
    # coordinate bounds: the Frechet set sits inside conv of the cell gradients
    lo = grads.min(axis=0)
    hi = grads.max(axis=0)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = 1.0
        rows_A.extend([ei, -ei])
        rows_b.extend([float(hi[i]), float(-lo[i])])
    H = HPolyhedron(np.array(rows_A), np.array(rows_b))
    if hpoly_is_empty(H):
        return SubdiffSet(
            kind=SubdiffKind.FRECHET, set=SetUnion(()), at=at, halfspaces=H
        )
    V = vertex_enumeration(H)
    return SubdiffSet(
        kind=SubdiffKind.FRECHET, set=SetUnion((V,)), at=at, halfspaces=H
    )


def _one_sided_slopes(e: Expr, x: np.ndarray) -> tuple:
    """(left slope, right slope) of a 1-D expression at x.

    The left slope is the slope of the piece on (x - delta, x), i.e.
    -f'(x, -1); the right slope is f'(x, +1).
    """
    _, right = _dir_value(e, x, np.array([1.0]))
    _, back = _dir_value(e, x, np.array([-1.0]))
    return -back, right


def frechet(e: Expr, x) -> SubdiffSet:
    """Exact Frechet subdifferential: linear minorants of d -> f'(x, d).

    Supported inputs: PA trees in dimension <= 3, and any 1-D expression
    whose one-sided derivatives exist at x (PA, PLQ, registry builtins).
    In 1-D the set is [-f'(x,-1), f'(x,1)], empty when that interval is
    inverted.
    """
    x = np.asarray(x, dtype=float).ravel()
    frag = classify_fragment(e)
    if x.size == 1:
        sl, sr = _one_sided_slopes(e, x)
        if sl > sr + 1e-12:
            return SubdiffSet(kind=SubdiffKind.FRECHET, set=SetUnion(()), at=x)
        return SubdiffSet(
            kind=SubdiffKind.FRECHET,
            set=SetUnion((conv_hull([[sl], [sr]]),)),
            at=x,
        )
    if frag is not FragmentClass.PA or x.size > 3:
        raise UnsupportedFragmentError(
            "exact frechet needs a PA tree of dim <= 3 or a 1-D expression"
        )
    from .expr import active_pattern  # local import to avoid cycle confusion

    pat = active_pattern(e, x, tol=0.0)
    phi = _derivative_expr_from_pattern(e, pat)
    return _frechet_from_phi(phi, x.size, x)


# ---------------------------------------------------------------------------
# Limiting subdifferential
# ---------------------------------------------------------------------------


def _pattern_along(e: Expr, x: np.ndarray, d: np.ndarray) -> ActivePattern:
    """Exact activity pattern of ``e`` at ``x + t d`` for infinitesimal t > 0.

    First-order only: valid for PA trees, where values along a ray are
    exactly value + t * derivative for small t.
    """
    branch: dict = {}
    signs: dict = {}

    def rec(node: Expr, path: tuple):
        if isinstance(node, Const):
            return node.c, 0.0
        if isinstance(node, Var):
            return float(x[node.i]), float(d[node.i])
        if isinstance(node, Affine):
            a = np.asarray(node.a)
            return float(a @ x + node.b), float(a @ d)
        if isinstance(node, Sum):
            pairs = [rec(t, path + (i,)) for i, t in enumerate(node.terms)]
            return sum(v for v, _ in pairs), sum(g for _, g in pairs)
        if isinstance(node, Scale):
            v, g = rec(node.child, path + (0,))
            return node.c * v, node.c * g
        if isinstance(node, (Max, Min)):
            pairs = [rec(t, path + (i,)) for i, t in enumerate(node.terms)]
            vals = [v for v, _ in pairs]
            v = max(vals) if isinstance(node, Max) else min(vals)
            act0 = [i for i, vv in enumerate(vals) if vv == v]
            ds = [pairs[i][1] for i in act0]
            tol_d = 1e-9 * max(1.0, max(abs(t) for t in ds))
            if isinstance(node, Max):
                dbest = max(ds)
                act = tuple(i for i, gg in zip(act0, ds) if gg >= dbest - tol_d)
            else:
                dbest = min(ds)
                act = tuple(i for i, gg in zip(act0, ds) if gg <= dbest + tol_d)
            branch[path] = act
            return v, dbest
        if isinstance(node, Abs):
            v, g = rec(node.child, path + (0,))
            if v > 0.0:
                signs[path] = "+"
                return v, g
            if v < 0.0:
                signs[path] = "-"
                return -v, -g
            tol_d = 1e-9 * max(1.0, abs(g))
            signs[path] = "0" if abs(g) <= tol_d else ("+" if g > 0 else "-")
            return 0.0, abs(g)
        raise SubdiffError("pattern walk needs a PA tree")

    rec(e, ())
    return ActivePattern(branch_active=branch, abs_sign=signs, tol=0.0)


def _face_directions(cells, n: int):
    """Relative-interior representatives of the faces of the given cones.

    Each cone is {d : rows.d >= 0}.  For every seed subset J of rows we
    solve for a direction vanishing on J with maximal margin on the other
    rows, absorbing implied-zero rows until the margin separates.
    """
    reps = []
    for _, rows in cells:
        R = np.array(rows) if rows else np.zeros((0, n))
        m = R.shape[0]
        idx = list(range(m))
        seeds = [()]
        for k in range(1, n):
            seeds.extend(itertools.combinations(idx, k))
        for J in seeds:
            Z = set(J)
            for _ in range(m + 1):
                free = [i for i in idx if i not in Z]
                # vars (d, t): max t  s.t.  R[Z] d = 0, R[free] d >= t,
                #                          |d|_inf <= 1, t <= 1
                A_ub = []
                b_ub = []
                for i in free:
                    row = np.zeros(n + 1)
                    row[:n] = -R[i]
                    row[n] = 1.0
                    A_ub.append(row)
                    b_ub.append(0.0)
                for i in range(n):
                    for s in (1.0, -1.0):
                        row = np.zeros(n + 1)
                        row[i] = s
                        A_ub.append(row)
                        b_ub.append(1.0)
                cap = np.zeros(n + 1)
                cap[n] = 1.0
                A_ub.append(cap)
                b_ub.append(1.0)
                A_eq = None
                b_eq = None
                if Z:
                    A_eq = np.zeros((len(Z), n + 1))
                    for r_i, i in enumerate(sorted(Z)):
                        A_eq[r_i, :n] = R[i]
                    b_eq = np.zeros(len(Z))
                obj = np.zeros(n + 1)
                obj[n] = -1.0
                res = lp_solve(obj, np.array(A_ub), np.array(b_ub), A_eq, b_eq)
                if not res.optimal:
                    break
                dvec = res.x[:n]
                margin = -res.value
                if margin >= 1e-6:
                    if np.abs(dvec).max() > 1e-7:
                        reps.append(dvec)
                    break
                implied = [
                    i for i in free if abs(float(R[i] @ dvec)) <= 1e-9
                ]
                if not implied:
                    break
                Z.update(implied)
    return reps


def limiting(e: Expr, x) -> SubdiffSet:
    """Exact limiting subdifferential (union of nearby Frechet sets).

    Supported inputs: PA trees in dimension <= 3, and 1-D PA/PLQ trees
    (isolated breakpoints).  In 1-D the set is built from the two one-sided
    slope limits; in higher dimension we enumerate every activity pattern
    realizable arbitrarily close to x and union the pattern Frechet sets
    with the Frechet set at x itself.
    """
    x = np.asarray(x, dtype=float).ravel()
    frag = classify_fragment(e)
    if x.size == 1:
        if frag not in (FragmentClass.PA, FragmentClass.PLQ):
            raise UnsupportedFragmentError(
                "exact limiting needs PA (dim <= 3) or a 1-D PA/PLQ tree"
            )
        sl, sr = _one_sided_slopes(e, x)
        comps: list = []
        if sl <= sr + 1e-12:
            comps.append(conv_hull([[sl], [sr]]))
        else:
            comps.extend([VPolytope([[sl]]), VPolytope([[sr]])])
        return SubdiffSet(kind=SubdiffKind.LIMITING, set=SetUnion(tuple(comps)), at=x)
    if frag is not FragmentClass.PA or x.size > 3:
        raise UnsupportedFragmentError(
            "exact limiting needs PA (dim <= 3) or a 1-D PA/PLQ tree"
        )
    n = x.size
    from .expr import active_pattern

    pat0 = active_pattern(e, x, tol=0.0)
    phi = _derivative_expr_from_pattern(e, pat0)
    cells = _phi_cells(phi, n)
    pieces: list = []
    sigs = set()

    def add(ss: SubdiffSet):
        for comp in ss.set.components:
            key = tuple(sorted(map(tuple, np.round(comp.vertices, 10).tolist())))
            if key not in sigs:
                sigs.add(key)
                pieces.append(comp)

    add(frechet(e, x))
    seen_patterns = set()
    for dvec in _face_directions(cells, n):
        pat = _pattern_along(e, x, dvec)
        sig = pat.signature()
        if sig in seen_patterns:
            continue
        seen_patterns.add(sig)
        phi_face = _derivative_expr_from_pattern(e, pat)
        add(_frechet_from_phi(phi_face, n, x))
    # drop components swallowed by strictly larger components
    def _subset(ca, cb) -> bool:
        return all(contains(cb, v, 1e-9) for v in ca.vertices)

    keep = []
    for i, ci in enumerate(pieces):
        swallowed = False
        for j, cj in enumerate(pieces):
            if i == j:
                continue
            if _subset(ci, cj) and (not _subset(cj, ci) or j < i):
                swallowed = True
                break
        if not swallowed:
            keep.append(ci)
    keep.sort(key=lambda c: tuple(map(tuple, c.vertices)))
    return SubdiffSet(kind=SubdiffKind.LIMITING, set=SetUnion(tuple(keep)), at=x)


# ---------------------------------------------------------------------------
# Convex-analysis catalog
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class L1Norm:
    pass


@dataclass(frozen=True)
class L2Norm:
    pass


@dataclass(frozen=True)
class MaxOfSmooth:
    """max of finitely many smooth convex functions, given as (value, gradient)
    callable pairs."""

    funcs: tuple  # of (f, grad_f)


@dataclass(frozen=True)
class ScaledSum:
    alpha1: float
    item1: object
    alpha2: float
    item2: object


@dataclass(frozen=True)
class AffineCompose:
    """g(A0 x + b0) for a convex g (catalog item or convex PA expression)."""

    A0: np.ndarray
    b0: np.ndarray
    g: object

    def __post_init__(self):
        object.__setattr__(self, "A0", np.atleast_2d(np.asarray(self.A0, dtype=float)))
        object.__setattr__(self, "b0", np.asarray(self.b0, dtype=float).ravel())


CatalogItem = Union[L1Norm, L2Norm, MaxOfSmooth, ScaledSum, AffineCompose, Expr]


def _catalog_set(item: CatalogItem, x: np.ndarray) -> SetUnion:
    if isinstance(item, Expr):
        return clarke(item, x).set
    if isinstance(item, L1Norm):
        axes = []
        for xi in x:
            if xi > 0:
                axes.append([1.0])
            elif xi < 0:
                axes.append([-1.0])
            else:
                axes.append([-1.0, 1.0])
        verts = [list(v) for v in itertools.product(*axes)]
        return SetUnion((conv_hull(verts),))
    if isinstance(item, L2Norm):
        nrm = float(np.linalg.norm(x))
        if nrm > 0:
            return SetUnion((VPolytope([x / nrm]),))
        return SetUnion((Ball(np.zeros(x.size), 1.0),))
    if isinstance(item, MaxOfSmooth):
        vals = [f(x) for f, _ in item.funcs]
        top = max(vals)
        tol = 1e-12 * max(1.0, abs(top))
        grads = [
            np.asarray(g(x), dtype=float).ravel()
            for (f, g), v in zip(item.funcs, vals)
            if v >= top - tol
        ]
        return SetUnion((conv_hull(np.array(grads)),))
    if isinstance(item, ScaledSum):
        if item.alpha1 <= 0 or item.alpha2 <= 0:
            raise SubdiffError("scaled sum rule needs positive weights")
        S1 = _scale_set(_catalog_set(item.item1, x), item.alpha1)
        S2 = _scale_set(_catalog_set(item.item2, x), item.alpha2)
        return _minkowski_sets(S1, S2)
    if isinstance(item, AffineCompose):
        u = item.A0 @ x + item.b0
        inner = _catalog_set(item.g, u)
        comps = []
        for c in inner.components:
            if isinstance(c, VPolytope):
                comps.append(conv_hull(c.vertices @ item.A0))
            elif isinstance(c, Ball) and item.A0.shape == (1, 1):
                a = float(item.A0[0, 0])
                comps.append(Ball(a * c.center, abs(a) * c.radius))
            else:
                raise SubdiffError("unsupported composition in affine chain rule")
        return SetUnion(tuple(comps))
    raise SubdiffError(f"unsupported catalog item {item!r}")


def _scale_set(S: SetUnion, alpha: float) -> SetUnion:
    comps = []
    for c in S.components:
        if isinstance(c, VPolytope):
            comps.append(VPolytope(alpha * c.vertices))
        elif isinstance(c, Ball):
            comps.append(Ball(alpha * c.center, alpha * c.radius))
        else:
            raise SubdiffError("cannot scale this component")
    return SetUnion(tuple(comps))


def _minkowski_sets(S1: SetUnion, S2: SetUnion) -> SetUnion:
    if len(S1.components) != 1 or len(S2.components) != 1:
        raise SubdiffError("sum rule needs convex operands")
    a, b = S1.components[0], S2.components[0]
    if isinstance(a, VPolytope) and isinstance(b, VPolytope):
        return SetUnion((minkowski_sum(a, b),))
    if isinstance(a, Ball) and isinstance(b, VPolytope) and b.vertices.shape[0] == 1:
        return SetUnion((Ball(a.center + b.vertices[0], a.radius),))
    if isinstance(b, Ball) and isinstance(a, VPolytope) and a.vertices.shape[0] == 1:
        return SetUnion((Ball(b.center + a.vertices[0], b.radius),))
    if isinstance(a, Ball) and isinstance(b, Ball):
        return SetUnion((Ball(a.center + b.center, a.radius + b.radius),))
    raise SubdiffError("unsupported composition in sum rule")


def convex_catalog_subdiff(item: CatalogItem, x) -> SubdiffSet:
    """Closed-form convex subdifferential for catalog items.

    ``item`` is one of L1Norm, L2Norm, MaxOfSmooth, ScaledSum, AffineCompose,
    or a convex PA expression (caller-asserted convexity; the Clarke set of a
    convex function is its subdifferential).  Sign is treated set-valued:
    the l1 subdifferential at a zero coordinate is the full interval [-1, 1].
    """
    x = np.asarray(x, dtype=float).ravel()
    return SubdiffSet(kind=SubdiffKind.CONVEX, set=_catalog_set(item, x), at=x)


# ---------------------------------------------------------------------------
# Largest-eigenvalue subdifferential
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EigmaxSubdiff:
    """conv{u u^T : u a unit top eigenvector} = {U Z U^T : Z psd, tr Z = 1}.

    ``basis`` is an orthonormal basis of the top eigenspace.  Membership and
    extreme-point tests work in any eigenspace dimension; explicit extreme
    points are materialized for eigenspace dimension <= 2.
    """

    basis: np.ndarray
    eigenvalue: float

    @property
    def multiplicity(self) -> int:
        return self.basis.shape[1]

    def contains(self, S, tol: float = 1e-8) -> bool:
        S = np.asarray(S, dtype=float)
        U = self.basis
        Z = U.T @ S @ U
        if np.linalg.norm(U @ Z @ U.T - S) > tol:
            return False
        if abs(np.trace(Z) - 1.0) > tol:
            return False
        w = np.linalg.eigvalsh((Z + Z.T) / 2.0)
        return bool(w.min() >= -tol)

    def is_extreme_point(self, S, tol: float = 1e-8) -> bool:
        if not self.contains(S, tol):
            return False
        U = self.basis
        Z = U.T @ np.asarray(S, dtype=float) @ U
        w = np.sort(np.linalg.eigvalsh((Z + Z.T) / 2.0))[::-1]
        return bool(w[0] >= 1.0 - tol and (w.size == 1 or abs(w[1]) <= tol))

    def vertices(self, samples: int = 16) -> list:
        if self.multiplicity == 1:
            u = self.basis[:, 0]
            return [np.outer(u, u)]
        if self.multiplicity == 2:
            u1, u2 = self.basis[:, 0], self.basis[:, 1]
            out = []
            for theta in np.linspace(0.0, math.pi, samples, endpoint=False):
                u = math.cos(theta) * u1 + math.sin(theta) * u2
                out.append(np.outer(u, u))
            return out
        raise SubdiffError("explicit vertices need eigenspace dimension <= 2")


def eigmax_subdiff(M, tol: float = 1e-9) -> EigmaxSubdiff:
    """Subdifferential of the largest-eigenvalue function at a symmetric M."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1] or M.shape[0] > 4:
        raise SubdiffError("eigmax_subdiff needs a symmetric matrix, n <= 4")
    if np.linalg.norm(M - M.T) > 1e-10 * max(1.0, float(np.abs(M).max())):
        raise SubdiffError("matrix is not symmetric")
    w, V = np.linalg.eigh(M)
    lam = float(w[-1])
    keep = w >= lam - tol * max(1.0, abs(lam))
    return EigmaxSubdiff(basis=V[:, keep], eigenvalue=lam)


# ---------------------------------------------------------------------------
# Normal cones and weak convexity
# ---------------------------------------------------------------------------


def normal_cone(C, x, tol: float = 1e-9) -> Cone:
    """Normal cone of a convex set at x in C (polyhedra, boxes, l2 balls).

    Polyhedral sets: the cone generated by the normals of active constraints.
    Balls: the ray through x - center on the boundary, {0} inside.
    Raises :class:`InfeasiblePointError` when x is outside C.
    """
    x = np.asarray(x, dtype=float).ravel()
    if isinstance(C, Box):
        C = C.to_hpolyhedron()
    if isinstance(C, HPolyhedron):
        scale = max(1.0, float(np.abs(x).max()))
        slack = C.b - C.A @ x
        if np.any(slack < -tol * scale):
            raise InfeasiblePointError("INFEASIBLE_POINT: x is not in C")
        active = C.A[slack <= tol * scale]
        if active.shape[0] == 0:
            return cone_from_rays(np.zeros((0, x.size)), dim=x.size)
        return cone_from_rays(active)
    if isinstance(C, Ball):
        r = float(np.linalg.norm(x - C.center))
        if r > C.radius + tol:
            raise InfeasiblePointError("INFEASIBLE_POINT: x is not in C")
        if r < C.radius - tol:
            return cone_from_rays(np.zeros((0, x.size)), dim=x.size)
        return cone_from_rays([(x - C.center) / r])
    raise SubdiffError(f"no normal cone rule for {type(C).__name__}")


def _shift_set(S: SetUnion, v: np.ndarray) -> SetUnion:
    comps = []
    for c in S.components:
        if isinstance(c, VPolytope):
            comps.append(VPolytope(c.vertices + v))
        elif isinstance(c, Ball):
            comps.append(Ball(c.center + v, c.radius))
        elif isinstance(c, HPolyhedron):
            comps.append(HPolyhedron(c.A, c.b + c.A @ v))
        else:
            raise SubdiffError("cannot translate this component")
    return SetUnion(tuple(comps))


def weakly_convex_subdiff(h_subdiff: Union[SubdiffSet, SetUnion], rho: float, x) -> SubdiffSet:
    """Clarke subdifferential of a rho-weakly convex f from its convex shift.

    With h = f + (rho/2)||.||^2 convex, the Clarke set of f at x is the
    translate of the convex subdifferential of h by -rho x.
    """
    if rho < 0:
        raise SubdiffError("weak-convexity modulus must be >= 0")
    x = np.asarray(x, dtype=float).ravel()
    S = h_subdiff.set if isinstance(h_subdiff, SubdiffSet) else h_subdiff
    return SubdiffSet(
        kind=SubdiffKind.CLARKE, set=_shift_set(S, -rho * x), at=x
    )


# ---------------------------------------------------------------------------
# Helpers shared with the test suites
# ---------------------------------------------------------------------------


def compose_affine(g: Expr, A0, b0) -> Expr:
    """The expression x -> g(A0 x + b0), by rewriting leaves of g."""
    A0 = np.atleast_2d(np.asarray(A0, dtype=float))
    b0 = np.asarray(b0, dtype=float).ravel()
    m, n = A0.shape

    def rec(node: Expr) -> Expr:
        if isinstance(node, Const):
            return node
        if isinstance(node, Var):
            return Affine(tuple(A0[node.i]), float(b0[node.i]))
        if isinstance(node, Affine):
            a = np.asarray(node.a)
            return Affine(tuple(A0.T @ a), float(a @ b0 + node.b))
        if isinstance(node, Sum):
            return Sum(tuple(rec(t) for t in node.terms))
        if isinstance(node, Scale):
            return Scale(node.c, rec(node.child))
        if isinstance(node, Max):
            return Max(tuple(rec(t) for t in node.terms))
        if isinstance(node, Min):
            return Min(tuple(rec(t) for t in node.terms))
        if isinstance(node, Abs):
            return Abs(rec(node.child))
        if isinstance(node, Sq):
            return Sq(rec(node.child))
        raise SubdiffError("affine composition supports PA/PLQ trees")

    return rec(g)

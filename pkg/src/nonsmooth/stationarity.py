"""Stationarity classification along the d- / l- / C- hierarchy.

A point is C-stationary when 0 lies in the Clarke subdifferential,
l-stationary when 0 lies in the limiting subdifferential, and d-stationary
when the Frechet subdifferential is non-empty and contains 0 (equivalently,
f'(x, d) >= 0 for every direction).  The implications d => l => C always
hold; the reverse ones do not, and the classifier surfaces a certified
descent direction whenever d-stationarity fails.

Also here: the convex constrained optimality test (0 in the subdifferential
plus the normal cone) and the composite d-stationarity test for
least-squares piecewise-affine regression.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .expr import Expr, FragmentClass, classify_fragment, active_pattern
from .polyhedra import (
    Ball,
    Box,
    HPolyhedron,
    VPolytope,
    contains,
    lp_solve,
    vertex_enumeration,
)
from .subdiff import (
    SubdiffError,
    UnsupportedFragmentError,
    _derivative_expr_from_pattern,
    _one_sided_slopes,
    _phi_cells,
    clarke,
    convex_catalog_subdiff,
    frechet,
    limiting,
    normal_cone,
)

__all__ = [
    "StationarityReport",
    "classify",
    "OptimalityCertificate",
    "convex_optimality_check",
    "TooManyTiesError",
    "DStatCertificate",
    "lspar_d_stationarity_check",
]


class TooManyTiesError(SubdiffError):
    """TOO_MANY_TIES: tie enumeration exceeded its cap; perturb the point."""


@dataclass(frozen=True)
class StationarityReport:
    """d-/l-/C-stationarity flags with certificates.

    A flag is None when the corresponding exact oracle is unsupported for
    the input fragment (it is then unknown at the exact level, not false).
    ``witness_direction`` is present exactly when d-stationarity fails and
    satisfies f'(x, witness) = witness_value < -tol.
    """

    is_d: Optional[bool]
    is_l: Optional[bool]
    is_C: Optional[bool]
    tol: float
    witness_direction: Optional[np.ndarray] = None
    witness_value: Optional[float] = None
    certificates: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "is_d": self.is_d,
            "is_l": self.is_l,
            "is_C": self.is_C,
            "tol": self.tol,
            "witness_direction": None
            if self.witness_direction is None
            else self.witness_direction.tolist(),
            "witness_value": self.witness_value,
            "certificates": {
                k: (v if isinstance(v, (bool, float, int, str)) else str(v))
                for k, v in self.certificates.items()
            },
        }


def _lex_smallest(rows: list) -> np.ndarray:
    return min(rows, key=lambda r: tuple(np.round(np.asarray(r, float), 12)))


def _min_dirderiv_over_box(e: Expr, x: np.ndarray, tol: float):
    """(min of f'(x, .) over the unit inf-ball, lex-smallest minimizer).

    Enumerates the conic linearity cells of d -> f'(x, d) and minimizes the
    cell-linear form over each cell intersected with the box, taking the
    lexicographically smallest vertex of the minimizing face.
    """
    n = x.size
    if n == 1:
        sl, sr = _one_sided_slopes(e, x)
        cand = [(-sl, (-1.0,)), (sr, (1.0,))]
        best = min(v for v, _ in cand)
        dirs = [d for v, d in cand if v <= best + 1e-15]
        return best, np.array(_lex_smallest(dirs))
    pat = active_pattern(e, x, tol=0.0)
    phi = _derivative_expr_from_pattern(e, pat)
    cells = _phi_cells(phi, n)
    best_val = np.inf
    best_dirs = []
    for g, rows in cells:
        A = [np.eye(n), -np.eye(n)]
        b = [np.ones(n), np.ones(n)]
        if rows:
            A.append(-np.array(rows))
            b.append(np.zeros(len(rows)))
        H = HPolyhedron(np.vstack(A), np.concatenate(b))
        verts = vertex_enumeration(H).vertices
        if verts.shape[0] == 0:
            continue
        vals = verts @ g
        vmin = float(vals.min())
        if vmin < best_val - 1e-12:
            best_val = vmin
            best_dirs = [v for v, w in zip(verts, vals) if w <= vmin + 1e-10]
        elif vmin <= best_val + 1e-12:
            best_dirs.extend(v for v, w in zip(verts, vals) if w <= vmin + 1e-10)
    return best_val, np.array(_lex_smallest(best_dirs))


def classify(e: Expr, x, tol: float = 1e-8) -> StationarityReport:
    """Classify x along the d-/l-/C-stationarity hierarchy, with certificates.

    Fully exact for PA trees of dim <= 3 and 1-D PA/PLQ trees.  For 1-D
    registry-builtin trees only the d-flag is exact (via one-sided
    derivatives); the other flags come back None.  d-stationarity is decided
    by Frechet membership and cross-checked against the directional sweep
    min over the unit box of f'(x, .) whenever both are available.
    """
    x = np.asarray(x, dtype=float).ravel()
    frag = classify_fragment(e)
    n = x.size
    certs: dict = {}

    is_C = is_l = is_d = None
    fs = cs = ls = None
    if frag in (FragmentClass.PA, FragmentClass.PLQ) and n <= 4:
        cs = clarke(e, x)
        is_C = cs.contains(np.zeros(n), tol)
        certs["clarke_contains_zero"] = is_C
    if (frag in (FragmentClass.PA, FragmentClass.PLQ) and n == 1) or (
        frag is FragmentClass.PA and n <= 3
    ):
        ls = limiting(e, x)
        is_l = contains(ls.set, np.zeros(n), tol)
        certs["limiting_contains_zero"] = is_l
    try:
        fs = frechet(e, x)
    except (UnsupportedFragmentError, SubdiffError):
        fs = None
    if fs is not None:
        is_d = (not fs.is_empty) and fs.contains(np.zeros(n), tol)
        certs["frechet_contains_zero"] = is_d

    witness = None
    wvalue = None
    if frag in (FragmentClass.PA, FragmentClass.PLQ) and (
        n == 1 or (frag is FragmentClass.PA and n <= 3)
    ):
        mval, mdir = _min_dirderiv_over_box(e, x, tol)
        sweep_d = mval >= -tol
        certs["sweep_min"] = float(mval)
        if is_d is not None and sweep_d != is_d:
            raise SubdiffError(
                "internal: Frechet membership disagrees with directional sweep"
            )
        if is_d is None:
            is_d = sweep_d
        if not is_d:
            witness = mdir
            wvalue = float(mval)
    elif is_d is False and fs is not None:
        # 1-D builtin case: certify with the negative one-sided direction
        sl, sr = _one_sided_slopes(e, x)
        cand = [(-sl, np.array([-1.0])), (sr, np.array([1.0]))]
        wvalue, witness = min(cand, key=lambda t: t[0])

    return StationarityReport(
        is_d=is_d,
        is_l=is_l,
        is_C=is_C,
        tol=tol,
        witness_direction=witness,
        witness_value=wvalue,
        certificates=certs,
    )


# ---------------------------------------------------------------------------
# Convex constrained optimality (subdifferential + normal cone)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OptimalityCertificate:
    optimal: bool
    s: Optional[np.ndarray] = None  # subgradient part of 0 = s + nu
    nu: Optional[np.ndarray] = None  # normal-cone part

    def to_json(self) -> dict:
        return {
            "optimal": self.optimal,
            "s": None if self.s is None else self.s.tolist(),
            "nu": None if self.nu is None else self.nu.tolist(),
        }


def convex_optimality_check(
    g: Union[Expr, object],
    C: Optional[Union[HPolyhedron, Box, Ball]],
    x,
    tol: float = 1e-8,
) -> OptimalityCertificate:
    """Test 0 in (subdifferential of g at x) + N_C(x) for convex g, x in C.

    ``g`` is a convex expression (convexity is the caller's assertion; trees
    that are a max of affine pieces are convex by construction) or a catalog
    item.  ``C`` may be None for the unconstrained problem.  On success the
    certificate carries the decomposition 0 = s + nu with s a subgradient
    and nu a normal direction.
    """
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    if isinstance(g, Expr):
        sub = clarke(g, x).set
    else:
        sub = convex_catalog_subdiff(g, x).set
    if len(sub.components) != 1 or not isinstance(sub.components[0], VPolytope):
        raise SubdiffError("optimality check needs a polytopal subdifferential")
    V = sub.components[0].vertices
    if C is None:
        rays = np.zeros((0, n))
    else:
        rays = normal_cone(C, x, tol=1e-9).rays
    k, m = V.shape[0], rays.shape[0]
    # vars: lambda (k) >= 0 summing to 1, mu (m) >= 0:  V^T lambda + R^T mu = 0
    nv = k + m
    A_ub = [-np.eye(nv)]
    b_ub = [np.zeros(nv)]
    body = np.hstack([V.T, rays.T]) if m else V.T
    A_ub.append(body)
    b_ub.append(tol * np.ones(n))
    A_ub.append(-body)
    b_ub.append(tol * np.ones(n))
    A_eq = np.zeros((1, nv))
    A_eq[0, :k] = 1.0
    res = lp_solve(
        np.zeros(nv), np.vstack(A_ub), np.concatenate(b_ub), A_eq, np.array([1.0])
    )
    if not res.optimal:
        return OptimalityCertificate(False)
    lam = res.x[:k]
    mu = res.x[k:]
    s = V.T @ lam
    nu = rays.T @ mu if m else np.zeros(n)
    return OptimalityCertificate(True, s=s, nu=nu)


# ---------------------------------------------------------------------------
# LSPAR d-stationarity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DStatCertificate:
    """Outcome of the composite d-stationarity test for LSPAR.

    ``min_value`` is the exact minimum of D -> f'(W; D) over the unit
    inf-ball; the point is d-stationary when that minimum is >= -tol.
    ``witness`` is a minimizing D when the test fails.
    """

    is_d_stationary: bool
    min_value: float
    tol: float
    n_selections: int
    witness: Optional[np.ndarray] = None

    def __bool__(self) -> bool:
        return self.is_d_stationary


def _lspar_arrays(dataset) -> tuple:
    X = np.asarray(dataset.X, dtype=float)
    y = np.asarray(dataset.y, dtype=float).ravel()
    return X, y


def lspar_d_stationarity_check(
    dataset,
    W,
    tol: float = 1e-6,
    act_tol: Optional[float] = None,
    selection_cap: int = 4096,
) -> DStatCertificate:
    """Exact d-stationarity test for least-squares piecewise-affine fitting.

    The model is s -> max_i w_i^T x_s with W = [w_1 .. w_k]; the directional
    derivative of the mean square loss along D is
    (1/N) sum_s (g_s(W) - y_s) * max_{i in I_s(W)} d_i^T x_s.  Samples with
    negative residual coefficient turn the max into a min, so their active
    branch must be enumerated; each selection leaves a convex problem whose
    exact box-constrained minimum is found in closed form (linear case) or
    by one LP (when positive-coefficient samples carry ties).

    Raises :class:`TooManyTiesError` above ``selection_cap`` selections;
    callers perturb W instead.
    """
    X, y = _lspar_arrays(dataset)
    W = np.asarray(W, dtype=float)
    n, k = W.shape
    if n * k > 16:
        raise SubdiffError("lspar check supports k*n <= 16")
    N = X.shape[0]
    act_tol = tol if act_tol is None else act_tol
    Z = X @ W  # (N, k) branch values
    gvals = Z.max(axis=1)
    resid = gvals - y
    actives = [np.flatnonzero(Z[s] >= gvals[s] - act_tol) for s in range(N)]

    neg_tied = [s for s in range(N) if resid[s] < 0 and actives[s].size > 1]
    total = 1
    for s in neg_tied:
        total *= actives[s].size
        if total > selection_cap:
            raise TooManyTiesError(
                f"TOO_MANY_TIES: {total}+ branch selections; perturb W"
            )
    pos_tied = [s for s in range(N) if resid[s] > 0 and actives[s].size > 1]

    base = np.zeros((n, k))  # linear part common to all selections
    for s in range(N):
        if resid[s] == 0.0 or s in pos_tied or (resid[s] < 0 and actives[s].size > 1):
            continue
        i = int(actives[s][0]) if resid[s] < 0 else int(np.argmax(Z[s]))
        base[:, i] += (resid[s] / N) * X[s]

    best_val = np.inf
    best_witnesses: list = []
    n_sel = 0
    choice_lists = [list(map(int, actives[s])) for s in neg_tied]
    for combo in itertools.product(*choice_lists) if choice_lists else [()]:
        n_sel += 1
        G = base.copy()
        for s, i in zip(neg_tied, combo):
            G[:, i] += (resid[s] / N) * X[s]
        if not pos_tied:
            val = float(-np.abs(G).sum())
            Dw = np.where(G > 0, -1.0, np.where(G < 0, 1.0, -1.0))
        else:
            # vars: D (n*k, box) and one epigraph var per tied positive sample
            t = len(pos_tied)
            nv = n * k + t
            c = np.zeros(nv)
            c[: n * k] = G.ravel()
            for j, s in enumerate(pos_tied):
                c[n * k + j] = resid[s] / N
            A_ub = []
            b_ub = []
            for j, s in enumerate(pos_tied):
                for i in actives[s]:
                    # d_i^T x_s - z_j <= 0 ; D stored row-major as (n, k).ravel()
                    row = np.zeros(nv)
                    for a in range(n):
                        row[a * k + i] = X[s, a]
                    row[n * k + j] = -1.0
                    A_ub.append(row)
                    b_ub.append(0.0)
            eye = np.eye(n * k, nv)
            A_ub.extend(eye)
            b_ub.extend(np.ones(n * k))
            A_ub.extend(-eye)
            b_ub.extend(np.ones(n * k))
            res = lp_solve(c, np.array(A_ub), np.array(b_ub))
            if not res.optimal:
                raise SubdiffError("internal: lspar direction LP failed")
            val = float(res.value)
            Dw = res.x[: n * k].reshape(n, k)
        if val < best_val - 1e-12:
            best_val = val
            best_witnesses = [Dw]
        elif val <= best_val + 1e-12:
            best_witnesses.append(Dw)

    is_d = best_val >= -tol
    witness = None
    if not is_d:
        witness = min(best_witnesses, key=lambda D: tuple(np.round(D.ravel(), 12)))
    return DStatCertificate(
        is_d_stationary=bool(is_d),
        min_value=float(best_val),
        tol=tol,
        n_selections=n_sel,
        witness=witness,
    )

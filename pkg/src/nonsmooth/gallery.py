"""Worked-example gallery: the canonical kink functions with expected sets.

Twelve classroom functions whose subdifferentials are known in closed form.
``run_gallery`` recomputes every expected value with the library's oracles
and reports one pass/fail row per entry; the CLI's ``gallery`` command and
the acceptance suite both consume it.

Two entries carry explicit footnotes where the exact values differ from
slogans commonly attached to these examples:

* half-squared ReLU loss at 0: the left piece is constant, so the Clarke
  directional derivative f°(0, 1) equals 0 (not a strictly positive value);
  irregularity still holds since f'(0, 1) = -1 < 0 = f°(0, 1).
* x + x^2 sin(1/x) at 0: the function is differentiable with slope 1, so
  the one-sided directional derivatives are f'(0, 1) = 1 and
  f'(0, -1) = -1 (the sign flips with the direction even though the
  two-sided slope is 1); the point is not classically stationary although
  0 lies in the Clarke set [0, 2].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .expr import (
    Abs,
    Affine,
    Builtin1D,
    Const,
    Expr,
    Scale,
    Sq,
    Var,
    evaluate,
    parse_expr,
    print_expr,
    vmax,
    vmin,
    vsum,
)
from .polyhedra import Ball, SetUnion, VPolytope, contains, minkowski_sum, set_distance
from .sampled import as_evaluator, as_gradient_oracle, fd_dir_deriv, gradient_sampling
from .stationarity import classify
from .subdiff import (
    L1Norm,
    L2Norm,
    bouligand,
    clarke,
    clarke_dir_deriv,
    convex_catalog_subdiff,
    dir_deriv,
    frechet,
    limiting,
)

__all__ = [
    "GalleryEntry",
    "GALLERY",
    "run_gallery",
    "neg_abs",
    "abs_x",
    "f1_expr",
    "f2_expr",
    "sum_rule_expr",
    "fig2_expr",
    "relu_loss_expr",
    "lspar_model_expr",
    "xsinlog_expr",
    "xsqsin_expr",
]


def neg_abs() -> Expr:
    return Scale(-1.0, Abs(Var(0)))


def abs_x() -> Expr:
    return Abs(Var(0))


def f1_expr() -> Expr:
    """max{-|x|, x - 1}."""
    return vmax(Scale(-1.0, Abs(Var(0))), Affine((1.0,), -1.0))


def f2_expr() -> Expr:
    """max{-x - 1, min{-x, 0}}."""
    return vmax(Affine((-1.0,), -1.0), vmin(Affine((-1.0,), 0.0), Const(0.0)))


def sum_rule_expr() -> tuple:
    """(max{x,0}, min{x,0}, their sum)."""
    p1 = vmax(Var(0), Const(0.0))
    p2 = vmin(Var(0), Const(0.0))
    return p1, p2, vsum(p1, p2)


def fig2_expr() -> Expr:
    """|x1| + 2 |x2|."""
    return vsum(Abs(Var(0)), Scale(2.0, Abs(Var(1))))


def relu_loss_expr() -> Expr:
    """(1/2) (max{w, 0} - 1)^2."""
    return Scale(0.5, Sq(vsum(vmax(Var(0), Const(0.0)), Const(-1.0))))


def lspar_model_expr() -> Expr:
    """max{x1+x2, x1-x2, -2x1+x2, -2x1-x2}."""
    return vmax(
        Affine((1.0, 1.0), 0.0),
        Affine((1.0, -1.0), 0.0),
        Affine((-2.0, 1.0), 0.0),
        Affine((-2.0, -1.0), 0.0),
    )


def xsinlog_expr() -> Expr:
    return Builtin1D("xsinlog", Var(0))


def xsqsin_expr() -> Expr:
    return Builtin1D("xsqsin", Var(0))


def _interval(lo: float, hi: float) -> SetUnion:
    return SetUnion((VPolytope([[lo], [hi]]),))


def _points(*vals: float) -> SetUnion:
    return SetUnion(tuple(VPolytope([[v]]) for v in sorted(vals)))


def _eq_sets(A: SetUnion, B: SetUnion, tol: float = 1e-9) -> bool:
    if A.is_empty or B.is_empty:
        return A.is_empty and B.is_empty
    return set_distance(A, B) <= tol


@dataclass(frozen=True)
class GalleryEntry:
    name: str
    check: Callable[[], tuple]  # -> (passed, detail)
    note: Optional[str] = None


def _check_neg_abs():
    e = neg_abs()
    ok = True
    msgs = []
    ok &= _eq_sets(bouligand(e, [0.0]).set, _points(-1.0, 1.0))
    ok &= _eq_sets(clarke(e, [0.0]).set, _interval(-1.0, 1.0))
    ok &= frechet(e, [0.0]).is_empty
    ok &= _eq_sets(limiting(e, [0.0]).set, _points(-1.0, 1.0))
    for d in (1.0, -1.0):
        ok &= abs(dir_deriv(e, [0.0], [d]).value - (-1.0)) <= 1e-12
        ok &= abs(clarke_dir_deriv(e, [0.0], [d]).value - 1.0) <= 1e-12
    msgs.append("B={-1,1}, C=[-1,1], F=empty, L={-1,1}, f'(0,+-1)=-1, f°(0,+-1)=1")
    return ok, "; ".join(msgs)


def _check_abs_regular():
    e = abs_x()
    full = _interval(-1.0, 1.0)
    ok = (
        _eq_sets(frechet(e, [0.0]).set, full)
        and _eq_sets(limiting(e, [0.0]).set, full)
        and _eq_sets(clarke(e, [0.0]).set, full)
    )
    return ok, "frechet = limiting = clarke = [-1,1] (convex, hence regular)"


def _check_f1():
    e = f1_expr()
    ok = _eq_sets(clarke(e, [0.0]).set, _interval(-1.0, 1.0))
    ok &= _eq_sets(limiting(e, [0.0]).set, _points(-1.0, 1.0))
    ok &= frechet(e, [0.0]).is_empty
    rep = classify(e, [0.0])
    ok &= rep.is_C is True and rep.is_l is False and rep.is_d is False
    rep5 = classify(e, [0.5])
    ok &= rep5.is_d is True and rep5.is_l is True and rep5.is_C is True
    return ok, "0 is C-stationary only; 0.5 is the unique l-/d-stationary point"


def _check_f2():
    e = f2_expr()
    ok = _eq_sets(limiting(e, [0.0]).set, _points(-1.0, 0.0))
    ok &= frechet(e, [0.0]).is_empty
    rep = classify(e, [0.0])
    ok &= rep.is_C is True and rep.is_l is True and rep.is_d is False
    repm1 = classify(e, [-1.0])
    ok &= repm1.is_d is True
    return ok, "L(0)={-1,0}, F(0)=empty: l- but not d-stationary; -1 is d-stationary"


def _check_sum_rule():
    p1, p2, s = sum_rule_expr()
    c = clarke(s, [0.0]).set
    ok = _eq_sets(c, SetUnion((VPolytope([[1.0]]),)))
    c1 = clarke(p1, [0.0]).set.components[0]
    c2 = clarke(p2, [0.0]).set.components[0]
    msum = minkowski_sum(c1, c2)
    ok &= _eq_sets(SetUnion((msum,)), _interval(0.0, 2.0))
    return ok, "clarke(f1+f2) = {1} strictly inside clarke(f1)+clarke(f2) = [0,2]"


def _check_fig2():
    e = fig2_expr()
    c = clarke(e, [1.0, 0.0]).set
    ok = contains(c, [1.0, 2.0], 1e-9)
    expected = SetUnion((VPolytope([[1.0, -2.0], [1.0, 2.0]]),))
    ok &= _eq_sets(c, expected)
    dd = dir_deriv(e, [1.0, 0.0], [-1.0, -2.0]).value
    ok &= abs(dd - 3.0) <= 1e-12  # moving against (1,2) increases f: not descent
    return ok, "(1,2) is a subgradient at (1,0) but -(1,2) is not a descent direction"


def _check_l1():
    s = convex_catalog_subdiff(L1Norm(), [1.0, 0.0]).set
    expected = SetUnion((VPolytope([[1.0, -1.0], [1.0, 1.0]]),))
    return _eq_sets(s, expected), "subdiff ||.||_1 at (1,0) = {1} x [-1,1]"


def _check_l2():
    s = convex_catalog_subdiff(L2Norm(), [0.0, 0.0]).set
    comp = s.components[0]
    ok = isinstance(comp, Ball) and comp.radius == 1.0 and np.all(comp.center == 0.0)
    ok &= contains(s, [0.6, -0.8], 1e-9) and not contains(s, [0.8, -0.8], 1e-9)
    return ok, "subdiff ||.||_2 at 0 = closed unit ball"


def _check_relu_loss():
    e = relu_loss_expr()
    ok = _eq_sets(bouligand(e, [0.0]).set, _points(-1.0, 0.0))
    ok &= _eq_sets(clarke(e, [0.0]).set, _interval(-1.0, 0.0))
    fp = dir_deriv(e, [0.0], [1.0]).value
    fo = clarke_dir_deriv(e, [0.0], [1.0]).value
    ok &= abs(fp - (-1.0)) <= 1e-12 and abs(fo - 0.0) <= 1e-12
    return ok, f"f'(0,1)={fp:g} < f°(0,1)={fo:g}: not subdifferentially regular"


def _check_xsinlog():
    r = fd_dir_deriv(as_evaluator(xsinlog_expr()), [0.0], [1.0])
    ok = (not r.converged) and r.amplitude >= 1.8
    return ok, (
        f"difference quotients oscillate (amplitude {r.amplitude:.3f} over the "
        "schedule): no directional derivative at 0"
    )


def _check_xsqsin():
    e = xsqsin_expr()
    ss = gradient_sampling(as_gradient_oracle(e), [0.0])
    d = set_distance(ss.set, _interval(0.0, 2.0))
    ok = d <= 0.05
    r = fd_dir_deriv(as_evaluator(e), [0.0], [1.0])
    ok &= r.converged and abs(r.value - 1.0) <= 1e-6
    ok &= abs(dir_deriv(e, [0.0], [1.0]).value - 1.0) <= 1e-12
    ok &= abs(dir_deriv(e, [0.0], [-1.0]).value - (-1.0)) <= 1e-12
    rep = classify(e, [0.0])
    ok &= rep.is_d is False
    return ok, (
        f"sampled Clarke set within {d:.3f} of [0,2]; slope 1 at 0, so 0 is "
        "C-stationary but not d-stationary"
    )


def _check_lspar_model():
    text = (
        "(max (affine (1 1) 0) (affine (1 -1) 0) (affine (-2 1) 0) (affine (-2 -1) 0))"
    )
    e = parse_expr(text)
    ok = parse_expr(print_expr(e)) == e
    ok &= abs(evaluate(e, [1.0, 1.0]) - 2.0) <= 1e-15
    return ok, "4-piece model parses, round-trips, and evaluates to 2 at (1,1)"


GALLERY = (
    GalleryEntry("neg-abs-at-zero", _check_neg_abs),
    GalleryEntry("abs-at-zero-regular", _check_abs_regular),
    GalleryEntry("f1-hierarchy", _check_f1),
    GalleryEntry("f2-hierarchy", _check_f2),
    GalleryEntry("sum-rule-failure", _check_sum_rule),
    GalleryEntry("fig2-non-descent", _check_fig2),
    GalleryEntry("l1-norm-catalog", _check_l1),
    GalleryEntry("l2-norm-catalog", _check_l2),
    GalleryEntry(
        "relu-loss-irregular",
        _check_relu_loss,
        note=(
            "the left piece is constant, so f°(0,1) = 0 exactly; a strictly "
            "positive value is sometimes quoted for this example, but "
            "irregularity needs only f'(0,1) = -1 < 0 = f°(0,1)"
        ),
    ),
    GalleryEntry("xsinlog-not-dir-diff", _check_xsinlog),
    GalleryEntry(
        "xsqsin-tightness",
        _check_xsqsin,
        note=(
            "f is differentiable at 0 with slope 1: f'(0,1) = 1 while "
            "f'(0,-1) = -1 (one-sided values flip sign with the direction); "
            "statements giving +1 for both directions refer to the two-sided "
            "slope, not to the one-sided limits"
        ),
    ),
    GalleryEntry("lspar-model-parse-eval", _check_lspar_model),
)


def run_gallery() -> list:
    """Run every gallery entry; returns [(name, passed, detail, note)]."""
    out = []
    for entry in GALLERY:
        try:
            passed, detail = entry.check()
        except Exception as exc:  # a crash is a failure, not an abort
            passed, detail = False, f"raised {type(exc).__name__}: {exc}"
        out.append((entry.name, bool(passed), detail, entry.note))
    return out

"""Expression trees for piecewise-defined functions.

The DSL covers four nested fragments:

* ``PA`` -- piecewise affine: ``Const``/``Var``/``Affine`` closed under
  ``Sum``/``Scale``/``Max``/``Min``/``Abs``;
* ``PLQ`` -- piecewise linear-quadratic: PA plus ``Sq`` applied to PA
  subtrees, closed under ``Sum``/``Scale``;
* ``SMOOTH1D`` -- one-dimensional trees containing ``Builtin1D`` leaves from
  a registry of piecewise-smooth scalar functions;
* ``GENERAL`` -- everything else.

Exact oracles accept PA/PLQ (and 1-D trees whose builtins expose one-sided
derivatives); numeric sampling oracles accept anything evaluable.
Expressions are immutable after construction and all operations here are
pure, so trees can be shared freely across threads.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterator, Optional

import numpy as np

__all__ = [
    "Expr",
    "Const",
    "Var",
    "Affine",
    "Sum",
    "Scale",
    "Max",
    "Min",
    "Abs",
    "Sq",
    "Builtin1D",
    "FragmentClass",
    "ActivePattern",
    "Builtin1DSpec",
    "BUILTINS",
    "register_builtin",
    "ExprError",
    "ExprSyntaxError",
    "DimensionMismatchError",
    "classify_fragment",
    "evaluate",
    "active_pattern",
    "parse_expr",
    "print_expr",
    "dim_required",
    "iter_nodes",
    "vsum",
    "vmax",
    "vmin",
]


class ExprError(Exception):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    """Parse failure, carrying 1-based line/column of the offending token."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


class DimensionMismatchError(ExprError):
    """Point dimension incompatible with the expression."""


# ---------------------------------------------------------------------------
# Node types
# ---------------------------------------------------------------------------


class Expr:
    """Base class for all expression nodes."""

    __slots__ = ()

    def children(self) -> tuple["Expr", ...]:
        return ()

    def __call__(self, x) -> float:
        return evaluate(self, x)


@dataclass(frozen=True)
class Const(Expr):
    c: float

    def __post_init__(self):
        if not math.isfinite(self.c):
            raise ExprError("Const requires a finite value")


@dataclass(frozen=True)
class Var(Expr):
    i: int

    def __post_init__(self):
        if self.i < 0:
            raise ExprError("Var index must be non-negative")


@dataclass(frozen=True)
class Affine(Expr):
    """a^T x + b with a dense coefficient vector."""

    a: tuple
    b: float

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        if not all(math.isfinite(v) for v in self.a) or not math.isfinite(self.b):
            raise ExprError("Affine requires finite coefficients")
        if len(self.a) == 0:
            raise ExprError("Affine requires at least one coefficient")


@dataclass(frozen=True)
class Sum(Expr):
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if len(self.terms) < 1:
            raise ExprError("Sum requires at least one term")

    def children(self):
        return self.terms


@dataclass(frozen=True)
class Scale(Expr):
    c: float
    child: Expr

    def __post_init__(self):
        if not math.isfinite(self.c):
            raise ExprError("Scale requires a finite factor")

    def children(self):
        return (self.child,)


@dataclass(frozen=True)
class Max(Expr):
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if len(self.terms) < 2:
            raise ExprError("Max requires at least two children")

    def children(self):
        return self.terms


@dataclass(frozen=True)
class Min(Expr):
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if len(self.terms) < 2:
            raise ExprError("Min requires at least two children")

    def children(self):
        return self.terms


@dataclass(frozen=True)
class Abs(Expr):
    child: Expr

    def children(self):
        return (self.child,)


@dataclass(frozen=True)
class Sq(Expr):
    child: Expr

    def children(self):
        return (self.child,)


@dataclass(frozen=True)
class Builtin1D(Expr):
    name: str
    child: Expr

    def __post_init__(self):
        if self.name not in BUILTINS:
            raise ExprError(f"unknown builtin {self.name!r}")

    def children(self):
        return (self.child,)


def vsum(*terms: Expr) -> Expr:
    return Sum(tuple(terms))


def vmax(*terms: Expr) -> Expr:
    return Max(tuple(terms))


def vmin(*terms: Expr) -> Expr:
    return Min(tuple(terms))


# ---------------------------------------------------------------------------
# Builtin registry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Builtin1DSpec:
    """Registry entry for a 1-D piecewise-smooth scalar function.

    ``deriv`` returns the derivative where it exists and ``None`` elsewhere.
    ``one_sided(t, s)`` returns the one-sided directional derivative
    value ``lim_{u->0+} (f(t + s*u) - f(t)) / u`` for ``s`` in {+1, -1},
    or ``None`` when the limit does not exist.
    """

    name: str
    value: Callable[[float], float]
    deriv: Callable[[float], Optional[float]]
    one_sided: Callable[[float, int], Optional[float]]
    nondiff_points: tuple


def _xsinlog_value(t: float) -> float:
    return t * math.sin(math.log(1.0 / t)) if t > 0.0 else 0.0


def _xsinlog_deriv(t: float) -> Optional[float]:
    if t > 0.0:
        u = math.log(1.0 / t)
        return math.sin(u) - math.cos(u)
    if t < 0.0:
        return 0.0
    return None  # not even directionally differentiable at 0


def _xsinlog_one_sided(t: float, s: int) -> Optional[float]:
    if t == 0.0:
        # left side is constant 0; right-side quotient sin(log(1/u)) oscillates
        return 0.0 if s < 0 else None
    d = _xsinlog_deriv(t)
    return None if d is None else s * d


def _xsqsin_value(t: float) -> float:
    return t + t * t * math.sin(1.0 / t) if t > 0.0 else t


def _xsqsin_deriv(t: float) -> Optional[float]:
    if t > 0.0:
        return 1.0 + 2.0 * t * math.sin(1.0 / t) - math.cos(1.0 / t)
    # differentiable at 0 with slope 1 (the quadratic term is o(t))
    return 1.0


def _xsqsin_one_sided(t: float, s: int) -> Optional[float]:
    d = _xsqsin_deriv(t)
    return None if d is None else s * d if t != 0.0 else (1.0 if s > 0 else -1.0)


BUILTINS: dict = {}


def register_builtin(spec: Builtin1DSpec) -> None:
    BUILTINS[spec.name] = spec


register_builtin(
    Builtin1DSpec(
        name="xsinlog",
        value=_xsinlog_value,
        deriv=_xsinlog_deriv,
        one_sided=_xsinlog_one_sided,
        nondiff_points=(0.0,),
    )
)
register_builtin(
    Builtin1DSpec(
        name="xsqsin",
        value=_xsqsin_value,
        deriv=_xsqsin_deriv,
        one_sided=_xsqsin_one_sided,
        # differentiable everywhere, but the derivative is discontinuous at 0
        nondiff_points=(),
    )
)


# ---------------------------------------------------------------------------
# Traversal, evaluation, classification
# ---------------------------------------------------------------------------

Path = tuple  # tuple of child indices from the root


def iter_nodes(e: Expr, path: Path = ()) -> Iterator[tuple]:
    """Yield (path, node) pairs in pre-order."""
    yield path, e
    for i, c in enumerate(e.children()):
        yield from iter_nodes(c, path + (i,))


def dim_required(e: Expr) -> int:
    """Smallest point dimension this expression can be evaluated at."""
    d = 0
    for _, node in iter_nodes(e):
        if isinstance(node, Var):
            d = max(d, node.i + 1)
        elif isinstance(node, Affine):
            d = max(d, len(node.a))
    return d


def _check_point(e: Expr, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise DimensionMismatchError("empty point")
    if not np.all(np.isfinite(x)):
        raise DimensionMismatchError("point has non-finite entries")
    for _, node in iter_nodes(e):
        if isinstance(node, Var) and node.i >= x.size:
            raise DimensionMismatchError(
                f"var {node.i} out of range for dimension {x.size}"
            )
        if isinstance(node, Affine) and len(node.a) != x.size:
            raise DimensionMismatchError(
                f"affine coefficient length {len(node.a)} != dimension {x.size}"
            )
    return x


def evaluate(e: Expr, x) -> float:
    """Evaluate ``e`` at point ``x`` (any 1-D sequence)."""
    x = _check_point(e, x)

    def rec(node: Expr) -> float:
        if isinstance(node, Const):
            return node.c
        if isinstance(node, Var):
            return float(x[node.i])
        if isinstance(node, Affine):
            return float(np.dot(node.a, x) + node.b)
        if isinstance(node, Sum):
            return float(sum(rec(t) for t in node.terms))
        if isinstance(node, Scale):
            return node.c * rec(node.child)
        if isinstance(node, Max):
            return max(rec(t) for t in node.terms)
        if isinstance(node, Min):
            return min(rec(t) for t in node.terms)
        if isinstance(node, Abs):
            return abs(rec(node.child))
        if isinstance(node, Sq):
            v = rec(node.child)
            return v * v
        if isinstance(node, Builtin1D):
            return BUILTINS[node.name].value(rec(node.child))
        raise ExprError(f"unknown node {node!r}")

    return rec(e)


class FragmentClass(Enum):
    PA = "PA"
    PLQ = "PLQ"
    SMOOTH1D = "SMOOTH1D"
    GENERAL = "GENERAL"


_ORDER = {FragmentClass.PA: 0, FragmentClass.PLQ: 1, FragmentClass.GENERAL: 2}


def classify_fragment(e: Expr) -> FragmentClass:
    """Tightest fragment containing ``e``; deterministic and monotone."""
    has_builtin = any(isinstance(n, Builtin1D) for _, n in iter_nodes(e))
    if has_builtin:
        return FragmentClass.SMOOTH1D if dim_required(e) <= 1 else FragmentClass.GENERAL

    def rec(node: Expr) -> FragmentClass:
        if isinstance(node, (Const, Var, Affine)):
            return FragmentClass.PA
        if isinstance(node, (Sum, Scale)):
            kids = [rec(c) for c in node.children()]
            return max(kids, key=_ORDER.get)
        if isinstance(node, (Max, Min, Abs)):
            kids = [rec(c) for c in node.children()]
            if all(k is FragmentClass.PA for k in kids):
                return FragmentClass.PA
            return FragmentClass.GENERAL
        if isinstance(node, Sq):
            k = rec(node.child)
            return FragmentClass.PLQ if k is FragmentClass.PA else FragmentClass.GENERAL
        raise ExprError(f"unknown node {node!r}")

    return rec(e)


# ---------------------------------------------------------------------------
# Active patterns
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ActivePattern:
    """Which branches are active at a point, per Max/Min/Abs node path.

    ``branch_active`` maps the path of each Max/Min node to the tuple of
    0-based child indices whose value lies within ``tol`` of the node value.
    ``abs_sign`` maps each Abs node path to '+', '-', or '0' (child within
    ``tol`` of zero).
    """

    branch_active: dict = field(default_factory=dict)
    abs_sign: dict = field(default_factory=dict)
    tol: float = 0.0

    @property
    def is_smooth_point(self) -> bool:
        """True when all active sets are singletons and no Abs child is 0."""
        return all(len(v) == 1 for v in self.branch_active.values()) and all(
            s != "0" for s in self.abs_sign.values()
        )

    def signature(self) -> tuple:
        return (
            tuple(sorted((p, tuple(a)) for p, a in self.branch_active.items())),
            tuple(sorted(self.abs_sign.items())),
        )


def active_pattern(e: Expr, x, tol: float = 0.0) -> ActivePattern:
    """Activity record of every Max/Min/Abs node of ``e`` at ``x``.

    Requires a PA or PLQ tree; ``tol`` is an absolute activity tolerance
    (0 gives the exact pattern).
    """
    frag = classify_fragment(e)
    if frag not in (FragmentClass.PA, FragmentClass.PLQ):
        raise ExprError(f"active_pattern requires a PA/PLQ tree, got {frag.value}")
    if tol < 0:
        raise ExprError("tol must be >= 0")
    x = _check_point(e, x)
    branch: dict = {}
    signs: dict = {}

    def rec(node: Expr, path: Path) -> float:
        if isinstance(node, Const):
            return node.c
        if isinstance(node, Var):
            return float(x[node.i])
        if isinstance(node, Affine):
            return float(np.dot(node.a, x) + node.b)
        if isinstance(node, Sum):
            return float(sum(rec(t, path + (i,)) for i, t in enumerate(node.terms)))
        if isinstance(node, Scale):
            return node.c * rec(node.child, path + (0,))
        if isinstance(node, (Max, Min)):
            vals = [rec(t, path + (i,)) for i, t in enumerate(node.terms)]
            v = max(vals) if isinstance(node, Max) else min(vals)
            if isinstance(node, Max):
                act = tuple(i for i, w in enumerate(vals) if w >= v - tol)
            else:
                act = tuple(i for i, w in enumerate(vals) if w <= v + tol)
            branch[path] = act
            return v
        if isinstance(node, Abs):
            v = rec(node.child, path + (0,))
            signs[path] = "0" if abs(v) <= tol else ("+" if v > 0 else "-")
            return abs(v)
        if isinstance(node, Sq):
            v = rec(node.child, path + (0,))
            return v * v
        raise ExprError(f"unexpected node {node!r}")

    rec(e, ())
    return ActivePattern(branch_active=branch, abs_sign=signs, tol=tol)


# ---------------------------------------------------------------------------
# S-expression parser / printer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"\(|\)|[^\s()]+")
_NUM_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def _tokenize(text: str):
    tokens = []
    for lineno, line in enumerate(text.splitlines() or [""], start=1):
        body = line.split(";", 1)[0]  # ';' starts a comment
        for m in _TOKEN_RE.finditer(body):
            tokens.append((m.group(0), lineno, m.start() + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def _err(self, msg: str, tok=None):
        if tok is None:
            tok = self.tokens[self.pos - 1] if self.pos else ("", 1, 1)
        raise ExprSyntaxError(msg, tok[1], tok[2])

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self):
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else ("", 1, 1)
            raise ExprSyntaxError("unexpected end of input", last[1], last[2])
        self.pos += 1
        return tok

    def number(self) -> float:
        tok = self.next()
        if not _NUM_RE.match(tok[0]):
            self._err(f"expected a number, got {tok[0]!r}", tok)
        return float(tok[0])

    def integer(self) -> int:
        tok = self.next()
        if not tok[0].lstrip("+-").isdigit():
            self._err(f"expected an integer, got {tok[0]!r}", tok)
        return int(tok[0])

    def expect(self, lit: str):
        tok = self.next()
        if tok[0] != lit:
            self._err(f"expected {lit!r}, got {tok[0]!r}", tok)

    def expr(self) -> Expr:
        tok = self.next()
        if tok[0] != "(":
            self._err(f"expected '(', got {tok[0]!r}", tok)
        head = self.next()
        name = head[0]
        if name == "const":
            node: Expr = Const(self.number())
        elif name == "var":
            node = Var(self.integer())
        elif name == "affine":
            self.expect("(")
            coeffs = []
            while self.peek() and self.peek()[0] != ")":
                coeffs.append(self.number())
            self.expect(")")
            if not coeffs:
                self._err("affine requires at least one coefficient", head)
            node = Affine(tuple(coeffs), self.number())
        elif name in ("sum", "max", "min"):
            kids = []
            while self.peek() and self.peek()[0] == "(":
                kids.append(self.expr())
            minimum = 1 if name == "sum" else 2
            if len(kids) < minimum:
                self._err(f"{name} requires at least {minimum} child expression(s)", head)
            node = {"sum": Sum, "max": Max, "min": Min}[name](tuple(kids))
        elif name == "scale":
            node = Scale(self.number(), self.expr())
        elif name == "abs":
            node = Abs(self.expr())
        elif name == "sq":
            node = Sq(self.expr())
        elif name == "builtin":
            btok = self.next()
            if btok[0] not in BUILTINS:
                self._err(f"unknown builtin {btok[0]!r}", btok)
            node = Builtin1D(btok[0], self.expr())
        else:
            self._err(f"unknown form {name!r}", head)
        self.expect(")")
        return node


def parse_expr(text: str) -> Expr:
    """Parse the S-expression grammar::

        expr := (const R) | (var N) | (affine (R+) R) | (sum expr+)
              | (scale R expr) | (max expr expr+) | (min expr expr+)
              | (abs expr) | (sq expr) | (builtin NAME expr)

    Raises :class:`ExprSyntaxError` with line/column on malformed input.
    """
    p = _Parser(text)
    node = p.expr()
    tok = p.peek()
    if tok is not None:
        raise ExprSyntaxError(f"trailing input {tok[0]!r}", tok[1], tok[2])
    return node


def _fmt(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def print_expr(e: Expr) -> str:
    """Canonical S-expression text; ``parse_expr(print_expr(e)) == e``."""
    if isinstance(e, Const):
        return f"(const {_fmt(e.c)})"
    if isinstance(e, Var):
        return f"(var {e.i})"
    if isinstance(e, Affine):
        return f"(affine ({' '.join(_fmt(v) for v in e.a)}) {_fmt(e.b)})"
    if isinstance(e, Sum):
        return f"(sum {' '.join(print_expr(t) for t in e.terms)})"
    if isinstance(e, Scale):
        return f"(scale {_fmt(e.c)} {print_expr(e.child)})"
    if isinstance(e, Max):
        return f"(max {' '.join(print_expr(t) for t in e.terms)})"
    if isinstance(e, Min):
        return f"(min {' '.join(print_expr(t) for t in e.terms)})"
    if isinstance(e, Abs):
        return f"(abs {print_expr(e.child)})"
    if isinstance(e, Sq):
        return f"(sq {print_expr(e.child)})"
    if isinstance(e, Builtin1D):
        return f"(builtin {e.name} {print_expr(e.child)})"
    raise ExprError(f"unknown node {e!r}")

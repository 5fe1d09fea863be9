"""Low-dimensional polyhedral geometry and a small dense LP solver.

Everything here is desk scale by design: polytopes live in dimension <= 4,
the LP solver is a dense two-phase simplex with Bland's rule (no cycling),
and cone representation conversion uses the double description method with
LP-based pruning.  All values are plain numpy arrays; all functions are pure.

Set components:

* :class:`VPolytope`   -- convex hull of a finite vertex list,
* :class:`HPolyhedron` -- intersection of halfspaces ``a^T z <= b``,
* :class:`Ball`        -- Euclidean ball (needed for l2-norm subdifferentials
  and ball constraint sets),
* :class:`Cone`        -- polyhedral cone with ray and/or halfspace data,
* :class:`SetUnion`    -- finite, possibly non-convex union of the above.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

__all__ = [
    "PolyhedraError",
    "EmptySetError",
    "DimensionCapError",
    "LPResult",
    "lp_solve",
    "VPolytope",
    "HPolyhedron",
    "Ball",
    "Box",
    "Cone",
    "SetUnion",
    "conv_hull",
    "support_value",
    "dual_cone",
    "polar_cone",
    "cone_from_rays",
    "cone_rays_from_halfspaces",
    "contains",
    "set_distance",
    "minkowski_sum",
    "vertex_enumeration",
    "set_to_json",
    "set_from_json",
]

PIVOT_TOL = 1e-9
MAX_POLYTOPE_DIM = 4
MAX_LP_DIM = 8  # advertised public cap; internal callers may go modestly above


class PolyhedraError(Exception):
    pass


class EmptySetError(PolyhedraError):
    """Raised for operations that are undefined on the empty set."""


class DimensionCapError(PolyhedraError):
    pass


# ---------------------------------------------------------------------------
# Dense simplex
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: Optional[np.ndarray] = None
    value: Optional[float] = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _simplex_phase(T, basis, cost, allowed, tol):
    """Run simplex iterations on canonical tableau ``T`` (rows m, cols N+1).

    ``cost`` is the length-N cost vector, ``allowed`` a boolean mask of
    columns permitted to enter.  Bland's rule on both the entering and the
    leaving choice guarantees finite termination.  Returns "optimal" or
    "unbounded"; ``T`` and ``basis`` are updated in place.
    """
    m = T.shape[0]
    ncols = T.shape[1] - 1
    while True:
        cb = cost[basis]
        # reduced costs: c_j - c_B^T T[:, j]
        red = cost[:ncols] - cb @ T[:, :ncols]
        entering = -1
        for j in range(ncols):
            if allowed[j] and red[j] < -tol:
                entering = j
                break
        if entering < 0:
            return "optimal"
        col = T[:, entering]
        best = None
        for i in range(m):
            if col[i] > tol:
                ratio = T[i, -1] / col[i]
                if best is None or ratio < best[0] - tol or (
                    abs(ratio - best[0]) <= tol and basis[i] < basis[best[1]]
                ):
                    best = (ratio, i)
        if best is None:
            return "unbounded"
        i = best[1]
        piv = T[i, entering]
        T[i] /= piv
        for r in range(m):
            if r != i and T[r, entering] != 0.0:
                T[r] -= T[r, entering] * T[i]
        basis[i] = entering


def lp_solve(
    c,
    A_ub=None,
    b_ub=None,
    A_eq=None,
    b_eq=None,
    tol: float = PIVOT_TOL,
) -> LPResult:
    """Minimize ``c^T x`` over ``A_ub x <= b_ub`` and ``A_eq x = b_eq``.

    Variables are free; dense two-phase simplex with Bland's rule and pivot
    tolerance ``tol``.  Designed for dimensions up to ~8 and a few hundred
    constraints.  The returned optimum satisfies the constraints to 1e-9.
    """
    c = np.asarray(c, dtype=float).ravel()
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, float).ravel()
    if A_ub.shape[1] != n or A_eq.shape[1] != n:
        raise PolyhedraError("dimension mismatch between objective and constraints")
    if A_ub.shape[0] != b_ub.size or A_eq.shape[0] != b_eq.size:
        raise PolyhedraError("constraint matrix/rhs size mismatch")

    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq
    if m == 0:
        if np.all(np.abs(c) <= tol):
            return LPResult("optimal", np.zeros(n), 0.0)
        return LPResult("unbounded")

    # columns: u (n), v (n), slack (m_ub), artificial (m)
    nuv = 2 * n
    ncols = nuv + m_ub + m
    M = np.zeros((m, ncols))
    rhs = np.concatenate([b_ub, b_eq])
    M[:m_ub, :n] = A_ub
    M[:m_ub, n:nuv] = -A_ub
    M[m_ub:, :n] = A_eq
    M[m_ub:, n:nuv] = -A_eq
    M[:m_ub, nuv : nuv + m_ub] = np.eye(m_ub)
    flip = rhs < 0
    M[flip] *= -1.0
    rhs = np.abs(rhs)
    M[:, nuv + m_ub :] = np.eye(m)

    T = np.hstack([M, rhs[:, None]])
    basis = list(range(nuv + m_ub, ncols))

    # phase 1: drive artificials to zero
    cost1 = np.zeros(ncols)
    cost1[nuv + m_ub :] = 1.0
    allowed = np.ones(ncols, dtype=bool)
    status = _simplex_phase(T, basis, cost1, allowed, tol)
    phase1 = float(cost1[basis] @ T[:, -1])
    if phase1 > 1e-7:
        return LPResult("infeasible")
    # pivot remaining artificials out of the basis where possible
    for i in range(m):
        if basis[i] >= nuv + m_ub:
            for j in range(nuv + m_ub):
                if abs(T[i, j]) > tol:
                    piv = T[i, j]
                    T[i] /= piv
                    for r in range(m):
                        if r != i and T[r, j] != 0.0:
                            T[r] -= T[r, j] * T[i]
                    basis[i] = j
                    break

    # phase 2
    cost2 = np.zeros(ncols)
    cost2[:n] = c
    cost2[n:nuv] = -c
    allowed[nuv + m_ub :] = False
    status = _simplex_phase(T, basis, cost2, allowed, tol)
    if status == "unbounded":
        return LPResult("unbounded")
    z = np.zeros(ncols)
    for i, bi in enumerate(basis):
        z[bi] = T[i, -1]
    x = z[:n] - z[n:nuv]
    return LPResult("optimal", x, float(c @ x))


# ---------------------------------------------------------------------------
# Set components
# ---------------------------------------------------------------------------


def _canon_vertices(points: np.ndarray) -> np.ndarray:
    """Lexicographically sorted rows."""
    if points.shape[0] <= 1:
        return points
    order = np.lexsort(points.T[::-1])
    return points[order]


@dataclass(frozen=True)
class VPolytope:
    """Convex hull of a finite vertex list; empty list denotes the empty set."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if v.size == 0:
            v = v.reshape(0, max(1, v.shape[1] if v.ndim == 2 else 1))
        object.__setattr__(self, "vertices", v)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def is_empty(self) -> bool:
        return self.vertices.shape[0] == 0


@dataclass(frozen=True)
class HPolyhedron:
    """Intersection of halfspaces {z : A z <= b}; may be empty or unbounded."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        if A.shape[0] != b.size:
            raise PolyhedraError("halfspace matrix/offset size mismatch")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.A.shape[1]


@dataclass(frozen=True)
class Ball:
    """Euclidean ball {z : ||z - center||_2 <= radius}."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).ravel())
        if self.radius < 0:
            raise PolyhedraError("ball radius must be >= 0")

    @property
    def dim(self) -> int:
        return self.center.size


@dataclass(frozen=True)
class Box:
    """Axis-aligned box {z : lo <= z <= hi}."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).ravel()
        hi = np.asarray(self.hi, dtype=float).ravel()
        if lo.size != hi.size or np.any(lo > hi):
            raise PolyhedraError("invalid box bounds")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    def to_hpolyhedron(self) -> HPolyhedron:
        n = self.dim
        eye = np.eye(n)
        return HPolyhedron(np.vstack([eye, -eye]), np.concatenate([self.hi, -self.lo]))


Component = Union[VPolytope, HPolyhedron, Ball]


@dataclass(frozen=True)
class Cone:
    """Polyhedral cone with ray generators and/or halfspace normals.

    ``rays`` is a (k, n) array whose conic hull is the cone; ``normals`` is a
    (m, n) array meaning {z : normals @ z >= 0}.  An empty ray list with a
    known dimension denotes the trivial cone {0}.  When both representations
    are present they are cross-validated on construction.
    """

    rays: np.ndarray
    normals: Optional[np.ndarray] = None
    validate: bool = True

    def __post_init__(self):
        rays = np.atleast_2d(np.asarray(self.rays, dtype=float))
        if rays.size == 0:
            rays = rays.reshape(0, rays.shape[1] if rays.ndim == 2 and rays.shape[1] else 1)
        object.__setattr__(self, "rays", rays)
        if self.normals is not None:
            object.__setattr__(
                self, "normals", np.atleast_2d(np.asarray(self.normals, dtype=float))
            )
        if self.validate and self.normals is not None and self.dim <= MAX_POLYTOPE_DIM:
            self._cross_validate()

    @property
    def dim(self) -> int:
        if self.rays.shape[1] > 0:
            return self.rays.shape[1]
        assert self.normals is not None
        return self.normals.shape[1]

    @property
    def is_trivial(self) -> bool:
        return self.rays.shape[0] == 0

    def _cross_validate(self):
        for r in self.rays:
            if np.any(self.normals @ r < -1e-7 * max(1.0, float(np.abs(r).max()))):
                raise PolyhedraError("cone ray violates its own halfspace system")
        regen = cone_rays_from_halfspaces(self.normals, self.dim)
        for r in regen:
            if not _in_cone_rays(self.rays, r, 1e-7):
                raise PolyhedraError("cone halfspaces admit a ray outside the ray hull")


@dataclass(frozen=True)
class SetUnion:
    """Finite union of convex components (possibly non-convex as a whole)."""

    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        for c in comps:
            if isinstance(c, VPolytope) and c.is_empty:
                raise PolyhedraError("SetUnion components must be non-empty")
        object.__setattr__(self, "components", comps)

    @property
    def is_empty(self) -> bool:
        return len(self.components) == 0

    @property
    def dim(self) -> int:
        if self.is_empty:
            return 0
        return self.components[0].dim


# ---------------------------------------------------------------------------
# Hulls, support functions, membership
# ---------------------------------------------------------------------------


def _in_conv_hull(points: np.ndarray, p: np.ndarray, tol: float) -> bool:
    """LP certificate for p in conv(points), to absolute tolerance tol."""
    if points.shape[0] == 0:
        return False
    k, n = points.shape
    scale = max(1.0, float(np.abs(points).max()), float(np.abs(p).max()))
    # variables: weights lambda (k,)
    A_ub = [-np.eye(k)]
    b_ub = [np.zeros(k)]
    A_ub.append(points.T)
    b_ub.append(p + tol * scale)
    A_ub.append(-points.T)
    b_ub.append(-(p - tol * scale))
    res = lp_solve(
        np.zeros(k),
        np.vstack(A_ub),
        np.concatenate(b_ub),
        A_eq=np.ones((1, k)),
        b_eq=np.array([1.0]),
    )
    return res.optimal


def _in_cone_rays(rays: np.ndarray, p: np.ndarray, tol: float) -> bool:
    """LP certificate for p in cone(rays) (conic combination), tolerance tol."""
    scale = max(1.0, float(np.abs(p).max()))
    if np.all(np.abs(p) <= tol * scale):
        return True
    if rays.shape[0] == 0:
        return False
    k = rays.shape[0]
    A_ub = np.vstack([-np.eye(k), rays.T, -rays.T])
    b_ub = np.concatenate([np.zeros(k), p + tol * scale, -(p - tol * scale)])
    return lp_solve(np.zeros(k), A_ub, b_ub).optimal


def _monotone_chain_2d(pts: np.ndarray) -> np.ndarray:
    """Extreme points of a 2-D point cloud (Andrew's monotone chain)."""
    pts = pts[np.lexsort(pts.T[::-1])]
    scale = max(1.0, float(np.abs(pts).max()))
    eps = 1e-12 * scale * scale

    def half(points):
        out: list = []
        for p in points:
            while len(out) >= 2:
                o, a = out[-2], out[-1]
                cross = (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0])
                if cross <= eps:  # drop collinear and clockwise turns
                    out.pop()
                else:
                    break
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    hull = lower[:-1] + upper[:-1]
    if not hull:  # all points coincide
        hull = [pts[0]]
    return np.array(hull)


def conv_hull(points, tol: float = 1e-9) -> VPolytope:
    """Irredundant vertex set of the convex hull of ``points`` (dim <= 4).

    Degenerate inputs (duplicates, collinear points) are fine; the result is
    canonicalized by lexicographic vertex ordering.  Empty input gives the
    empty polytope.  Dimensions 1 and 2 use direct geometric hulls; higher
    dimensions use LP-based redundancy pruning, so keep those point sets at
    desk scale.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        return VPolytope(np.zeros((0, 1)))
    if pts.shape[1] > MAX_POLYTOPE_DIM:
        raise DimensionCapError(f"conv_hull supports dim <= {MAX_POLYTOPE_DIM}")
    scale = max(1.0, float(np.abs(pts).max()))
    n = pts.shape[1]
    if n == 1:
        lo, hi = float(pts.min()), float(pts.max())
        verts = [[lo]] if hi - lo <= 1e-12 * scale else [[lo], [hi]]
        return VPolytope(np.array(verts))
    # vectorized dedupe of near-identical points
    rounded = np.round(pts / (1e-12 * scale)) * (1e-12 * scale)
    _, idx = np.unique(rounded, axis=0, return_index=True)
    kept_arr = pts[np.sort(idx)]
    if n == 2:
        return VPolytope(_canon_vertices(_monotone_chain_2d(kept_arr)))
    kept = [p for p in _canon_vertices(kept_arr)]
    # strip points inside the hull of the others
    i = 0
    while i < len(kept):
        others = kept[:i] + kept[i + 1 :]
        if others and _in_conv_hull(np.array(others), kept[i], tol):
            kept.pop(i)
        else:
            i += 1
    return VPolytope(_canon_vertices(np.array(kept)))


def support_value(S: Union[VPolytope, SetUnion], d) -> float:
    """sigma_S(d) = max over S of s^T d, computed over vertices."""
    d = np.asarray(d, dtype=float).ravel()
    if isinstance(S, SetUnion):
        if S.is_empty:
            raise EmptySetError("EMPTY_SET: support function of the empty set")
        vals = []
        for comp in S.components:
            if isinstance(comp, VPolytope):
                vals.append(support_value(comp, d))
            elif isinstance(comp, Ball):
                vals.append(float(comp.center @ d) + comp.radius * float(np.linalg.norm(d)))
            else:
                raise PolyhedraError("support_value needs V-rep or ball components")
        return max(vals)
    if S.is_empty:
        raise EmptySetError("EMPTY_SET: support function of the empty set")
    return float(np.max(S.vertices @ d))


def contains(S, z, tol: float = 1e-9) -> bool:
    """Membership test for any set component or union, to tolerance ``tol``."""
    z = np.asarray(z, dtype=float).ravel()
    if isinstance(S, SetUnion):
        return any(contains(c, z, tol) for c in S.components)
    if isinstance(S, VPolytope):
        if S.is_empty:
            return False
        return _in_conv_hull(S.vertices, z, tol)
    if isinstance(S, HPolyhedron):
        scale = max(1.0, float(np.abs(z).max()))
        return bool(np.all(S.A @ z - S.b <= tol * scale))
    if isinstance(S, Ball):
        return float(np.linalg.norm(z - S.center)) <= S.radius + tol
    if isinstance(S, Box):
        return bool(np.all(z >= S.lo - tol) and np.all(z <= S.hi + tol))
    if isinstance(S, Cone):
        if S.normals is not None:
            scale = max(1.0, float(np.abs(z).max()))
            return bool(np.all(S.normals @ z >= -tol * scale))
        return _in_cone_rays(S.rays, z, tol)
    raise PolyhedraError(f"cannot test membership in {type(S).__name__}")


# ---------------------------------------------------------------------------
# Cones: double description and duality
# ---------------------------------------------------------------------------


def _prune_rays(rays: list, tol: float = 1e-9) -> list:
    """Drop zero, duplicate, and conically redundant rays."""
    cleaned = []
    for r in rays:
        nrm = float(np.linalg.norm(r))
        if nrm <= tol:
            continue
        r = r / nrm
        if not any(np.linalg.norm(r - q) <= 1e-9 for q in cleaned):
            cleaned.append(r)
    # LP-prune: a ray is redundant if it is a conic combination of the others
    i = 0
    while i < len(cleaned):
        others = cleaned[:i] + cleaned[i + 1 :]
        if others and _in_cone_rays(np.array(others), cleaned[i], 1e-9):
            cleaned.pop(i)
        else:
            i += 1
    return cleaned


def cone_rays_from_halfspaces(normals, dim: int) -> np.ndarray:
    """Generators of {z : normals @ z >= 0} by double description (dim <= 4)."""
    if dim > MAX_POLYTOPE_DIM:
        raise DimensionCapError("cone ray enumeration supports dim <= 4")
    normals = np.atleast_2d(np.asarray(normals, dtype=float))
    rays = [v for v in np.vstack([np.eye(dim), -np.eye(dim)])]
    for a in normals:
        if np.all(np.abs(a) <= 1e-14):
            continue
        a = a / np.linalg.norm(a)
        dots = [float(a @ r) for r in rays]
        pos = [r for r, d in zip(rays, dots) if d > 1e-10]
        zero = [r for r, d in zip(rays, dots) if abs(d) <= 1e-10]
        neg = [(r, d) for r, d in zip(rays, dots) if d < -1e-10]
        new = pos + zero
        for rp, dp in [(r, d) for r, d in zip(rays, dots) if d > 1e-10]:
            for rn, dn in neg:
                new.append(dp * rn - dn * rp)
        rays = _prune_rays(new)
        if not rays:
            break
    return np.array(rays).reshape(len(rays), dim)


def cone_from_rays(rays, dim: Optional[int] = None) -> Cone:
    """Cone generated by ``rays``; adds an H-rep at dim <= 4."""
    rays = np.atleast_2d(np.asarray(rays, dtype=float))
    if rays.size == 0:
        if dim is None:
            raise PolyhedraError("empty ray list needs an explicit dimension")
        rays = rays.reshape(0, dim)
    n = rays.shape[1]
    pruned = _prune_rays(list(rays))
    rays = np.array(pruned).reshape(len(pruned), n)
    normals = None
    if n <= MAX_POLYTOPE_DIM:
        # H-rep of cone(rays) = dual of the dual: normals are the dual's rays
        normals = cone_rays_from_halfspaces(rays, n) if rays.shape[0] else None
        if rays.shape[0] == 0:
            normals = np.vstack([np.eye(n), -np.eye(n)])  # {0} = {z: +-z >= 0}
    return Cone(rays=rays, normals=normals, validate=False)


def dual_cone(C: Cone) -> Cone:
    """Dual cone {v : v^T r >= 0 for all generators r}; V-rep at dim <= 4.

    The polar cone is the negative of the dual (see :func:`polar_cone`).
    """
    if C.rays.shape[0] == 0:
        n = C.dim
        eye = np.eye(n)
        return Cone(rays=np.vstack([eye, -eye]), normals=np.zeros((0, n)), validate=False)
    normals = C.rays.copy()
    n = C.dim
    rays = cone_rays_from_halfspaces(normals, n) if n <= MAX_POLYTOPE_DIM else None
    if rays is None:
        raise DimensionCapError("dual_cone V-rep needs dim <= 4")
    return Cone(rays=rays, normals=normals, validate=False)


def polar_cone(C: Cone) -> Cone:
    d = dual_cone(C)
    normals = None if d.normals is None else -d.normals
    return Cone(rays=-d.rays, normals=normals, validate=False)


def cones_equal(C: Cone, D: Cone, tol: float = 1e-8) -> bool:
    """Mutual inclusion of ray hulls (exact LP membership)."""
    return all(_in_cone_rays(D.rays, r, tol) for r in C.rays) and all(
        _in_cone_rays(C.rays, r, tol) for r in D.rays
    )


# ---------------------------------------------------------------------------
# Vertex enumeration and conversions
# ---------------------------------------------------------------------------


def vertex_enumeration(P: HPolyhedron, tol: float = 1e-8) -> VPolytope:
    """Vertices of a bounded H-polyhedron by basis enumeration (dim <= 4)."""
    n = P.dim
    if n > MAX_POLYTOPE_DIM:
        raise DimensionCapError("vertex enumeration supports dim <= 4")
    A, b = P.A, P.b
    m = A.shape[0]
    if m < n:
        raise PolyhedraError("polyhedron cannot be bounded: too few halfspaces")
    if math.comb(m, n) > 200000:
        raise PolyhedraError("too many halfspace combinations")
    scale = max(1.0, float(np.abs(b).max()), float(np.abs(A).max()))
    verts = []
    for rows in itertools.combinations(range(m), n):
        sub = A[list(rows)]
        if abs(np.linalg.det(sub)) <= 1e-12:
            continue
        v = np.linalg.solve(sub, b[list(rows)])
        if np.all(A @ v - b <= tol * scale):
            verts.append(v)
    if not verts:
        return VPolytope(np.zeros((0, n)))
    return conv_hull(np.array(verts))


def hpoly_is_empty(P: HPolyhedron) -> bool:
    return not lp_solve(np.zeros(P.dim), P.A, P.b).optimal


def minkowski_sum(P: VPolytope, Q: VPolytope) -> VPolytope:
    """Minkowski sum of two V-polytopes (vertex sums, then hull)."""
    if P.is_empty or Q.is_empty:
        return VPolytope(np.zeros((0, max(P.dim, Q.dim))))
    sums = (P.vertices[:, None, :] + Q.vertices[None, :, :]).reshape(-1, P.dim)
    return conv_hull(sums)


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------


def _point_to_vertices_dist(p: np.ndarray, verts: np.ndarray, tol: float = 1e-9) -> float:
    """Exact distance from p to conv(verts) via projections onto vertex-subset
    affine hulls (Caratheodory: the projection lives on some face)."""
    if verts.shape[0] == 0:
        raise EmptySetError("EMPTY_SET")
    if _in_conv_hull(verts, p, tol):
        return 0.0
    n = verts.shape[1]
    best = float("inf")
    k_max = min(verts.shape[0], n + 1)
    for k in range(1, k_max + 1):
        for idx in itertools.combinations(range(verts.shape[0]), k):
            S = verts[list(idx)]
            q0 = S[0]
            if k == 1:
                q = q0
            else:
                W = (S[1:] - q0).T  # (n, k-1)
                t, *_ = np.linalg.lstsq(W, p - q0, rcond=None)
                q = q0 + W @ t
            if k > 1 and not _in_conv_hull(S, q, 1e-8):
                continue
            best = min(best, float(np.linalg.norm(p - q)))
    return best


def _point_to_component_dist(p: np.ndarray, comp: Component) -> float:
    if isinstance(comp, VPolytope):
        return _point_to_vertices_dist(p, comp.vertices)
    if isinstance(comp, Ball):
        return max(0.0, float(np.linalg.norm(p - comp.center)) - comp.radius)
    if isinstance(comp, HPolyhedron):
        A, b = comp.A, comp.b
        if np.all(A @ p - b <= 1e-9):
            return 0.0
        n, m = comp.dim, A.shape[0]
        best = float("inf")
        for k in range(0, min(m, n) + 1):
            for rows in itertools.combinations(range(m), k):
                if k == 0:
                    q = p
                else:
                    sub = A[list(rows)]
                    rhs = b[list(rows)]
                    # projection onto {sub q = rhs}
                    try:
                        lam = np.linalg.solve(sub @ sub.T, sub @ p - rhs)
                    except np.linalg.LinAlgError:
                        continue
                    q = p - sub.T @ lam
                if np.all(A @ q - b <= 1e-8):
                    best = min(best, float(np.linalg.norm(p - q)))
        return best
    raise PolyhedraError(f"no distance rule for {type(comp).__name__}")


def _point_to_union_dist(p: np.ndarray, U: SetUnion) -> float:
    return min(_point_to_component_dist(p, c) for c in U.components)


def _component_samples(comp: Component, per_edge: int = 7) -> np.ndarray:
    """Vertices plus deterministic boundary/chord samples of a component."""
    if isinstance(comp, VPolytope):
        V = comp.vertices
        pts = [V]
        fracs = np.linspace(0.0, 1.0, per_edge)[1:-1]
        for i in range(V.shape[0]):
            for j in range(i + 1, V.shape[0]):
                seg = V[i][None, :] + fracs[:, None] * (V[j] - V[i])[None, :]
                pts.append(seg)
        return np.vstack(pts)
    if isinstance(comp, Ball):
        n = comp.dim
        if comp.radius == 0.0:
            return comp.center[None, :]
        if n == 1:
            offs = np.array([[-comp.radius], [comp.radius]])
        else:
            rng = np.random.Generator(np.random.Philox(key=12345))
            raw = rng.standard_normal((64 * n, n))
            raw /= np.linalg.norm(raw, axis=1, keepdims=True)
            offs = comp.radius * raw
        return comp.center[None, :] + offs
    if isinstance(comp, HPolyhedron):
        return _component_samples(vertex_enumeration(comp))
    raise PolyhedraError(f"cannot sample {type(comp).__name__}")


def _intervals_1d(U: SetUnion) -> list:
    """Merge a 1-D union into sorted disjoint [lo, hi] intervals."""
    spans = []
    for comp in U.components:
        if isinstance(comp, VPolytope):
            vals = comp.vertices.ravel()
            spans.append((float(vals.min()), float(vals.max())))
        elif isinstance(comp, Ball):
            spans.append((comp.center[0] - comp.radius, comp.center[0] + comp.radius))
        elif isinstance(comp, HPolyhedron):
            v = vertex_enumeration(comp).vertices.ravel()
            if v.size == 0:
                raise EmptySetError("EMPTY_SET")
            spans.append((float(v.min()), float(v.max())))
        else:
            raise PolyhedraError("unsupported 1-D component")
    spans.sort()
    merged = [list(spans[0])]
    for lo, hi in spans[1:]:
        if lo <= merged[-1][1] + 1e-15:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return [(lo, hi) for lo, hi in merged]


def _directed_hausdorff_1d(A: list, B: list) -> float:
    """sup_{a in A} d(a, B) for interval unions, exactly."""

    def dist_to_B(t: float) -> float:
        return min(
            0.0 if lo <= t <= hi else min(abs(t - lo), abs(t - hi)) for lo, hi in B
        )

    candidates = []
    for lo, hi in A:
        candidates.extend([lo, hi])
        # interior maxima of d(., B) sit at midpoints of B's gaps
        for (l1, h1), (l2, h2) in zip(B, B[1:]):
            mid = 0.5 * (h1 + l2)
            if lo <= mid <= hi:
                candidates.append(mid)
    return max(dist_to_B(t) for t in candidates)


def set_distance(A: Union[SetUnion, Component], B: Union[SetUnion, Component]) -> float:
    """Symmetric Hausdorff distance between two bounded set unions (dim <= 4).

    Exact for 1-D interval unions and whenever the far side is a single
    convex component (the sup is then attained at a vertex); otherwise the
    sup side is approximated over sampled boundaries and vertices.
    """
    if not isinstance(A, SetUnion):
        A = SetUnion((A,))
    if not isinstance(B, SetUnion):
        B = SetUnion((B,))
    if A.is_empty or B.is_empty:
        raise EmptySetError("EMPTY_SET: Hausdorff distance needs non-empty operands")
    if A.dim == 1 and B.dim == 1:
        ia, ib = _intervals_1d(A), _intervals_1d(B)
        return max(_directed_hausdorff_1d(ia, ib), _directed_hausdorff_1d(ib, ia))

    def directed(P: SetUnion, Q: SetUnion) -> float:
        single_convex = len(Q.components) == 1
        worst = 0.0
        for comp in P.components:
            pts = (
                _component_samples(comp, per_edge=2)  # vertices suffice
                if single_convex and isinstance(comp, (VPolytope, HPolyhedron))
                else _component_samples(comp)
            )
            for p in pts:
                worst = max(worst, _point_to_union_dist(p, Q))
        return worst

    return max(directed(A, B), directed(B, A))


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------


def _component_to_json(comp: Component) -> dict:
    if isinstance(comp, VPolytope):
        return {"vertices": comp.vertices.tolist()}
    if isinstance(comp, HPolyhedron):
        return {
            "halfspaces": [
                {"a": a.tolist(), "b": float(bb)} for a, bb in zip(comp.A, comp.b)
            ]
        }
    if isinstance(comp, Ball):
        return {"ball": {"center": comp.center.tolist(), "radius": comp.radius}}
    raise PolyhedraError(f"cannot serialize {type(comp).__name__}")


def set_to_json(S: Union[SetUnion, Component]) -> dict:
    if isinstance(S, SetUnion):
        if len(S.components) == 1:
            return _component_to_json(S.components[0])
        return {"components": [_component_to_json(c) for c in S.components]}
    return _component_to_json(S)


def _component_from_json(d: dict) -> Component:
    if "vertices" in d:
        return VPolytope(np.array(d["vertices"], dtype=float))
    if "halfspaces" in d:
        A = np.array([h["a"] for h in d["halfspaces"]], dtype=float)
        b = np.array([h["b"] for h in d["halfspaces"]], dtype=float)
        return HPolyhedron(A, b)
    if "ball" in d:
        return Ball(np.array(d["ball"]["center"]), float(d["ball"]["radius"]))
    raise PolyhedraError("unrecognized set JSON")


def set_from_json(d: dict) -> SetUnion:
    if "components" in d:
        return SetUnion(tuple(_component_from_json(c) for c in d["components"]))
    return SetUnion((_component_from_json(d),))

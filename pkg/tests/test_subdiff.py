import numpy as np
import pytest

from nonsmooth.expr import Abs, Scale, Sq, Var, evaluate, vsum
from nonsmooth.gallery import (
    abs_x,
    f1_expr,
    f2_expr,
    fig2_expr,
    neg_abs,
    relu_loss_expr,
    sum_rule_expr,
    xsqsin_expr,
)
from nonsmooth.polyhedra import (
    Ball,
    Box,
    SetUnion,
    VPolytope,
    contains,
    conv_hull,
    set_distance,
)
from nonsmooth.subdiff import (
    AffineCompose,
    L1Norm,
    L2Norm,
    MaxOfSmooth,
    ScaledSum,
    InfeasiblePointError,
    NotDirectionallyDifferentiableError,
    UnsupportedFragmentError,
    bouligand,
    clarke,
    clarke_dir_deriv,
    compose_affine,
    convex_catalog_subdiff,
    dir_deriv,
    eigmax_subdiff,
    frechet,
    limiting,
    normal_cone,
    weakly_convex_subdiff,
)


def interval(lo, hi):
    return SetUnion((conv_hull([[lo], [hi]]),))


def points(*vals):
    return SetUnion(tuple(VPolytope([[v]]) for v in sorted(vals)))


def assert_sets_equal(A, B, tol=1e-9):
    if A.is_empty or B.is_empty:
        assert A.is_empty and B.is_empty
    else:
        assert set_distance(A, B) <= tol


class TestDirDeriv:
    def test_neg_abs_both_directions(self):
        e = neg_abs()
        assert dir_deriv(e, [0.0], [1.0]).value == -1.0
        assert dir_deriv(e, [0.0], [-1.0]).value == -1.0

    def test_fig2_not_a_descent_direction(self):
        # -1 + 2|-2| per the signed-Abs and scaled rules
        v = dir_deriv(fig2_expr(), [1.0, 0.0], [-1.0, -2.0]).value
        assert v == 3.0

    def test_f2_left_derivative_matches_quotient_oracle(self):
        # oracle first: the one-sided difference quotient of f2 along -1
        e = f2_expr()
        f0 = evaluate(e, [0.0])
        quotients = [(evaluate(e, [-t]) - f0) / t for t in (1e-2, 1e-4, 1e-6)]
        assert all(q == 0.0 for q in quotients)  # f2 is 0 left of the origin
        assert dir_deriv(e, [0.0], [-1.0]).value == 0.0

    def test_general_fragment_refused(self):
        e = vsum(Abs(Var(0)), Sq(Sq(Var(1))))
        with pytest.raises(UnsupportedFragmentError):
            dir_deriv(e, [0.0, 0.0], [1.0, 0.0])

    def test_xsinlog_has_no_one_sided_limit(self):
        from nonsmooth.gallery import xsinlog_expr

        with pytest.raises(NotDirectionallyDifferentiableError):
            dir_deriv(xsinlog_expr(), [0.0], [1.0])

    def test_plq_chain_rule(self):
        # d/dt (x+t)^2 at x=3 is 2*3*1
        assert dir_deriv(Sq(Var(0)), [3.0], [1.0]).value == 6.0


class TestClarkeDirDeriv:
    def test_neg_abs(self):
        assert clarke_dir_deriv(neg_abs(), [0.0], [1.0]).value == 1.0
        assert clarke_dir_deriv(neg_abs(), [0.0], [-1.0]).value == 1.0

    def test_abs_convex_coincides(self):
        assert clarke_dir_deriv(abs_x(), [0.0], [1.0]).value == 1.0
        assert dir_deriv(abs_x(), [0.0], [1.0]).value == 1.0

    def test_relu_loss_support_oracle(self):
        # oracle: the one-sided piece gradients at 0 are {0, -1} (left piece
        # constant, right piece (w-1) at 0); support at d=1 is max(0, -1) = 0
        oracle = max(s * 1.0 for s in (0.0, -1.0))
        assert oracle == 0.0
        e = relu_loss_expr()
        assert clarke_dir_deriv(e, [0.0], [1.0]).value == 0.0
        # the ordinary derivative is f'(0,1) = -1 < 0 = f°(0,1)
        assert dir_deriv(e, [0.0], [1.0]).value == -1.0


class TestBouligand:
    def test_neg_abs(self):
        assert_sets_equal(bouligand(neg_abs(), [0.0]).set, points(-1.0, 1.0))

    def test_sum_rule_function_is_single_gradient(self):
        _, _, s = sum_rule_expr()
        assert_sets_equal(bouligand(s, [0.0]).set, points(1.0))

    def test_smooth_point(self):
        assert_sets_equal(bouligand(abs_x(), [3.0]).set, points(1.0))

    def test_relu_loss(self):
        assert_sets_equal(bouligand(relu_loss_expr(), [0.0]).set, points(-1.0, 0.0))


class TestClarke:
    def test_neg_abs(self):
        assert_sets_equal(clarke(neg_abs(), [0.0]).set, interval(-1.0, 1.0))

    def test_f1(self):
        assert_sets_equal(clarke(f1_expr(), [0.0]).set, interval(-1.0, 1.0))

    def test_identity_written_as_max_plus_min(self):
        _, _, s = sum_rule_expr()
        assert_sets_equal(clarke(s, [0.0]).set, points(1.0))

    def test_equals_hull_of_bouligand(self):
        for e, x in ((neg_abs(), [0.0]), (fig2_expr(), [0.0, 0.0]), (f1_expr(), [0.0])):
            b = bouligand(e, x)
            pts = np.vstack([c.vertices for c in b.set.components])
            assert_sets_equal(clarke(e, x).set, SetUnion((conv_hull(pts),)))


class TestFrechet:
    def test_neg_abs_empty(self):
        assert frechet(neg_abs(), [0.0]).is_empty

    def test_f2_empty(self):
        assert frechet(f2_expr(), [0.0]).is_empty

    def test_abs_full_interval(self):
        assert_sets_equal(frechet(abs_x(), [0.0]).set, interval(-1.0, 1.0))

    def test_2d_convex_box(self):
        s = frechet(fig2_expr(), [0.0, 0.0]).set
        expect = SetUnion((conv_hull([[-1, -2], [-1, 2], [1, -2], [1, 2]]),))
        assert_sets_equal(s, expect)

    def test_xsqsin_singleton(self):
        assert_sets_equal(frechet(xsqsin_expr(), [0.0]).set, points(1.0))


class TestLimiting:
    def test_neg_abs(self):
        assert_sets_equal(limiting(neg_abs(), [0.0]).set, points(-1.0, 1.0))

    def test_f2(self):
        assert_sets_equal(limiting(f2_expr(), [0.0]).set, points(-1.0, 0.0))

    def test_abs_regular(self):
        assert_sets_equal(limiting(abs_x(), [0.0]).set, interval(-1.0, 1.0))

    def test_relu_loss_two_points(self):
        assert_sets_equal(limiting(relu_loss_expr(), [0.0]).set, points(-1.0, 0.0))

    def test_1d_slope_path_matches_face_path(self):
        # dimension-1 PA trees can run both the slope specialization and the
        # generic face enumeration; they must agree
        from nonsmooth.expr import active_pattern
        from nonsmooth.subdiff import (
            _derivative_expr_from_pattern,
            _face_directions,
            _frechet_from_phi,
            _pattern_along,
            _phi_cells,
        )

        for e, x in ((neg_abs(), 0.0), (f1_expr(), 0.0), (f2_expr(), 0.0), (abs_x(), 0.0)):
            xa = np.array([x])
            slope = limiting(e, xa)
            pat0 = active_pattern(e, xa, tol=0.0)
            phi = _derivative_expr_from_pattern(e, pat0)
            cells = _phi_cells(phi, 1)
            comps = []
            fr = frechet(e, xa)
            if not fr.is_empty:
                comps.extend(fr.set.components)
            for d in _face_directions(cells, 1):
                pat = _pattern_along(e, xa, d)
                ss = _frechet_from_phi(_derivative_expr_from_pattern(e, pat), 1, xa)
                if not ss.is_empty:
                    comps.extend(ss.set.components)
            got = SetUnion(tuple(comps))
            assert set_distance(got, slope.set) <= 1e-9

    def test_2d_concave_corner(self):
        # -|x1| - |x2| at 0: Frechet empty everywhere near 0 except smooth
        # cells, so the limiting set is the four piece gradients
        e = vsum(Scale(-1.0, Abs(Var(0))), Scale(-1.0, Abs(Var(1))))
        s = limiting(e, [0.0, 0.0]).set
        expect = SetUnion(
            tuple(VPolytope([[sx, sy]]) for sx in (-1.0, 1.0) for sy in (-1.0, 1.0))
        )
        assert_sets_equal(s, expect)

    def test_2d_mixed_kink(self):
        # |x1| - |x2| at 0: limiting = {(s1, s2): s1 in [-1,1], s2 = +-1}
        e = vsum(Abs(Var(0)), Scale(-1.0, Abs(Var(1))))
        s = limiting(e, [0.0, 0.0]).set
        expect = SetUnion(
            (
                VPolytope([[-1.0, -1.0], [1.0, -1.0]]),
                VPolytope([[-1.0, 1.0], [1.0, 1.0]]),
            )
        )
        assert_sets_equal(s, expect)


class TestCatalog:
    def test_l1_at_partially_zero_point(self):
        s = convex_catalog_subdiff(L1Norm(), [1.0, 0.0]).set
        assert_sets_equal(s, SetUnion((conv_hull([[1.0, -1.0], [1.0, 1.0]]),)))

    def test_l2_at_origin_is_ball(self):
        s = convex_catalog_subdiff(L2Norm(), [0.0, 0.0]).set
        comp = s.components[0]
        assert isinstance(comp, Ball) and comp.radius == 1.0

    def test_l2_away_from_origin(self):
        s = convex_catalog_subdiff(L2Norm(), [3.0, 4.0]).set
        assert_sets_equal(s, SetUnion((VPolytope([[0.6, 0.8]]),)))

    def test_affine_compose_scalar(self):
        # f(x) = |2x|: subdiff at 0 is 2 * [-1, 1] = [-2, 2]
        item = AffineCompose(np.array([[2.0]]), np.array([0.0]), abs_x())
        s = convex_catalog_subdiff(item, [0.0]).set
        assert_sets_equal(s, interval(-2.0, 2.0))

    def test_scaled_sum(self):
        item = ScaledSum(1.0, abs_x(), 2.0, abs_x())
        s = convex_catalog_subdiff(item, [0.0]).set
        assert_sets_equal(s, interval(-3.0, 3.0))

    def test_max_of_smooth(self):
        # max(x^2, 1 - x) at the crossing x = (sqrt(5)-1)/2... use x where
        # both active: x^2 = 1 - x at x = 0.6180339887498949
        x0 = (np.sqrt(5.0) - 1.0) / 2.0
        item = MaxOfSmooth(
            (
                (lambda z: float(z[0] ** 2), lambda z: np.array([2 * z[0]])),
                (lambda z: float(1 - z[0]), lambda z: np.array([-1.0])),
            )
        )
        s = convex_catalog_subdiff(item, [x0]).set
        assert_sets_equal(s, interval(-1.0, 2 * x0), tol=1e-8)


class TestEigmax:
    def test_unique_top_eigenvector(self):
        E = eigmax_subdiff(np.diag([2.0, 1.0]))
        assert E.multiplicity == 1
        V = E.vertices()
        assert np.allclose(V[0], np.outer([1, 0], [1, 0]))
        assert E.contains(V[0]) and E.is_extreme_point(V[0])

    def test_identity_full_eigenspace(self):
        E = eigmax_subdiff(np.eye(2))
        assert E.multiplicity == 2
        assert E.contains(np.diag([0.5, 0.5]))
        assert not E.is_extreme_point(np.diag([0.5, 0.5]))
        assert E.is_extreme_point(np.outer([1, 0], [1, 0]))
        assert not E.contains(np.diag([0.7, 0.5]))  # trace 1.2

    def test_scalar_case(self):
        E = eigmax_subdiff(np.array([[0.0]]))
        assert E.contains(np.array([[1.0]]))  # gradient of the identity map

    def test_rejects_asymmetric(self):
        with pytest.raises(Exception):
            eigmax_subdiff(np.array([[0.0, 1.0], [0.0, 0.0]]))


class TestNormalCone:
    def test_box_corner(self):
        C = Box([0.0, 0.0], [1.0, 1.0])
        cone = normal_cone(C, [0.0, 0.0])
        # generated by the active constraint normals (-1,0), (0,-1)
        assert contains(cone, [-1.0, 0.0], 1e-9)
        assert contains(cone, [0.0, -1.0], 1e-9)
        assert contains(cone, [-2.0, -3.0], 1e-9)
        assert not contains(cone, [1.0, 0.0], 1e-9)
        # defining inequality on sampled points of C
        rng = np.random.default_rng(3)
        ys = rng.uniform(0, 1, size=(200, 2))
        for r in cone.rays:
            assert np.all(ys @ r - np.array([0.0, 0.0]) @ r <= 1e-12)

    def test_ball_boundary_ray(self):
        cone = normal_cone(Ball(np.zeros(2), 1.0), [1.0, 0.0])
        assert cone.rays.shape[0] == 1
        assert np.allclose(cone.rays[0], [1.0, 0.0])
        rng = np.random.default_rng(4)
        ys = rng.standard_normal((200, 2))
        ys = ys / np.maximum(np.linalg.norm(ys, axis=1, keepdims=True), 1.0)
        s = cone.rays[0]
        assert np.all((ys - np.array([1.0, 0.0])) @ s <= 1e-12)

    def test_interior_gives_trivial_cone(self):
        cone = normal_cone(Box([0.0, 0.0], [1.0, 1.0]), [0.5, 0.5])
        assert cone.is_trivial

    def test_infeasible_point(self):
        with pytest.raises(InfeasiblePointError):
            normal_cone(Box([0.0], [1.0]), [2.0])


class TestWeaklyConvex:
    def test_smooth_concave_quadratic(self):
        # f(x) = -x^2 is 2-weakly convex with h = 0; at x=3 the Clarke set
        # is {0} - 2*3 = {-6} = {f'(3)}
        h_sub = SetUnion((VPolytope([[0.0]]),))
        s = weakly_convex_subdiff(h_sub, 2.0, [3.0])
        assert_sets_equal(s.set, points(-6.0))

    def test_abs_minus_square_at_zero(self):
        # f = |x| - x^2, rho = 2, h = |x| + ... convex; at 0 translate is 0
        h_sub = interval(-1.0, 1.0)
        s = weakly_convex_subdiff(h_sub, 2.0, [0.0])
        assert_sets_equal(s.set, interval(-1.0, 1.0))
        # cross-check against the exact PLQ engine
        e = vsum(Abs(Var(0)), Scale(-1.0, Sq(Var(0))))
        assert_sets_equal(clarke(e, [0.0]).set, interval(-1.0, 1.0))

    def test_mcp_style_spot_value(self):
        # phi(t) = |t| - t^2/2 on |t| <= 1 is 1-weakly convex with h = |t|;
        # at t = 0.5: d phi = 1 - 0.5 = 0.5
        h_sub = points(1.0)  # subdiff of |t| at 0.5
        s = weakly_convex_subdiff(h_sub, 1.0, [0.5])
        assert_sets_equal(s.set, points(0.5))
        e = vsum(Abs(Var(0)), Scale(-0.5, Sq(Var(0))))
        assert_sets_equal(clarke(e, [0.5]).set, points(0.5))

    def test_negative_rho_rejected(self):
        with pytest.raises(Exception):
            weakly_convex_subdiff(points(0.0), -1.0, [0.0])


class TestComposeAffine:
    def test_matches_direct_construction(self):
        # g(u) = |u1| + |u2|, A0 = [[1, 1], [1, -1]]: f(x) = |x1+x2| + |x1-x2|
        g = vsum(Abs(Var(0)), Abs(Var(1)))
        A0 = np.array([[1.0, 1.0], [1.0, -1.0]])
        f = compose_affine(g, A0, np.zeros(2))
        for x in ([0.3, -0.7], [1.0, 1.0], [0.0, 0.0]):
            assert evaluate(f, x) == pytest.approx(
                abs(x[0] + x[1]) + abs(x[0] - x[1]), abs=1e-14
            )

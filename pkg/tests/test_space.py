"""Tests for global space construction, dimensions, and interpolation."""

import numpy as np
import pytest

from qncfem.mesh import perturbed_mesh, uniform_rect_mesh
from qncfem.refelem import Family
from qncfem.solve import error_norms
from qncfem.space import (
    build_global_space,
    expected_dimension,
    interpolate,
    jump_functionals,
    q_interpolate,
)

FAMILY_ORDERS = [
    (Family("R"), 3),
    (Family("R"), 5),
    (Family("ER"), 3),
    (Family("ER"), 5),
    (Family("RPlus"), 2),
    (Family("RPlus"), 4),
]


def kernel_dimension(space):
    if space.constraints is None:
        return space.n_free
    rank = np.linalg.matrix_rank(space.constraints.toarray(), tol=1e-9)
    return space.n_free - rank


class TestDimensions:
    def test_er3_on_4x4(self):
        space = build_global_space(uniform_rect_mesh(4), Family("ER"), 3)
        assert space.n_free == 72
        assert expected_dimension(space) == 72

    def test_r3_on_4x4(self):
        space = build_global_space(uniform_rect_mesh(4), Family("R"), 3)
        assert space.n_free == 72
        assert space.constraints.shape[0] == 16
        rank = np.linalg.matrix_rank(space.constraints.toarray(), tol=1e-9)
        assert rank == 15
        assert kernel_dimension(space) == 57 == expected_dimension(space)

    def test_rplus2_on_4x4(self):
        space = build_global_space(uniform_rect_mesh(4), Family("RPlus"), 2)
        assert kernel_dimension(space) == 49 == expected_dimension(space)

    def test_r5_on_2x2(self):
        space = build_global_space(uniform_rect_mesh(2), Family("R"), 5)
        assert kernel_dimension(space) == 29 == expected_dimension(space)

    @pytest.mark.parametrize("family,m", FAMILY_ORDERS)
    @pytest.mark.parametrize("meshgen", ["u2", "u3", "u4", "p4"])
    def test_dimension_theorem_all_combinations(self, family, m, meshgen):
        """Computed kernel dimension equals the closed form on every listed
        mesh/family/order combination (24 cases)."""
        if meshgen.startswith("u"):
            mesh = uniform_rect_mesh(int(meshgen[1]))
        else:
            mesh = perturbed_mesh(int(meshgen[1]), seed=1, amplitude=0.2)
        space = build_global_space(mesh, family, m)
        assert kernel_dimension(space) == expected_dimension(space)

    @pytest.mark.parametrize("family,m", [(Family("R"), 3), (Family("RPlus"), 2)])
    def test_constraint_rank_is_elements_minus_one(self, family, m):
        for n in (2, 3, 4):
            mesh = uniform_rect_mesh(n)
            space = build_global_space(mesh, family, m)
            rank = np.linalg.matrix_rank(space.constraints.toarray(), tol=1e-9)
            assert rank == mesh.n_elements - 1

    def test_er_moment_dimension(self):
        space = build_global_space(uniform_rect_mesh(4), Family("ER"), 3, "moment")
        assert space.n_free == expected_dimension(space) == 72


class TestContinuity:
    def _point_jump(self, space, coeffs):
        from qncfem.legendre1d import gauss_rule
        from qncfem.refelem import EDGE_PARAM_POINT

        mesh, m = space.mesh, space.m
        t = gauss_rule(m).nodes
        cloc = space.local_values(coeffs)
        worst = 0.0
        for edge in range(mesh.n_edges):
            inc = mesh.edge_elements[edge]
            if len(inc) < 2:
                continue
            vals = []
            for (e, le, same) in inc:
                xh, yh = EDGE_PARAM_POINT[le](t if same else t[::-1])
                phi, _, _ = space.ref.tabulate(xh, yh)
                vals.append(phi @ cloc[e])
            worst = max(worst, float(np.max(np.abs(vals[0] - vals[1]))))
        return worst

    @pytest.mark.parametrize("family,m", FAMILY_ORDERS)
    def test_point_continuity_random_coeffs(self, family, m):
        space = build_global_space(uniform_rect_mesh(3), family, m)
        rng = np.random.default_rng(0)
        coeffs = rng.standard_normal(space.n_free)
        if space.constraints is not None:
            # project onto the admissible set first
            C = space.constraints.toarray()[:-1]
            coeffs -= C.T @ np.linalg.solve(C @ C.T, C @ coeffs)
        assert self._point_jump(space, coeffs) < 1e-10

    def test_moment_continuity_er_moment_mode(self):
        from qncfem.legendre1d import gauss_rule, legendre_coeffs
        from qncfem.refelem import EDGE_PARAM_POINT

        m = 3
        space = build_global_space(uniform_rect_mesh(3), Family("ER"), m, "moment")
        rng = np.random.default_rng(1)
        coeffs = rng.standard_normal(space.n_free)
        cloc = space.local_values(coeffs)
        rule = gauss_rule(m + 3)
        mesh = space.mesh
        for edge in range(mesh.n_edges):
            inc = mesh.edge_elements[edge]
            if len(inc) < 2:
                continue
            # traces in the global (lower -> higher vertex) parameter
            traces = []
            for (e, le, same) in inc:
                t = rule.nodes if same else rule.nodes[::-1]
                xh, yh = EDGE_PARAM_POINT[le](t)
                phi, _, _ = space.ref.tabulate(xh, yh)
                traces.append(phi @ cloc[e])
            jump = traces[0] - traces[1]
            for d in range(m):
                ld = np.polynomial.polynomial.polyval(
                    rule.nodes, np.asarray(legendre_coeffs(d))
                )
                assert abs(np.dot(rule.weights, jump * ld)) < 1e-10

    def test_boundary_values_masked(self):
        space = build_global_space(uniform_rect_mesh(2), Family("ER"), 3)
        rng = np.random.default_rng(2)
        coeffs = rng.standard_normal(space.n_free)
        cloc = space.local_values(coeffs)
        from qncfem.legendre1d import gauss_rule
        from qncfem.refelem import EDGE_PARAM_POINT

        t = gauss_rule(3).nodes
        mesh = space.mesh
        for edge in np.nonzero(mesh.edge_is_boundary)[0]:
            (e, le, same), = mesh.edge_elements[edge]
            xh, yh = EDGE_PARAM_POINT[le](t)
            phi, _, _ = space.ref.tabulate(xh, yh)
            assert np.max(np.abs(phi @ cloc[e])) < 1e-12


class TestQInterpolate:
    def test_reproduces_constant(self):
        from qncfem.mesh import GeomMap

        geom = GeomMap([[0, 0], [1, 0], [1, 1], [0, 1]])
        p = q_interpolate(geom, 3, lambda x, y: np.ones_like(x))
        xs = np.linspace(-1, 1, 5)
        assert np.allclose(p(xs, xs), 1.0, atol=1e-12)

    def test_reproduces_qm(self):
        from qncfem.mesh import GeomMap

        geom = GeomMap([[0, 0], [1, 0], [1, 1], [0, 1]])
        u = lambda x, y: (2 * x - 1) ** 3 * (2 * y - 1) ** 3  # in Q_3 o F^{-1}
        p = q_interpolate(geom, 3, u)
        xh = np.linspace(-1, 1, 7)
        yh = np.linspace(-1, 1, 7)[::-1]
        px, py = geom(xh, yh)
        assert np.max(np.abs(p(xh, yh) - u(px, py))) < 1e-11

    def test_affine_composition(self):
        from qncfem.mesh import GeomMap

        geom = GeomMap([[0, 0], [1, 0], [1, 1], [0, 1]])
        p = q_interpolate(geom, 2, lambda x, y: x + y)
        # x = (xh+1)/2, y = (yh+1)/2 so u o F = (xh + yh)/2 + 1
        assert p(0.0, 0.0) == pytest.approx(1.0, abs=1e-12)
        assert p(1.0, -1.0) == pytest.approx(1.0, abs=1e-12)
        assert p(0.5, 0.5) == pytest.approx(1.5, abs=1e-12)


class TestInterpolate:
    @pytest.mark.parametrize("family,m", FAMILY_ORDERS)
    def test_reproduces_pm(self, family, m):
        """The interpolant of a degree <= m polynomial is exact on affine
        elements (checked on the non-homogeneous space so boundary values
        are kept)."""
        mesh = uniform_rect_mesh(2)
        space = build_global_space(mesh, family, m, homogeneous=False)
        d = min(m, 3)
        u = lambda x, y: (x + 0.3 * y) ** d + 0.5 * x - y + 1.0
        gu = lambda x, y: (
            d * (x + 0.3 * y) ** (d - 1) + 0.5,
            0.3 * d * (x + 0.3 * y) ** (d - 1) - 1.0,
        )
        fe = interpolate(space, u)
        l2, h1 = error_norms(space, fe.coeffs, u, gu)
        assert l2 < 1e-10 and h1 < 1e-10

    @pytest.mark.parametrize("family,m", [(Family("R"), 3), (Family("RPlus"), 4)])
    def test_relation_residual_of_interpolant(self, family, m):
        """Point values of the elementwise Q_m interpolant satisfy the
        boundary relation, so interpolate() accepts them."""
        mesh = perturbed_mesh(4, seed=0, amplitude=0.2)
        space = build_global_space(mesh, family, m)
        u = lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y)
        fe = interpolate(space, u)  # raises if the residual exceeds 1e-9
        resid = np.max(np.abs(space.constraints @ fe.coeffs))
        assert resid < 1e-11 * max(1.0, np.max(np.abs(fe.coeffs)))

    def test_interpolation_order_er3(self):
        u = lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y)
        gu = lambda x, y: (
            np.pi * np.cos(np.pi * x) * np.sin(np.pi * y),
            np.pi * np.sin(np.pi * x) * np.cos(np.pi * y),
        )
        errs = []
        for level in (2, 3, 4, 5):
            mesh = uniform_rect_mesh(2 ** (level - 1))
            space = build_global_space(mesh, Family("ER"), 3)
            fe = interpolate(space, u)
            errs.append(error_norms(space, fe.coeffs, u, gu)[1])
        slopes = -np.diff(np.log2(errs))
        assert np.all(slopes >= 2.9)


class TestEvaluate:
    def test_zero_coefficients(self):
        space = build_global_space(uniform_rect_mesh(2), Family("ER"), 3)
        from qncfem.space import FeFunction

        fe = FeFunction(space, np.zeros(space.n_free))
        val, grad = fe.evaluate(0, np.array([0.1]), np.array([0.2]))
        assert val[0] == 0.0 and np.all(grad == 0.0)

    def test_reproduces_linear(self):
        mesh = perturbed_mesh(2, seed=6, amplitude=0.2)
        space = build_global_space(mesh, Family("R"), 3, homogeneous=False)
        u = lambda x, y: 2.0 * x - 0.5 * y + 0.25
        fe = interpolate(space, u)
        rng = np.random.default_rng(0)
        for e in range(mesh.n_elements):
            xh = rng.uniform(-0.9, 0.9, 5)
            yh = rng.uniform(-0.9, 0.9, 5)
            val, grad = fe.evaluate(e, xh, yh)
            px, py = mesh.geom(e)(xh, yh)
            assert np.max(np.abs(val - u(px, py))) < 1e-11
            assert np.max(np.abs(grad[0] - 2.0)) < 1e-10
            assert np.max(np.abs(grad[1] + 0.5)) < 1e-10

    def test_gradient_finite_difference(self):
        mesh = perturbed_mesh(2, seed=8, amplitude=0.2)
        space = build_global_space(mesh, Family("ER"), 3)
        from qncfem.space import FeFunction

        rng = np.random.default_rng(1)
        fe = FeFunction(space, rng.standard_normal(space.n_free))
        e, h = 1, 1e-6
        xh = np.array([0.2, -0.4])
        yh = np.array([-0.1, 0.55])
        _, grad = fe.evaluate(e, xh, yh)
        geom = mesh.geom(e)
        # central differences in physical coordinates via the inverse map:
        # differentiate value(xh, yh) and divide by the Jacobian instead
        vxp, _ = fe.evaluate(e, xh + h, yh)
        vxm, _ = fe.evaluate(e, xh - h, yh)
        vyp, _ = fe.evaluate(e, xh, yh + h)
        vym, _ = fe.evaluate(e, xh, yh - h)
        gxh = (vxp - vxm) / (2 * h)
        gyh = (vyp - vym) / (2 * h)
        J, det = geom.jacobian(xh, yh)
        gx = (J[1, 1] * gxh - J[1, 0] * gyh) / det
        gy = (-J[0, 1] * gxh + J[0, 0] * gyh) / det
        assert np.max(np.abs(grad[0] - gx)) < 1e-5
        assert np.max(np.abs(grad[1] - gy)) < 1e-5


class TestJumpFunctionals:
    def test_annihilates_space_members(self):
        space = build_global_space(uniform_rect_mesh(2), Family("ER"), 3)
        J = jump_functionals(space)
        rng = np.random.default_rng(0)
        coeffs = rng.standard_normal(space.n_free)
        broken = space.local_values(coeffs).ravel()
        assert np.max(np.abs(J @ broken)) < 1e-11

    def test_detects_discontinuity(self):
        space = build_global_space(uniform_rect_mesh(2), Family("ER"), 3)
        J = jump_functionals(space)
        broken = np.zeros(J.shape[1])
        broken[0] = 1.0  # perturb one element's first retained dof
        assert np.max(np.abs(J @ broken)) > 0.1

    @pytest.mark.parametrize("n", [2, 3])
    def test_rank_r_family(self, n):
        """On the broken R_3 space the jump/trace functionals have rank
        N_S(2k+1) - 1: the per-element relations force one dependency."""
        mesh = uniform_rect_mesh(n)
        space = build_global_space(mesh, Family("R"), 3)
        J = jump_functionals(space)
        rank = np.linalg.matrix_rank(J.toarray(), tol=1e-9)
        assert rank == mesh.n_edges * 3 - 1

    @pytest.mark.parametrize("n", [2, 3])
    def test_rank_er_family_full(self, n):
        mesh = uniform_rect_mesh(n)
        space = build_global_space(mesh, Family("ER"), 3)
        J = jump_functionals(space)
        assert np.linalg.matrix_rank(J.toarray(), tol=1e-9) == mesh.n_edges * 3

    def test_moment_mode_rejected(self):
        space = build_global_space(uniform_rect_mesh(2), Family("ER"), 3, "moment")
        with pytest.raises(ValueError):
            jump_functionals(space)

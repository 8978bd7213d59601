"""Jets, projectors, Weingarten maps, normal connection, Laplacians."""
import math

import numpy as np
import pytest
import sympy as sp

from xilab.catalog import make_plane, make_sphere
from xilab.errors import DegenerateMetric, NotNormal, OutOfDomain
from xilab.geometry import (Box, NormalField, ParametricImmersion, ScalarField,
                            bundle_laplacian, constant_normal_field, geometry_jet,
                            laplace_beltrami, normal_derivative, weingarten_map)
from xilab.numdiff import DiffPolicy
from xilab.quadrature import verification_grid


def graph_immersion(width=2.0):
    """y = u^2 in the plane, position-only (forces finite-difference jets)."""
    box = Box.build([-width], [width])

    def pos(U):
        return np.stack([U[:, 0], U[:, 0] ** 2], axis=-1)

    return ParametricImmersion(dim=1, codim=1, box=box, position=pos, name="graph u^2")


def sympy_graph_oracle(u):
    """Independent symbolic jet for the parabola graph at parameter u."""
    t = sp.Symbol("t", real=True)
    x = sp.Matrix([t, t ** 2])
    J = x.diff(t)
    g = (J.T @ J)[0, 0]
    d2 = x.diff(t, 2)
    gamma = (d2.T @ J)[0, 0] / g
    h = d2 - gamma * J
    H = h / g
    f = sp.lambdify(t, sp.Matrix.vstack(h, H), "numpy")
    vals = np.asarray(f(u), dtype=float).ravel()
    return vals[:2], vals[2:]


class TestSphereJets:
    def test_mean_curvature_formula(self):
        for m, r in [(1, 0.8), (2, 1.5), (3, 2.0)]:
            item = make_sphere(m, r)
            grid = verification_grid(item.immersion.box, 5)
            jet = geometry_jet(item.immersion, grid)
            assert np.abs(jet.H + (m / r**2) * jet.x).max() < 1e-10

    def test_radial_weingarten_is_minus_inverse_radius(self):
        item = make_sphere(2, 1.5)
        jet = geometry_jet(item.immersion, np.array([[0.9, 2.0], [1.4, 0.3]]))
        A = weingarten_map(jet, jet.x / 1.5)
        assert np.abs(A + np.eye(2)[None] / 1.5).max() < 1e-10

    def test_weingarten_g_symmetry(self):
        item = make_sphere(3, 1.2)
        grid = verification_grid(item.immersion.box, 4)
        jet = geometry_jet(item.immersion, grid)
        A = weingarten_map(jet, jet.x / 1.2)
        gA = np.einsum("nij,njk->nik", jet.metric, A)
        assert np.abs(gA - gA.swapaxes(1, 2)).max() < 1e-10


class TestPlaneJets:
    def test_totally_geodesic(self):
        item = make_plane(2, 1, offset=(0, 0, 0.7))
        jet = geometry_jet(item.immersion, np.array([[0.3, -1.2], [5.0, 2.0]]))
        assert np.abs(jet.h).max() == 0.0
        assert np.abs(jet.H).max() == 0.0

    def test_weingarten_vanishes(self):
        item = make_plane(2, 2)
        jet = geometry_jet(item.immersion, np.array([[1.0, 2.0]]))
        A = weingarten_map(jet, np.array([0.0, 0.0, 0.3, 0.5]))
        assert np.abs(A).max() == 0.0

    def test_weingarten_zero_vector(self):
        item = make_plane(1, 1)
        jet = geometry_jet(item.immersion, np.array([[0.4]]))
        A = weingarten_map(jet, np.zeros(2))
        assert np.abs(A).max() == 0.0

    def test_weingarten_rejects_tangent(self):
        item = make_plane(2, 1)
        jet = geometry_jet(item.immersion, np.array([[0.0, 0.0]]))
        with pytest.raises(NotNormal):
            weingarten_map(jet, np.array([1.0, 0.0, 0.0]))


class TestFiniteDifferenceJets:
    def test_graph_oracle_agreement(self):
        imm = graph_immersion()
        us = np.array([[-0.7], [0.0], [0.4], [1.3]])
        jet = geometry_jet(imm, us)
        for k, u in enumerate(us[:, 0]):
            h_exact, H_exact = sympy_graph_oracle(float(u))
            assert np.abs(jet.h[k, :, 0, 0] - h_exact).max() < 1e-8
            assert np.abs(jet.H[k] - H_exact).max() < 1e-8

    def test_convergence_order(self):
        # In the truncation-dominated regime the 4th-order stencils must show
        # observed order >= 3.5 against exact jets.
        item = make_sphere(2, 1.0)
        exact = item.immersion
        u = np.array([[1.1, 0.7]])
        errs = []
        hs = [0.02, 0.04, 0.08]
        for h in hs:
            pol = DiffPolicy(rel_first=h, rel_second=h)
            fd = ParametricImmersion(dim=2, codim=1, box=exact.box,
                                     position=exact.position, diff=pol)
            jet_fd = geometry_jet(fd, u)
            jet_ex = geometry_jet(exact, u)
            errs.append(np.abs(jet_fd.h - jet_ex.h).max())
        order = np.polyfit(np.log(hs), np.log(errs), 1)[0]
        assert order >= 3.5

    def test_degenerate_metric_detected(self):
        box = Box.build([-1.0], [1.0])

        def pos(U):
            # Rank drops at u = 0.
            return np.stack([U[:, 0] ** 3, U[:, 0] ** 3], axis=-1)

        imm = ParametricImmersion(dim=1, codim=1, box=box, position=pos)
        with pytest.raises(DegenerateMetric):
            geometry_jet(imm, np.array([[0.0]]))

    def test_out_of_domain(self):
        item = make_plane(1, 1)
        with pytest.raises(OutOfDomain):
            geometry_jet(item.immersion, np.array([[1e4]]))


class TestProjectors:
    @pytest.mark.parametrize("maker", [lambda: make_sphere(2, 1.3),
                                       lambda: make_plane(2, 2, offset=(0, 0, 1.0, 0.0))])
    def test_idempotent_and_complementary(self, maker):
        item = maker()
        grid = verification_grid(item.immersion.box, 6)
        jet = geometry_jet(item.immersion, grid)
        n = item.immersion.ambient_dim
        assert np.abs(jet.p_nor @ jet.p_nor - jet.p_nor).max() < 1e-12
        assert np.abs(jet.p_nor + jet.p_tan - np.eye(n)[None]).max() < 1e-12

    def test_position_splits_exactly(self):
        item = make_sphere(2, 2.0)
        grid = verification_grid(item.immersion.box, 6)
        jet = geometry_jet(item.immersion, grid)
        assert np.abs(jet.x_tan + jet.x_nor - jet.x).max() == 0.0

    def test_h_is_normal(self, std_catalog):
        for item in std_catalog:
            grid = verification_grid(item.immersion.box, 4)
            jet = geometry_jet(item.immersion, grid)
            tang = np.einsum("nal,naij->nlij", jet.jac, jet.h)
            assert np.abs(tang).max() < 1e-8, item.family

    def test_metric_identities(self, std_catalog):
        for item in std_catalog:
            grid = verification_grid(item.immersion.box, 4)
            jet = geometry_jet(item.immersion, grid)
            m = item.m
            eye = np.einsum("nij,njk->nik", jet.metric, jet.metric_inv)
            assert np.abs(eye - np.eye(m)[None]).max() < 1e-10
            assert np.abs(jet.metric - jet.metric.swapaxes(1, 2)).max() < 1e-12
            H2 = np.einsum("nij,naij->na", jet.metric_inv, jet.h)
            assert np.abs(H2 - jet.H).max() < 1e-10


class TestNormalConnection:
    def test_constant_field_on_plane(self):
        item = make_plane(2, 1)
        fld = constant_normal_field(item.immersion, np.array([0.0, 0.0, 1.0]))
        D = normal_derivative(fld, np.array([[0.2, 0.4]]), 0)
        assert np.abs(D).max() < 1e-12

    def test_position_parallel_on_centered_sphere(self):
        item = make_sphere(2, 1.4)
        imm = item.immersion
        fld = NormalField(imm, lambda U: imm.pos(U), lambda U: imm.jac(U))
        grid = verification_grid(imm.box, 5)
        for i in range(2):
            D = normal_derivative(fld, grid, i)
            assert np.abs(D).max() < 1e-12

    def test_position_not_parallel_off_center(self):
        from xilab.catalog import make_offset_sphere
        imm = make_offset_sphere(2, 1.0, (0.5, 0.0, 0.0))

        def xperp(U):
            jet = geometry_jet(imm, U, strict=False)
            return jet.x_nor

        fld = NormalField(imm, xperp)
        grid = verification_grid(imm.box, 5)
        worst = max(np.linalg.norm(normal_derivative(fld, grid, i), axis=1).max()
                    for i in range(2))
        assert worst > 1e-2

    def test_leibniz_rule(self, rng):
        # D_perp(phi eta) = (d phi) eta + phi D_perp eta, phi scalar.
        item = make_sphere(2, 1.1)
        imm = item.immersion
        c = rng.normal(size=3)

        def eta_val(U):
            jet = geometry_jet(imm, U, strict=False)
            return np.einsum("nab,b->na", jet.p_nor, c)

        eta = NormalField(imm, eta_val)
        a = rng.normal(size=3)

        def phi(U):
            return np.sin(U[:, 0]) * np.cos(U[:, 1]) + a[0] * U[:, 0]

        def phi_eta(U):
            return phi(U)[:, None] * eta_val(U)

        prod = NormalField(imm, phi_eta)
        grid = verification_grid(imm.box, 4)
        sph = ScalarField(phi)
        for i in range(2):
            lhs = normal_derivative(prod, grid, i)
            dphi = sph.d(grid, imm.diff)[:, i]
            rhs = dphi[:, None] * eta_val(grid) + phi(grid)[:, None] * normal_derivative(eta, grid, i)
            assert np.abs(lhs - rhs).max() < 1e-7


class TestLaplacians:
    def test_linear_height_harmonic_on_plane(self):
        item = make_plane(2, 1)
        v = np.array([0.3, -0.7, 0.0])

        def phi(U):
            return item.immersion.pos(U) @ v

        val = laplace_beltrami(ScalarField(phi), item.immersion,
                               np.array([[0.5, 1.0], [-2.0, 3.0]]))
        assert np.abs(val).max() < 1e-9

    def test_quadratic_on_flat_chart(self):
        for m in (1, 2, 3):
            item = make_plane(m, 1)

            def phi(U):
                return np.einsum("ni,ni->n", U, U)

            val = laplace_beltrami(ScalarField(phi), item.immersion,
                                   np.zeros((1, m)) + 0.3)
            assert np.abs(val - 2 * m).max() < 1e-8

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_spherical_harmonic_eigenvalue(self, k):
        r = 1.7
        item = make_sphere(2, r)
        imm = item.immersion

        # Degree-k zonal harmonic: Legendre polynomial of cos(polar angle).
        from numpy.polynomial.legendre import Legendre
        leg = Legendre.basis(k)

        def phi(U):
            return leg(np.cos(U[:, 0]))

        grid = verification_grid(imm.box, 8)
        val = laplace_beltrami(ScalarField(phi), imm, grid)
        expect = -(k * (k + 1) / r**2) * phi(grid)
        assert np.abs(val - expect).max() < 1e-6

    def test_bundle_laplacian_on_parallel_field(self):
        # Parallel fields are in the kernel of the connection Laplacian.
        item = make_sphere(2, 1.3)
        grid = verification_grid(item.immersion.box, 4)
        for fld in item.parallel_normal_basis:
            val = bundle_laplacian(fld, grid)
            assert np.abs(val).max() < 1e-7

    def test_bundle_laplacian_matches_scalar_on_plane(self, rng):
        # On a plane with constant normal N, Laplacian of (phi N) is (Delta phi) N.
        item = make_plane(2, 1)
        imm = item.immersion
        N = np.array([0.0, 0.0, 1.0])

        def phi(U):
            return np.exp(-0.1 * (U[:, 0] ** 2 + U[:, 1] ** 2)) * np.sin(U[:, 0])

        fld = NormalField(imm, lambda U: phi(U)[:, None] * N)
        pts = rng.uniform(-2, 2, size=(5, 2))
        vec = bundle_laplacian(fld, pts)
        sca = laplace_beltrami(ScalarField(phi), imm, pts)
        assert np.abs(vec - sca[:, None] * N).max() < 1e-7


class TestPeriodicity:
    def test_circle_chart_matches_at_period(self):
        item = make_sphere(1, 2.0)
        assert item.immersion.check_periodicity() < 1e-12

    def test_torus_chart_matches_at_period(self, std_catalog):
        for item in std_catalog:
            assert item.immersion.check_periodicity() < 1e-12, item.family

"""Catalog constructors: exactness of xi, flags, closure under products."""
import json
import math

import numpy as np
import pytest

from xilab.catalog import (catalog_listing, make_ellipse, make_plane, make_product,
                           make_sphere, make_spherical, standard_catalog)
from xilab.errors import BadOffset, UnsupportedSpec
from xilab.quadrature import verification_grid
from xilab.soliton import xi_residual


class TestPlane:
    def test_origin_plane_is_self_shrinker(self):
        item = make_plane(2, 1)
        assert item.self_shrinker
        assert item.xi_norm() == 0.0

    def test_offset_line(self):
        item = make_plane(1, 1, offset=(0.0, 1.0))
        assert not item.self_shrinker
        u = np.array([[0.7]])
        assert np.allclose(item.xi(u), [[0.0, 1.0]])
        # x_tan = x - xi for the affine plane.
        from xilab.geometry import geometry_jet
        jet = geometry_jet(item.immersion, u)
        assert np.abs(jet.x_tan - (jet.x - item.xi(u))).max() < 1e-14

    def test_two_normal_components(self):
        item = make_plane(2, 2, offset=(0.0, 0.0, 0.3, -0.4))
        assert xi_residual(item.immersion).dperp_sup <= 1e-12

    def test_bad_offset_rejected(self):
        with pytest.raises(BadOffset):
            make_plane(2, 1, offset=(0.5, 0.0, 1.0))


class TestSphere:
    def test_unit_circle_is_self_shrinker(self):
        item = make_sphere(1, 1.0)
        assert item.self_shrinker
        assert item.xi_norm() < 1e-14

    def test_s2_unit_xi_is_minus_x(self):
        item = make_sphere(2, 1.0)
        u = np.array([[0.8, 2.1]])
        assert np.abs(item.xi(u) + item.immersion.pos(u)).max() < 1e-14
        assert abs(item.xi_norm() - 1.0) < 1e-12

    def test_sqrt_m_radius_flag(self):
        assert make_sphere(2, math.sqrt(2.0)).self_shrinker
        assert not make_sphere(2, 1.2).self_shrinker

    def test_invalid_radius(self):
        with pytest.raises(ValueError):
            make_sphere(2, -1.0)


class TestProduct:
    def test_torus_is_self_shrinker(self):
        item = make_product(make_sphere(1, 1.0), make_sphere(1, 1.0))
        assert item.self_shrinker
        assert item.m == 2 and item.p == 2

    def test_cylinder_xi(self):
        r = 1.6
        item = make_product(make_sphere(1, r), make_plane(1, 1))
        u = np.array([[0.5, 2.0]])
        x1 = item.immersion.pos(u)[0, :2]
        expect = np.concatenate([(1 - 1 / r**2) * x1, [0.0, 0.0]])
        assert np.abs(item.xi(u)[0] - expect).max() < 1e-14
        assert xi_residual(item.immersion).dperp_sup <= 1e-8

    def test_plane_times_plane_is_plane(self):
        a = make_plane(1, 1, offset=(0.0, 0.5))
        b = make_plane(1, 1, offset=(0.0, -0.2))
        item = make_product(a, b)
        u = np.array([[0.1, 0.2]])
        assert np.allclose(item.xi(u), [[0.0, 0.5, 0.0, -0.2]])
        assert xi_residual(item.immersion).dperp_sup <= 1e-12

    def test_closure_under_product(self, std_catalog):
        small = [it for it in std_catalog if it.m == 1][:2]
        prod = make_product(small[0], small[1])
        assert xi_residual(prod.immersion).dperp_sup <= 1e-8
        grid = verification_grid(prod.immersion.box, 4)
        assert prod.xi.normality_defect(grid) <= 1e-8
        assert prod.xi.parallel_defect(grid) <= 1e-8


class TestSpherical:
    def test_great_sphere_formula(self):
        a = 1.3
        item = make_spherical("great", m=2, a=a)
        u = np.array([[0.9, 1.0]])
        assert np.abs(item.xi(u) - (1 - 2 / a**2) * item.immersion.pos(u)).max() < 1e-14

    def test_clifford_residual(self):
        item = make_spherical("clifford", a=2.0)
        assert xi_residual(item.immersion).dperp_sup <= 1e-8
        # xi = (1 - 2/a^2) x on the torus.
        u = np.array([[0.3, 1.7]])
        assert np.abs(item.xi(u) - 0.5 * item.immersion.pos(u)).max() < 1e-12

    def test_minimal_great_sphere_is_self_shrinker(self):
        item = make_spherical("great", m=2, a=math.sqrt(2.0))
        assert item.self_shrinker
        assert item.xi_norm() < 1e-12

    def test_small_sphere(self):
        item = make_spherical("small", m=1, b=0.8, a=1.25)
        assert xi_residual(item.immersion).dperp_sup <= 1e-8
        grid = verification_grid(item.immersion.box, 6)
        assert item.xi.normality_defect(grid) <= 1e-8
        assert item.xi.parallel_defect(grid) <= 1e-8

    def test_unknown_kind(self):
        with pytest.raises(UnsupportedSpec):
            make_spherical("veronese", a=1.0)


class TestCatalogInvariants:
    def test_every_item_certifies(self, std_catalog):
        for item in std_catalog:
            res = xi_residual(item.immersion)
            assert res.dperp_sup <= 1e-8, (item.family, item.params)

    def test_xi_fields_normal_and_parallel(self, std_catalog):
        for item in std_catalog:
            grid = verification_grid(item.immersion.box, 4)
            assert item.xi.normality_defect(grid) <= 1e-8, item.family
            assert item.xi.parallel_defect(grid) <= 1e-8, item.family

    def test_self_shrinker_flag_matches_xi(self, std_catalog):
        for item in std_catalog:
            grid = verification_grid(item.immersion.box, 4)
            sup = np.linalg.norm(item.xi(grid), axis=1).max()
            assert item.self_shrinker == (sup <= 1e-10), item.family

    def test_parallel_bases_orthonormal(self, std_catalog):
        for item in std_catalog:
            grid = verification_grid(item.immersion.box, 3)
            vals = [f(grid) for f in item.parallel_normal_basis]
            for i, vi in enumerate(vals):
                for j, vj in enumerate(vals):
                    dots = np.einsum("na,na->n", vi, vj)
                    assert np.abs(dots - (1.0 if i == j else 0.0)).max() < 1e-10

    def test_listing_serializes(self):
        listing = catalog_listing()
        payload = json.dumps(listing)
        back = json.loads(payload)
        assert len(back) == len(listing)
        for entry in back:
            assert set(entry) == {"family", "params", "m", "p", "xi_norm", "self_shrinker"}


class TestNonExamples:
    def test_ellipse_has_positive_residual(self):
        assert xi_residual(make_ellipse(2.0, 1.0)).dperp_sup > 0.1

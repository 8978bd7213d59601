"""Exact constructors for the canonical soliton example families.

Every catalog item carries exact jets (symbolically generated or closed form),
its exact parallel soliton field xi with H + x_perp = xi, and a parallel
orthonormal normal frame where one exists (all families here have flat normal
bundles). Non-members used as negative controls (off-center spheres, ellipses)
are plain immersions without a xi field.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from .charts import immersion_from_exprs, vector_field_from_exprs
from .errors import BadOffset, UnsupportedSpec
from .geometry import Box, NormalField, ParametricImmersion, constant_normal_field

POLAR_COLLAR = 1e-3
PLANE_HALF_WIDTH = 13.0
SELF_SHRINKER_TOL = 1e-10


@dataclass
class CatalogImmersion:
    """An example immersion packaged with its exact soliton data."""

    immersion: ParametricImmersion
    xi: NormalField
    family: str
    params: dict
    self_shrinker: bool
    parallel_normal_basis: list[NormalField] = field(default_factory=list)
    expected_residual: float = 0.0
    compact: bool = True

    @property
    def m(self) -> int:
        return self.immersion.dim

    @property
    def p(self) -> int:
        return self.immersion.codim

    def xi_norm(self) -> float:
        """|xi| at a sample point (constant on every catalog family)."""
        u0 = 0.5 * (self.immersion.box.lo + self.immersion.box.hi)
        return float(np.linalg.norm(self.xi(u0)[0]))

    def listing_entry(self) -> dict:
        return {
            "family": self.family,
            "params": {k: (float(v) if isinstance(v, (int, float, np.floating)) else v)
                       for k, v in self.params.items()},
            "m": self.m,
            "p": self.p,
            "xi_norm": self.xi_norm(),
            "self_shrinker": self.self_shrinker,
        }


def _angular_symbols(m: int):
    return sp.symbols(f"u0:{m}", real=True)


def _unit_sphere_exprs(m: int, syms) -> list:
    """Angular chart of the unit m-sphere in R^{m+1}, m <= 3."""
    if m == 1:
        t, = syms
        return [sp.cos(t), sp.sin(t)]
    if m == 2:
        ph, th = syms
        return [sp.sin(ph) * sp.cos(th), sp.sin(ph) * sp.sin(th), sp.cos(ph)]
    if m == 3:
        ps, ph, th = syms
        s = sp.sin(ps)
        return [sp.cos(ps), s * sp.cos(ph), s * sp.sin(ph) * sp.cos(th),
                s * sp.sin(ph) * sp.sin(th)]
    raise UnsupportedSpec(f"angular sphere charts implemented for m <= 3, got m={m}")


def _sphere_box(m: int) -> Box:
    if m == 1:
        return Box.build([0.0], [2 * math.pi], periodic=[True])
    if m == 2:
        return Box.build([0.0, 0.0], [math.pi, 2 * math.pi],
                         periodic=[False, True], collar=[POLAR_COLLAR, 0.0])
    return Box.build([0.0, 0.0, 0.0], [math.pi, math.pi, 2 * math.pi],
                     periodic=[False, False, True],
                     collar=[POLAR_COLLAR, POLAR_COLLAR, 0.0])


def _scaled_field(imm: ParametricImmersion, coeff: float, name: str) -> NormalField:
    """The field coeff * x(u); normal and parallel on centered spheres/products."""
    def val(U):
        return coeff * imm.pos(U)

    def der(U):
        return coeff * imm.jac(U)

    return NormalField(imm, val, der, parallel=True, name=name)


def make_plane(m: int, p: int, offset=None) -> CatalogImmersion:
    """Affine m-plane spanned by the first m coordinate axes, at `offset`.

    The offset must be orthogonal to the plane (its first m components zero);
    it is then the position of the foot of the origin, i.e. the soliton field.
    """
    n = m + p
    if offset is None:
        off = np.zeros(n)
    else:
        off = np.asarray(offset, dtype=float)
        if off.size != n:
            raise BadOffset(f"offset must live in R^{n}, got size {off.size}")
        if p == 0 and np.linalg.norm(off) > 1e-12:
            raise BadOffset("codimension-zero plane admits no normal offset")
        if np.linalg.norm(off[:m]) > 1e-12:
            raise BadOffset("offset has a component inside the plane")

    box = Box.build(-PLANE_HALF_WIDTH * np.ones(m), PLANE_HALF_WIDTH * np.ones(m))
    block = np.vstack([np.eye(m), np.zeros((p, m))])

    def pos(U):
        return U @ block.T + off

    def jac(U):
        return np.broadcast_to(block, (U.shape[0], n, m)).copy()

    def hes(U):
        return np.zeros((U.shape[0], n, m, m))

    imm = ParametricImmersion(dim=m, codim=p, box=box, position=pos,
                              jacobian=jac, hessian=hes, name=f"P{m} in R{n}")
    xi = constant_normal_field(imm, off, name="plane offset")
    basis = [constant_normal_field(imm, np.eye(n)[m + k], name=f"e{m + k + 1}")
             for k in range(p)]
    return CatalogImmersion(
        immersion=imm, xi=xi, family="plane",
        params={"m": m, "p": p, "offset": [float(v) for v in off]},
        self_shrinker=bool(np.linalg.norm(off) <= SELF_SHRINKER_TOL),
        parallel_normal_basis=basis, compact=False)


def make_sphere(m: int, r: float, p: int = 1) -> CatalogImmersion:
    """Round m-sphere of radius r centered at the origin, embedded with
    codimension p (extra ambient axes are filled with zeros)."""
    if r <= 0:
        raise ValueError("radius must be positive")
    if p < 1:
        raise ValueError("sphere needs codimension >= 1")
    syms = _angular_symbols(m)
    unit = _unit_sphere_exprs(m, syms)
    exprs = [r * e for e in unit] + [sp.Integer(0)] * (p - 1)
    imm = immersion_from_exprs(exprs, syms, _sphere_box(m), name=f"S{m}({r:g}) in R{m + p}")

    coeff = 1.0 - m / r**2
    xi = _scaled_field(imm, coeff, name="sphere soliton field")
    n = m + p
    basis = [_scaled_field(imm, 1.0 / r, name="radial")]
    basis += [constant_normal_field(imm, np.eye(n)[m + 1 + k], name=f"e{m + 2 + k}")
              for k in range(p - 1)]
    return CatalogImmersion(
        immersion=imm, xi=xi, family="sphere",
        params={"m": m, "r": float(r), "p": p},
        self_shrinker=bool(abs(r**2 - m) <= SELF_SHRINKER_TOL),
        parallel_normal_basis=basis)


def _embed_field(prod_imm: ParametricImmersion, fld: NormalField,
                 m_slice: slice, out_slice: slice, n_total: int) -> NormalField:
    def val(U):
        out = np.zeros((U.shape[0], n_total))
        out[:, out_slice] = fld.value(U[:, m_slice])
        return out

    def der(U):
        m = prod_imm.dim
        out = np.zeros((U.shape[0], n_total, m))
        sub = fld.d(U[:, m_slice])
        out[:, out_slice, m_slice] = sub
        return out

    return NormalField(prod_imm, val, der, parallel=fld.parallel, name=fld.name)


def make_product(a: CatalogImmersion, b: CatalogImmersion) -> CatalogImmersion:
    """Product immersion; the soliton field is the pair of factor fields."""
    A, B = a.immersion, b.immersion
    ma, na = A.dim, A.ambient_dim
    mb, nb = B.dim, B.ambient_dim
    m, n = ma + mb, na + nb

    box = Box.build(np.concatenate([A.box.lo, B.box.lo]),
                    np.concatenate([A.box.hi, B.box.hi]),
                    periodic=np.concatenate([A.box.periodic, B.box.periodic]),
                    collar=np.concatenate([A.box.collar, B.box.collar]))

    ua, ub = slice(0, ma), slice(ma, m)
    xa, xb = slice(0, na), slice(na, n)

    def pos(U):
        return np.concatenate([A.pos(U[:, ua]), B.pos(U[:, ub])], axis=1)

    def jac(U):
        out = np.zeros((U.shape[0], n, m))
        out[:, xa, ua] = A.jac(U[:, ua])
        out[:, xb, ub] = B.jac(U[:, ub])
        return out

    def hes(U):
        out = np.zeros((U.shape[0], n, m, m))
        out[:, xa, ua, ua] = A.hess(U[:, ua])
        out[:, xb, ub, ub] = B.hess(U[:, ub])
        return out

    imm = ParametricImmersion(dim=m, codim=n - m, box=box, position=pos,
                              jacobian=jac, hessian=hes,
                              name=f"{A.name} x {B.name}")

    def xi_val(U):
        return np.concatenate([a.xi.value(U[:, ua]), b.xi.value(U[:, ub])], axis=1)

    def xi_der(U):
        out = np.zeros((U.shape[0], n, m))
        out[:, xa, ua] = a.xi.d(U[:, ua])
        out[:, xb, ub] = b.xi.d(U[:, ub])
        return out

    xi = NormalField(imm, xi_val, xi_der, parallel=True, name="product soliton field")
    basis = [_embed_field(imm, f, ua, xa, n) for f in a.parallel_normal_basis]
    basis += [_embed_field(imm, f, ub, xb, n) for f in b.parallel_normal_basis]

    return CatalogImmersion(
        immersion=imm, xi=xi,
        family=f"product({a.family},{b.family})",
        params={"a": a.params, "b": b.params},
        self_shrinker=a.self_shrinker and b.self_shrinker,
        parallel_normal_basis=basis, compact=a.compact and b.compact)


def make_spherical(kind: str, **kw) -> CatalogImmersion:
    """Parallel-mean-curvature submanifolds of a round sphere, viewed in the
    sphere's ambient space. Menu: great subspheres, small subspheres, and the
    square Clifford torus in S^3(a)."""
    if kind == "great":
        m, a = int(kw["m"]), float(kw["a"])
        item = make_sphere(m, a, p=2)
        item.family = "spherical-great"
        item.params = {"m": m, "a": a}
        return item
    if kind == "small":
        m, b, a = int(kw["m"]), float(kw["b"]), float(kw["a"])
        if not 0 < b < a:
            raise UnsupportedSpec("small subsphere needs 0 < b < a")
        c = math.sqrt(a * a - b * b)
        syms = _angular_symbols(m)
        unit = _unit_sphere_exprs(m, syms)
        exprs = [b * e for e in unit] + [sp.Float(c)]
        imm = immersion_from_exprs(exprs, syms, _sphere_box(m),
                                   name=f"S{m}({b:g}) in S{m + 1}({a:g})")
        coeff = 1.0 - m / b**2
        xi_exprs = [coeff * b * e for e in unit] + [sp.Float(c)]
        val, der = vector_field_from_exprs(xi_exprs, syms)
        xi = NormalField(imm, val, der, parallel=True, name="small-sphere soliton field")
        rad_exprs = [e for e in unit] + [sp.Integer(0)]
        rval, rder = vector_field_from_exprs(rad_exprs, syms)
        basis = [NormalField(imm, rval, rder, parallel=True, name="in-plane radial"),
                 constant_normal_field(imm, np.eye(m + 2)[m + 1], name="axis")]
        # xi = 0 requires both (1 - m/b^2) b = 0 and c = 0; c > 0 here.
        return CatalogImmersion(
            immersion=imm, xi=xi, family="spherical-small",
            params={"m": m, "b": b, "a": a}, self_shrinker=False,
            parallel_normal_basis=basis)
    if kind == "clifford":
        a = float(kw["a"])
        rho = a / math.sqrt(2.0)
        item = make_product(make_sphere(1, rho), make_sphere(1, rho))
        item.family = "spherical-clifford"
        item.params = {"a": a}
        return item
    raise UnsupportedSpec(f"unknown in-sphere menu kind: {kind!r}")


def make_offset_sphere(m: int, r: float, center) -> ParametricImmersion:
    """Sphere centered away from the origin; fails the soliton identity
    unless the center is zero. Negative control, not a catalog member."""
    c = np.asarray(center, dtype=float)
    syms = _angular_symbols(m)
    unit = _unit_sphere_exprs(m, syms)
    exprs = [r * e + sp.Float(ci) for e, ci in zip(unit, c)]
    return immersion_from_exprs(exprs, syms, _sphere_box(m),
                                name=f"S{m}({r:g}, center {c})")


def make_ellipse(a: float, b: float) -> ParametricImmersion:
    """Ellipse (a cos t, b sin t); a non-round ellipse is never a soliton."""
    t, = sp.symbols("t0:1", real=True)
    box = Box.build([0.0], [2 * math.pi], periodic=[True])
    return immersion_from_exprs([a * sp.cos(t), b * sp.sin(t)], [t], box,
                                name=f"ellipse({a:g},{b:g})")


SPHERE_RADII = (0.8, 1.0, math.sqrt(2.0), 2.0)


def standard_catalog() -> list[CatalogImmersion]:
    """The acceptance menu: planes with offsets, round spheres, products,
    and the in-sphere examples."""
    items: list[CatalogImmersion] = [
        make_plane(1, 1, offset=(0.0, 1.0)),
        make_plane(2, 1),
        make_plane(2, 2, offset=(0.0, 0.0, 0.3, -0.4)),
    ]
    for m in (1, 2, 3):
        for r in SPHERE_RADII:
            items.append(make_sphere(m, r))
    items.append(make_product(make_sphere(1, 1.0), make_sphere(1, 1.0)))
    items.append(make_product(make_sphere(1, 1.0), make_plane(1, 1)))
    items.append(make_product(make_sphere(1, 1.0), make_sphere(2, 1.0)))
    items.append(make_spherical("great", m=2, a=1.3))
    items.append(make_spherical("small", m=1, b=0.8, a=1.25))
    items.append(make_spherical("clifford", a=2.0))
    items.append(make_spherical("great", m=2, a=math.sqrt(2.0)))
    return items


def catalog_listing() -> list[dict]:
    return [item.listing_entry() for item in standard_catalog()]

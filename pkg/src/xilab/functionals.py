"""Weighted volumes and their first/second variations, analytic and differenced.

The two weighted volumes are

    V  = Int e^{-f}    dV,   f    = |x - xi|^2 / 2,
    Vb = Int e^{-fbar} dV,   fbar = f - |xi|^2 / 2,

plus the parallel-mean-curvature functional Vt = Int e^{<x, xi>} dV. Every
analytic variation formula here has a finite-difference twin built from
deformed immersions on the same quadrature grid, so the two routes stay
independent down to the integrator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .catalog import CatalogImmersion
from .errors import NonFinite, StepTooLarge
from .geometry import (DegenerateMetric, NormalField, ParametricImmersion,
                       ScalarField, as_points, normal_projector)
from .numdiff import jacobian_fd
from .operators import q_strong, shape_pairing
from .quadrature import MAX_NODES, MeasuredGrid, QuadratureGrid, measured_grid
from .soliton import XiData, xi_data_for, xi_vector

FIRST_ORDER_STEP = 1e-3
SECOND_ORDER_STEP = 1e-2


def default_nodes(imm: ParametricImmersion) -> tuple[int, ...]:
    """Angular axes settle at 24 Gauss-Legendre nodes; unbounded line axes
    (truncated Gaussian tails) go straight to the 96-node cap."""
    counts = []
    for i in range(imm.dim):
        angular = imm.box.periodic[i] or imm.box.collar[i] > 0
        counts.append(24 if angular else MAX_NODES)
    return tuple(counts)


# ---------------------------------------------------------------------------
# Weighted volumes


@dataclass
class VolumeResult:
    v: float
    vbar: float
    mg: MeasuredGrid


def _volume_on(imm: ParametricImmersion, xi: XiData, mg: MeasuredGrid) -> float:
    with np.errstate(over="ignore"):
        w = xi.weight(mg.points)
    if not np.all(np.isfinite(w)):
        raise NonFinite("weight e^{-f} is not finite on the grid")
    return mg.integrate(w)


def weighted_volume(imm: ParametricImmersion, xi: XiData, nodes=None,
                    refine: bool = True, rel_tol: float = 1e-10) -> VolumeResult:
    """V and Vb by tensor Gauss-Legendre quadrature with node doubling."""
    if nodes is None:
        nodes = default_nodes(imm)
    mg = measured_grid(imm, nodes)
    val = _volume_on(imm, xi, mg)
    if refine:
        while any(k < MAX_NODES for k in mg.grid.nodes_per_axis):
            nxt = measured_grid(imm, tuple(min(2 * k, MAX_NODES)
                                           for k in mg.grid.nodes_per_axis))
            nval = _volume_on(imm, xi, nxt)
            done = abs(nval - val) <= rel_tol * max(abs(nval), 1e-300)
            val, mg = nval, nxt
            if done:
                break
    with np.errstate(over="ignore"):
        wbar = xi.weight_bar(mg.points)
    if not np.all(np.isfinite(wbar)):
        raise NonFinite("weight e^{-fbar} is not finite on the grid")
    vbar = mg.integrate(wbar)
    return VolumeResult(v=val, vbar=vbar, mg=mg)


# ---------------------------------------------------------------------------
# Compact windows and field algebra


def bump_window(center, flat_radius: float, support_radius: float) -> ScalarField:
    """Radial C^2 window: 1 inside |u - c| <= r0, 0 outside r1, a quintic
    smoothstep in between. Exact gradient and Hessian callbacks."""
    c = np.asarray(center, dtype=float)
    r0, r1 = float(flat_radius), float(support_radius)
    if not 0 < r0 < r1:
        raise ValueError("need 0 < flat_radius < support_radius")
    w = r1 - r0

    def pieces(U):
        d = U - c
        rho = np.linalg.norm(d, axis=1)
        s = np.clip((rho - r0) / w, 0.0, 1.0)
        return d, rho, s

    def val(U):
        _, _, s = pieces(U)
        return 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s**2)

    def grad(U):
        d, rho, s = pieces(U)
        qp = -30.0 * s**2 * (1.0 - s) ** 2 / w
        safe = np.where(rho > 0, rho, 1.0)
        return (qp / safe)[:, None] * d

    def hess(U):
        d, rho, s = pieces(U)
        qp = -30.0 * s**2 * (1.0 - s) ** 2 / w
        qpp = -60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / w**2
        safe = np.where(rho > 0, rho, 1.0)
        rhat = d / safe[:, None]
        outer = rhat[:, :, None] * rhat[:, None, :]
        eye = np.eye(U.shape[1])[None]
        return qpp[:, None, None] * outer + (qp / safe)[:, None, None] * (eye - outer)

    return ScalarField(val, grad, hess, name=f"bump[{r0:g},{r1:g}]")


def scale_field(phi: ScalarField, eta: NormalField, name: str = "") -> NormalField:
    """The product phi * eta with chained exact derivatives where available."""
    imm = eta.immersion

    def val(U):
        return phi(U)[:, None] * eta(U)

    def der(U):
        gp = phi.d(U, imm.diff)
        return (phi(U)[:, None, None] * eta.d(U)
                + eta(U)[:, :, None] * gp[:, None, :])

    def dder(U):
        p = phi(U)
        gp = phi.d(U, imm.diff)
        hp = phi.dd(U, imm.diff)
        ev = eta(U)
        ed = eta.d(U)
        edd = eta.dd(U)
        out = p[:, None, None, None] * edd
        out += ev[:, :, None, None] * hp[:, None, :, :]
        out += ed[:, :, :, None] * gp[:, None, None, :]
        out += ed[:, :, None, :] * gp[:, None, :, None]
        return out

    return NormalField(imm, val, der, dder,
                       compact_support=True, name=name or f"{phi.name}*{eta.name}")


def combine_fields(fields: list[NormalField], coeffs, name: str = "") -> NormalField:
    imm = fields[0].immersion
    cs = np.asarray(coeffs, dtype=float)

    def val(U):
        return sum(c * f(U) for c, f in zip(cs, fields))

    def der(U):
        return sum(c * f.d(U) for c, f in zip(cs, fields))

    def dder(U):
        return sum(c * f.dd(U) for c, f in zip(cs, fields))

    return NormalField(imm, val, der, dder,
                       compact_support=any(f.compact_support for f in fields),
                       parallel=all(f.parallel for f in fields),
                       name=name or "combination")


def projected_constant_field(imm: ParametricImmersion, vec, name: str = "") -> NormalField:
    """P_nor(u) c for a constant ambient vector c; smooth wherever the chart is."""
    c = np.asarray(vec, dtype=float)

    def val(U):
        P = normal_projector(imm, U)
        return np.einsum("nab,b->na", P, c)

    return NormalField(imm, val, name=name or "projected constant")


def random_compact_normal_field(item: CatalogImmersion, rng,
                                flat_radius: float = 4.0,
                                support_radius: float = 8.0) -> NormalField:
    """A smooth normal field for variation tests: the normal projection of a
    random constant direction, windowed on non-compact items."""
    imm = item.immersion
    c = rng.normal(size=imm.ambient_dim)
    c /= np.linalg.norm(c)
    fld = projected_constant_field(imm, c, name="random normal")
    if item.compact:
        return fld
    center = np.zeros(imm.dim)
    return scale_field(bump_window(center, flat_radius, support_radius), fld,
                       name="windowed random normal")


# ---------------------------------------------------------------------------
# Variation families and deformed immersions


def _identity_profile(t):
    return t


@dataclass
class VariationFamily:
    """F(u, t) = x(u) + psi(t) * field(u) with psi(0) = 0, psi'(0) = 1.

    The SN flag additionally requires psi''(0) = 0 (the identity profile
    satisfies it); both conditions are verified numerically on construction.
    """

    immersion: ParametricImmersion
    field: NormalField
    psi: Callable[[float], float] = _identity_profile
    sn: bool = True
    t_max: float = 0.1

    def __post_init__(self):
        e = 1e-5
        p0 = self.psi(0.0)
        d1 = (self.psi(e) - self.psi(-e)) / (2 * e)
        d2 = (self.psi(e) - 2 * p0 + self.psi(-e)) / e**2
        if abs(p0) > 1e-12 or abs(d1 - 1.0) > 1e-6:
            raise ValueError("profile must satisfy psi(0) = 0, psi'(0) = 1")
        if self.sn and abs(d2) > 1e-5:
            raise ValueError("SN flag requires psi''(0) = 0")

    def immersion_at(self, t: float) -> ParametricImmersion:
        return deformed_immersion(self.immersion, self.field, self.psi(t))

    def check_immersed(self, grid_points: np.ndarray, samples: int = 3) -> None:
        for t in np.linspace(-self.t_max, self.t_max, samples):
            _deformed_metric_guard(self.immersion_at(float(t)), grid_points)


def deformed_immersion(imm: ParametricImmersion, fld: NormalField,
                       s: float) -> ParametricImmersion:
    """x + s * field, with the Jacobian chained from the field derivative."""
    def pos(U):
        return imm.pos(U) + s * fld(U)

    def jac(U):
        return imm.jac(U) + s * fld.d(U)

    def hes(U):
        return imm.hess(U) + s * fld.dd(U)

    return ParametricImmersion(dim=imm.dim, codim=imm.codim, box=imm.box,
                               position=pos, jacobian=jac, hessian=hes,
                               diff=imm.diff, name=f"{imm.name} deformed")


def _deformed_metric_guard(imm: ParametricImmersion, U: np.ndarray) -> np.ndarray:
    from .geometry import _metric_guard
    J = imm.jac(U)
    g = np.einsum("nai,naj->nij", J, J)
    try:
        det, _ = _metric_guard(g, J, imm.dim)
    except DegenerateMetric as exc:
        raise StepTooLarge(f"deformation breaks the rank test: {exc}") from exc
    return det


def _volume_at(imm: ParametricImmersion, fld: NormalField, xi: XiData, s: float,
               grid: QuadratureGrid, weight_fn) -> float:
    """Volume of the deformed immersion on a fixed grid (metric-only jets)."""
    U = grid.points
    deformed = deformed_immersion(imm, fld, s)
    det = _deformed_metric_guard(deformed, U)
    x_t = deformed.pos(U)
    with np.errstate(over="ignore"):
        w = weight_fn(x_t, U)
    total = float(np.sum(grid.weights * np.sqrt(det) * w))
    if not math.isfinite(total):
        raise NonFinite("deformed volume integrand overflowed")
    return total


def _gauss_weight(xi: XiData, bar: bool):
    def fn(x_t, U):
        d = x_t - xi.xi(U)
        f = 0.5 * np.einsum("na,na->n", d, d)
        if bar:
            f = f - 0.5 * np.einsum("na,na->n", xi.xi(U), xi.xi(U))
        return np.exp(-f)
    return fn


# ---------------------------------------------------------------------------
# First variation


@dataclass
class FirstVariation:
    v: float
    vbar: float


def first_variation(imm: ParametricImmersion, xi: XiData, fld: NormalField,
                    mg: MeasuredGrid, normal: Optional[bool] = None) -> FirstVariation:
    """Analytic first variation of (V, Vb) along the field.

    Normal fields use the reduced integrand -<H + x_perp - xi, eta>; general
    fields add the tangential gradient of <x, xi> - |xi|^2/2 (resp. <x, xi>
    for Vb). xi must be a differentiable field object; non-smooth soliton
    candidates are outside this formula's hypotheses.
    """
    U = mg.points
    jet = mg.jet
    eta = fld(U)
    if normal is None:
        tang = eta - np.einsum("nab,nb->na", jet.p_nor, eta)
        normal = bool(np.linalg.norm(tang, axis=1).max() <= 1e-8 *
                      max(1.0, np.linalg.norm(eta, axis=1).max()))
    core = xi_vector(jet) - xi.xi(U)

    if normal:
        base = -np.einsum("na,na->n", core, eta)
        v = mg.integrate(base * xi.weight(U))
        vbar = mg.integrate(base * xi.weight_bar(U))
        return FirstVariation(v=v, vbar=vbar)

    imm_diff = imm.diff
    xiU = xi.xi(U)
    dxi = xi.xi.d(U)
    # d_i <x, xi> and d_i |xi|^2/2, assembled from exact chart callbacks.
    d_inner = (np.einsum("nai,na->ni", jet.jac, xiU)
               + np.einsum("na,nai->ni", jet.x, dxi))
    d_half_norm = np.einsum("na,nai->ni", xiU, dxi)
    grad_v = np.einsum("nij,nj,nai->na", jet.metric_inv, d_inner - d_half_norm, jet.jac)
    grad_vb = np.einsum("nij,nj,nai->na", jet.metric_inv, d_inner, jet.jac)
    v = mg.integrate(-np.einsum("na,na->n", core + grad_v, eta) * xi.weight(U))
    vbar = mg.integrate(-np.einsum("na,na->n", core + grad_vb, eta) * xi.weight_bar(U))
    del imm_diff
    return FirstVariation(v=v, vbar=vbar)


def _richardson_first(values: Callable[[float], float], t: float) -> float:
    def central(s):
        return (values(s) - values(-s)) / (2 * s)

    d1, d2 = central(t), central(t / 2)
    return (4 * d2 - d1) / 3


def _richardson_second(values: Callable[[float], float], t: float) -> float:
    v0 = values(0.0)

    def central(s):
        return (values(s) - 2 * v0 + values(-s)) / s**2

    d1, d2 = central(t), central(t / 2)
    return (4 * d2 - d1) / 3


def first_variation_fd(imm: ParametricImmersion, xi: XiData, fam: VariationFamily,
                       mg: MeasuredGrid, step: float = FIRST_ORDER_STEP,
                       bar: bool = False) -> float:
    """Centered difference of V (or Vb) with one Richardson extrapolation."""
    if not 0 < step <= fam.t_max:
        raise StepTooLarge(f"step {step} outside (0, t_max={fam.t_max}]")
    weight = _gauss_weight(xi, bar)

    def value(t):
        return _volume_at(imm, fam.field, xi, fam.psi(t), mg.grid, weight)

    return _richardson_first(value, step)


# ---------------------------------------------------------------------------
# Second variation


def second_variation(imm: ParametricImmersion, xi: XiData, eta: NormalField,
                     mg: MeasuredGrid, check: bool = True) -> float:
    """Q(eta, eta) = -Int <L eta, eta> e^{-f} dV on a certified soliton."""
    if check:
        xi.require_soliton()
    return q_strong(xi, eta, eta, mg)


def second_variation_pair(imm: ParametricImmersion, xi: XiData, eta1: NormalField,
                          eta2: NormalField, mg: MeasuredGrid,
                          check: bool = True) -> float:
    if check:
        xi.require_soliton()
    return q_strong(xi, eta1, eta2, mg)


def second_variation_fd(imm: ParametricImmersion, xi: XiData, fam: VariationFamily,
                        mg: MeasuredGrid, step: float = SECOND_ORDER_STEP,
                        check: bool = True) -> float:
    """Second centered difference of V along an SN family, Richardson-refined."""
    if check:
        xi.require_soliton()
    if not fam.sn:
        raise ValueError("second-variation differencing requires an SN family")
    if not 0 < step <= fam.t_max:
        raise StepTooLarge(f"step {step} outside (0, t_max={fam.t_max}]")
    weight = _gauss_weight(xi, bar=False)

    def value(t):
        return _volume_at(imm, fam.field, xi, fam.psi(t), mg.grid, weight)

    return _richardson_second(value, step)


# ---------------------------------------------------------------------------
# Volume-preserving (VP) machinery


def vp_defect(xi: XiData, eta: NormalField, basis: list[NormalField],
              mg: MeasuredGrid) -> np.ndarray:
    """Weighted pairings Int <eta, e_alpha> e^{-f} dV for each parallel field."""
    from .errors import NoParallelFrame
    if not basis:
        raise NoParallelFrame("no parallel orthonormal normal frame available")
    U = mg.points
    w = xi.weight(U)
    ev = eta(U)
    return np.array([mg.integrate(np.einsum("na,na->n", ev, b(U)) * w)
                     for b in basis])


def vp_project(xi: XiData, eta: NormalField, basis: list[NormalField],
               mg: MeasuredGrid) -> NormalField:
    """Subtract the weighted mean along each parallel direction, making every
    VP defect vanish (the frame is pointwise orthonormal)."""
    defects = vp_defect(xi, eta, basis, mg)
    volume = mg.integrate(xi.weight(mg.points))
    coeffs = defects / volume
    return combine_fields([eta] + basis, np.concatenate([[1.0], -coeffs]),
                          name=f"vp({eta.name})")


# ---------------------------------------------------------------------------
# Parallel-mean-curvature functional Vt = Int e^{<x, xi>} dV


def _pmc_weight(xi: XiData):
    def fn(x_t, U):
        return np.exp(np.einsum("na,na->n", x_t, xi.xi(U)))
    return fn


def pmc_volume(imm: ParametricImmersion, xi: XiData, mg: MeasuredGrid) -> float:
    with np.errstate(over="ignore"):
        w = _pmc_weight(xi)(imm.pos(mg.points), mg.points)
    if not np.all(np.isfinite(w)):
        raise NonFinite("weight e^{<x, xi>} overflowed on the support")
    return mg.integrate(w)


def pmc_first_variation(imm: ParametricImmersion, xi: XiData, fld: NormalField,
                        mg: MeasuredGrid, normal: bool = True) -> float:
    """-Int <H - xi (+ grad <x, xi> for general fields), eta> e^{<x, xi>} dV."""
    U = mg.points
    jet = mg.jet
    eta = fld(U)
    with np.errstate(over="ignore"):
        w = np.exp(np.einsum("na,na->n", jet.x, xi.xi(U)))
    if not np.all(np.isfinite(w)):
        raise NonFinite("weight e^{<x, xi>} overflowed on the support")
    core = jet.H - xi.xi(U)
    if not normal:
        xiU = xi.xi(U)
        dxi = xi.xi.d(U)
        d_inner = (np.einsum("nai,na->ni", jet.jac, xiU)
                   + np.einsum("na,nai->ni", jet.x, dxi))
        core = core + np.einsum("nij,nj,nai->na", jet.metric_inv, d_inner, jet.jac)
    return mg.integrate(-np.einsum("na,na->n", core, eta) * w)


def pmc_first_variation_fd(imm: ParametricImmersion, xi: XiData, fam: VariationFamily,
                           mg: MeasuredGrid, step: float = FIRST_ORDER_STEP) -> float:
    def value(t):
        return _volume_at(imm, fam.field, xi, fam.psi(t), mg.grid, _pmc_weight(xi))

    return _richardson_first(value, step)


def pmc_second_variation(imm: ParametricImmersion, xi: XiData, eta: NormalField,
                         mg: MeasuredGrid) -> float:
    """-Int (<Delta_perp eta + D_perp_{grad <x,H>} eta, eta> + |A_eta|^2)
    e^{<x, H>} dV for an immersion with parallel mean curvature H = xi."""
    from .geometry import bundle_laplacian, covariant_normal_derivatives
    U = mg.points
    jet = mg.jet
    with np.errstate(over="ignore"):
        w = np.exp(np.einsum("na,na->n", jet.x, xi.xi(U)))
    if not np.all(np.isfinite(w)):
        raise NonFinite("weight e^{<x, xi>} overflowed on the support")
    lap = bundle_laplacian(eta, U, jet=jet)
    xiU = xi.xi(U)
    dxi = xi.xi.d(U)
    d_inner = (np.einsum("nai,na->ni", jet.jac, xiU)
               + np.einsum("na,nai->ni", jet.x, dxi))
    grad_coords = np.einsum("nij,nj->ni", jet.metric_inv, d_inner)
    Dall = covariant_normal_derivatives(eta, U)
    drift_term = np.einsum("nai,ni->na", Dall, grad_coords)
    ev = eta(U)
    integrand = -(np.einsum("na,na->n", lap + drift_term, ev)
                  + shape_pairing(jet, ev, ev)) * w
    return mg.integrate(integrand)


def pmc_second_variation_fd(imm: ParametricImmersion, xi: XiData, fam: VariationFamily,
                            mg: MeasuredGrid, step: float = SECOND_ORDER_STEP) -> float:
    if not fam.sn:
        raise ValueError("second-variation differencing requires an SN family")

    def value(t):
        return _volume_at(imm, fam.field, xi, fam.psi(t), mg.grid, _pmc_weight(xi))

    return _richardson_second(value, step)


def h_field(item: CatalogImmersion) -> XiData:
    """XiData whose field is the mean curvature vector H of a catalog item
    (exact: H = xi - x_perp, and on these items x_perp has a closed form)."""
    imm = item.immersion

    def val(U):
        from .geometry import geometry_jet
        jet = geometry_jet(imm, U, strict=False)
        return jet.H

    return XiData(immersion=imm, xi=NormalField(imm, val, name="mean curvature"))

"""The stability operators and their quadratic energies.

Bundle operators on normal fields eta and their scalar counterparts on
functions phi:

    cal_L  eta = Delta_perp eta - D_perp_drift eta
    L      eta = cal_L eta + g^{ik} g^{jl} <h_ij, eta> h_kl + eta
    cal_Lt phi = Delta phi - grad_drift phi
    Lt     phi = cal_Lt phi + phi

with drift = x_tan + A_xi(x_tan). The quadratic form is
Q(eta1, eta2) = -Int <L eta1, eta2> e^{-f} dV; its weak form only needs first
derivatives and is symmetric by construction.
"""
from __future__ import annotations

import numpy as np

from .geometry import (GeometryJet, NormalField, ParametricImmersion, ScalarField,
                       as_points, bundle_laplacian, covariant_normal_derivatives,
                       geometry_jet, laplace_beltrami, projector_derivatives)
from .quadrature import MeasuredGrid
from .soliton import XiData


def shape_pairing(jet: GeometryJet, eta1: np.ndarray, eta2: np.ndarray) -> np.ndarray:
    """<A_{eta1}, A_{eta2}> = g^{ik} g^{jl} <h_ij, eta1> <h_kl, eta2>; (N,)."""
    h1 = np.einsum("naij,na->nij", jet.h, eta1)
    h2 = np.einsum("naij,na->nij", jet.h, eta2)
    return np.einsum("nik,njl,nij,nkl->n", jet.metric_inv, jet.metric_inv, h1, h2)


def shape_term(jet: GeometryJet, eta: np.ndarray) -> np.ndarray:
    """g^{ik} g^{jl} <h_ij, eta> h_kl; (N, n)."""
    hv = np.einsum("naij,na->nij", jet.h, eta)
    raised = np.einsum("nik,njl,nij->nkl", jet.metric_inv, jet.metric_inv, hv)
    return np.einsum("nkl,nakl->na", raised, jet.h)


def apply_bundle_operator(xi: XiData, fld: NormalField, u, mode: str = "L",
                          jet: GeometryJet | None = None) -> np.ndarray:
    """Apply L (default) or cal_L to a normal field at a batch of points."""
    U = as_points(u)
    imm = xi.immersion
    if jet is None:
        jet = geometry_jet(imm, U, strict=False)
    dP = projector_derivatives(imm, U)
    lap = bundle_laplacian(fld, U, jet=jet, dP=dP)
    drift = xi.drift_coords(jet)
    Dall = np.einsum("nab,nbi->nai", jet.p_nor, fld.d(U))
    out = lap - np.einsum("nai,ni->na", Dall, drift)
    if mode == "cal_L":
        return out
    if mode == "L":
        vals = fld(U)
        return out + shape_term(jet, vals) + vals
    raise ValueError(f"unknown bundle mode {mode!r}")


def apply_scalar_operator(xi: XiData, phi: ScalarField, u, mode: str = "Lt",
                          jet: GeometryJet | None = None) -> np.ndarray:
    """Apply Lt (default) or cal_Lt to a scalar field; returns (N,)."""
    U = as_points(u)
    imm = xi.immersion
    if jet is None:
        jet = geometry_jet(imm, U, strict=False)
    lap = laplace_beltrami(phi, imm, U, jet=jet)
    drift = xi.drift_coords(jet)
    grad = phi.d(U, imm.diff)
    out = lap - np.einsum("ni,ni->n", grad, drift)
    if mode == "cal_Lt":
        return out
    if mode == "Lt":
        return out + phi(U)
    raise ValueError(f"unknown scalar mode {mode!r}")


def q_strong(xi: XiData, eta1: NormalField, eta2: NormalField,
             mg: MeasuredGrid) -> float:
    """Q(eta1, eta2) = -Int <L eta1, eta2> e^{-f} dV via the pointwise operator."""
    U = mg.points
    L1 = apply_bundle_operator(xi, eta1, U, mode="L", jet=mg.jet)
    vals2 = eta2(U)
    integrand = -np.einsum("na,na->n", L1, vals2) * xi.weight(U)
    return mg.integrate(integrand)


def q_weak(xi: XiData, eta1: NormalField, eta2: NormalField,
           mg: MeasuredGrid) -> float:
    """Q via first derivatives only:
    Int (<D_perp eta1, D_perp eta2>_g - <A_e1, A_e2> - <eta1, eta2>) e^{-f} dV."""
    U = mg.points
    jet = mg.jet
    D1 = covariant_normal_derivatives(eta1, U)
    D2 = D1 if eta2 is eta1 else covariant_normal_derivatives(eta2, U)
    v1 = eta1(U)
    v2 = v1 if eta2 is eta1 else eta2(U)
    grad_pair = np.einsum("nij,nai,naj->n", jet.metric_inv, D1, D2)
    integrand = (grad_pair - shape_pairing(jet, v1, v2)
                 - np.einsum("na,na->n", v1, v2)) * xi.weight(U)
    return mg.integrate(integrand)


def dirichlet_pair_bundle(xi: XiData, eta1: NormalField, eta2: NormalField,
                          mg: MeasuredGrid) -> float:
    """Int <D_perp eta1, D_perp eta2>_g e^{-f} dV."""
    U = mg.points
    D1 = covariant_normal_derivatives(eta1, U)
    D2 = D1 if eta2 is eta1 else covariant_normal_derivatives(eta2, U)
    vals = np.einsum("nij,nai,naj->n", mg.jet.metric_inv, D1, D2)
    return mg.integrate(vals * xi.weight(U))


def dirichlet_pair_scalar(xi: XiData, phi1: ScalarField, phi2: ScalarField,
                          mg: MeasuredGrid) -> float:
    """Int <grad phi1, grad phi2> e^{-f} dV."""
    U = mg.points
    imm = xi.immersion
    g1 = phi1.d(U, imm.diff)
    g2 = g1 if phi2 is phi1 else phi2.d(U, imm.diff)
    vals = np.einsum("nij,ni,nj->n", mg.jet.metric_inv, g1, g2)
    return mg.integrate(vals * xi.weight(U))


def weighted_pair_bundle(xi: XiData, eta1: NormalField, eta2: NormalField,
                         mg: MeasuredGrid) -> float:
    """Int <eta1, eta2> e^{-f} dV (the weighted L^2 inner product)."""
    U = mg.points
    v1 = eta1(U)
    v2 = v1 if eta2 is eta1 else eta2(U)
    return mg.integrate(np.einsum("na,na->n", v1, v2) * xi.weight(U))

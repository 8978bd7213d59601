"""Stability machinery: operator identity checks, weighted Galerkin spectra,
sphere index counting, and the canonical instability witnesses.

Galerkin problems solve K v = lambda G v with G_ab = Int <b_a, b_b> e^{-f} dV
and K_ab = -Int <b_a, L b_b> e^{-f} dV assembled in weak form (first
derivatives only, symmetric by construction); eigenvalues approximate the
spectrum of -L. The VP restriction removes the span of parallel normal fields
in the weighted inner product before solving.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.special
from scipy.linalg import eigh, null_space

from .catalog import CatalogImmersion, make_plane, make_product, make_sphere
from .errors import IllConditionedBasis, NoParallelFrame
from .functionals import (bump_window, default_nodes, scale_field, vp_project,
                          weighted_volume)
from .geometry import (NormalField, ScalarField, as_points,
                       covariant_normal_derivatives, geometry_jet,
                       normal_projector, weingarten_map)
from .hermite import (HermiteIndex, hermite_eval, hermite_gradient,
                      hermite_hessian, multi_indices)
from .operators import (apply_bundle_operator, apply_scalar_operator,
                        dirichlet_pair_bundle, dirichlet_pair_scalar, q_strong,
                        q_weak, shape_pairing, weighted_pair_bundle)
from .quadrature import MeasuredGrid, measured_grid, verification_grid
from .soliton import XiData, xi_data_for

NEGATIVE_TOL = 1e-8
GRAM_CONDITION_LIMIT = 1e8


# ---------------------------------------------------------------------------
# Pointwise operator identity checks


def product_rule_defect(xi: XiData, phi: ScalarField, eta: NormalField,
                        grid) -> float:
    """sup defect of L(phi eta) = (cal_Lt phi) eta + phi L(eta) + 2 D_{grad phi} eta."""
    U = as_points(grid)
    imm = xi.immersion
    jet = geometry_jet(imm, U, strict=False)
    lhs = apply_bundle_operator(xi, scale_field(phi, eta), U, mode="L", jet=jet)
    scal = apply_scalar_operator(xi, phi, U, mode="cal_Lt", jet=jet)
    Leta = apply_bundle_operator(xi, eta, U, mode="L", jet=jet)
    grad_coords = np.einsum("nij,nj->ni", jet.metric_inv, phi.d(U, imm.diff))
    Dall = np.einsum("nab,nbi->nai", jet.p_nor, eta.d(U))
    rhs = (scal[:, None] * eta(U) + phi(U)[:, None] * Leta
           + 2.0 * np.einsum("nai,ni->na", Dall, grad_coords))
    scale = max(1.0, float(np.abs(rhs).max()))
    return float(np.abs(lhs - rhs).max() / scale)


def integration_by_parts_gap_bundle(xi: XiData, eta1: NormalField,
                                    eta2: NormalField, mg: MeasuredGrid) -> float:
    """|Int <eta1, cal_L eta2> e^{-f} + Int <D eta1, D eta2>_g e^{-f}|, normalized."""
    U = mg.points
    w = xi.weight(U)
    cal = apply_bundle_operator(xi, eta2, U, mode="cal_L", jet=mg.jet)
    lhs = mg.integrate(np.einsum("na,na->n", eta1(U), cal) * w)
    rhs = -dirichlet_pair_bundle(xi, eta1, eta2, mg)
    return abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs))


def integration_by_parts_gap_scalar(xi: XiData, phi1: ScalarField,
                                    phi2: ScalarField, mg: MeasuredGrid) -> float:
    U = mg.points
    w = xi.weight(U)
    cal = apply_scalar_operator(xi, phi2, U, mode="cal_Lt", jet=mg.jet)
    lhs = mg.integrate(phi1(U) * cal * w)
    rhs = -dirichlet_pair_scalar(xi, phi1, phi2, mg)
    return abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs))


def cutoff_identity_gap(xi: XiData, phi: ScalarField, eta: NormalField,
                        mg: MeasuredGrid) -> float:
    """Gap in Int <phi eta, L(phi eta)> = Int phi^2 <eta, L eta> - Int |grad phi|^2 |eta|^2."""
    U = mg.points
    imm = xi.immersion
    w = xi.weight(U)
    jet = mg.jet
    composite = scale_field(phi, eta)
    lhs = mg.integrate(np.einsum("na,na->n", composite(U),
                                 apply_bundle_operator(xi, composite, U, mode="L",
                                                       jet=jet)) * w)
    Leta = apply_bundle_operator(xi, eta, U, mode="L", jet=jet)
    mid = mg.integrate(phi(U) ** 2 * np.einsum("na,na->n", eta(U), Leta) * w)
    grad = phi.d(U, imm.diff)
    grad2 = np.einsum("nij,ni,nj->n", jet.metric_inv, grad, grad)
    tail = mg.integrate(grad2 * np.einsum("na,na->n", eta(U), eta(U)) * w)
    rhs = mid - tail
    return abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs))


# ---------------------------------------------------------------------------
# Galerkin spectra


@dataclass
class EigenResult:
    values: np.ndarray
    vectors: np.ndarray          # columns, in the original basis coordinates
    residual_sup: float          # max_k |K v_k - lambda_k G v_k|_inf / |v_k|_inf
    gram_condition: float
    vp: bool
    labels: list[str] = field(default_factory=list)

    def negative_count(self, tol: float = NEGATIVE_TOL) -> int:
        return int(np.sum(self.values < -tol))


@dataclass
class SpectralProblem:
    """Weighted Galerkin setup for -L (bundle) or -Lt (scalar)."""

    xi: XiData
    fields: list
    mg: MeasuredGrid
    mode: str = "bundle"              # "bundle" | "scalar"
    vp: bool = False
    parallel_basis: list[NormalField] = field(default_factory=list)
    labels: list[str] = field(default_factory=list)

    def assemble(self) -> tuple[np.ndarray, np.ndarray]:
        U = self.mg.points
        jet = self.mg.jet
        wmeas = self.mg.measure * self.xi.weight(U)
        if self.mode == "scalar":
            B = np.stack([f(U) for f in self.fields])                    # (K, N)
            Bg = np.stack([f.d(U, self.xi.immersion.diff) for f in self.fields])
            G = np.einsum("aN,bN,N->ab", B, B, wmeas)
            dir_part = np.einsum("aNi,Nij,bNj,N->ab", Bg, jet.metric_inv, Bg, wmeas)
            K = dir_part - G
        elif self.mode == "bundle":
            BV = np.stack([f(U) for f in self.fields])                   # (K, N, n)
            BD = np.stack([covariant_normal_derivatives(f, U) for f in self.fields])
            G = np.einsum("aNc,bNc,N->ab", BV, BV, wmeas)
            dir_part = np.einsum("aNci,Nij,bNcj,N->ab", BD, jet.metric_inv, BD, wmeas)
            hv = np.einsum("Ncij,aNc->aNij", jet.h, BV)
            raised = np.einsum("Nik,Njl,aNij->aNkl", jet.metric_inv, jet.metric_inv, hv)
            pair = np.einsum("aNkl,bNkl,N->ab", raised, hv, wmeas)
            K = dir_part - pair - G
        else:
            raise ValueError(f"unknown mode {self.mode!r}")
        return 0.5 * (G + G.T), 0.5 * (K + K.T)

    def constraint_matrix(self) -> np.ndarray:
        """Weighted pairings of the basis with the parallel normal frame
        (scalar problems pair with the constant function)."""
        U = self.mg.points
        wmeas = self.mg.measure * self.xi.weight(U)
        if self.mode == "scalar":
            B = np.stack([f(U) for f in self.fields])
            return np.einsum("aN,N->a", B, wmeas)[None, :]
        if not self.parallel_basis:
            raise NoParallelFrame("VP restriction needs a parallel normal frame")
        BV = np.stack([f(U) for f in self.fields])
        PV = np.stack([f(U) for f in self.parallel_basis])
        return np.einsum("pNc,aNc,N->pa", PV, BV, wmeas)


def galerkin_spectrum(problem: SpectralProblem) -> EigenResult:
    G, K = problem.assemble()
    gev = np.linalg.eigvalsh(G)
    cond = float(gev[-1] / max(gev[0], 1e-300))
    if gev[0] <= 0 or cond > GRAM_CONDITION_LIMIT:
        raise IllConditionedBasis(f"Gram condition {cond:.3e} beyond limit")
    if problem.vp:
        C = problem.constraint_matrix()
        Z = null_space(C)
        if Z.shape[1] == 0:
            raise IllConditionedBasis("VP restriction annihilates the whole basis")
        Gr, Kr = Z.T @ G @ Z, Z.T @ K @ Z
        vals, vecs = eigh(0.5 * (Kr + Kr.T), 0.5 * (Gr + Gr.T))
        vecs = Z @ vecs
    else:
        vals, vecs = eigh(K, G)
    res = np.abs(K @ vecs - G @ vecs * vals[None, :]).max(axis=0)
    res /= np.maximum(np.abs(vecs).max(axis=0), 1e-300)
    return EigenResult(values=vals, vectors=vecs, residual_sup=float(res.max()),
                       gram_condition=cond, vp=problem.vp,
                       labels=list(problem.labels))


# ---------------------------------------------------------------------------
# Trial bases


def hermite_scalar_basis(item: CatalogImmersion, max_degree: int) -> tuple[list, list]:
    """Products of probabilists' Hermite polynomials in the plane chart."""
    fields, labels = [], []
    for idx in multi_indices(item.m, max_degree):
        fields.append(ScalarField(
            value=(lambda U, i=idx: hermite_eval(i, U)),
            grad=(lambda U, i=idx: hermite_gradient(i, U)),
            hess=(lambda U, i=idx: hermite_hessian(i, U)),
            name=f"He{idx.orders}"))
        labels.append(f"He{idx.orders}")
    return fields, labels


def hermite_bundle_basis(item: CatalogImmersion, max_degree: int) -> tuple[list, list]:
    scalars, slabels = hermite_scalar_basis(item, max_degree)
    fields, labels = [], []
    for nu in item.parallel_normal_basis:
        for phi, lab in zip(scalars, slabels):
            fields.append(scale_field(phi, nu, name=f"{lab}*{nu.name}"))
            labels.append(f"{lab}*{nu.name}")
    return fields, labels


def fourier_scalar_basis(item: CatalogImmersion, kmax: int) -> tuple[list, list]:
    """1, cos(k t), sin(k t) on the circle chart."""
    fields = [ScalarField(lambda U: np.ones(U.shape[0]),
                          lambda U: np.zeros((U.shape[0], 1)),
                          lambda U: np.zeros((U.shape[0], 1, 1)), name="1")]
    labels = ["1"]
    for k in range(1, kmax + 1):
        fields.append(ScalarField(
            (lambda U, k=k: np.cos(k * U[:, 0])),
            (lambda U, k=k: -k * np.sin(k * U[:, 0])[:, None]),
            (lambda U, k=k: -k * k * np.cos(k * U[:, 0])[:, None, None]),
            name=f"cos{k}"))
        fields.append(ScalarField(
            (lambda U, k=k: np.sin(k * U[:, 0])),
            (lambda U, k=k: k * np.cos(k * U[:, 0])[:, None]),
            (lambda U, k=k: -k * k * np.sin(k * U[:, 0])[:, None, None]),
            name=f"sin{k}"))
        labels += [f"cos{k}", f"sin{k}"]
    return fields, labels


def real_harmonic_basis(item: CatalogImmersion, lmax: int) -> tuple[list, list]:
    """Real spherical harmonics on the polar chart of a round 2-sphere."""
    fields, labels = [], []
    for ell in range(lmax + 1):
        for order in range(-ell, ell + 1):
            def val(U, ell=ell, order=order):
                th, ph = U[:, 0], U[:, 1]
                y = scipy.special.sph_harm_y(ell, abs(order), th, ph)
                if order == 0:
                    return y.real
                if order > 0:
                    return math.sqrt(2.0) * (-1.0) ** order * y.real
                return math.sqrt(2.0) * (-1.0) ** order * y.imag
            fields.append(ScalarField(val, name=f"Y{ell},{order}"))
            labels.append(f"Y{ell},{order}")
    return fields, labels


def sphere_scalar_basis(item: CatalogImmersion, kmax: int = 16,
                        lmax: int = 8) -> tuple[list, list]:
    if item.m == 1:
        return fourier_scalar_basis(item, kmax)
    if item.m == 2:
        return real_harmonic_basis(item, lmax)
    raise ValueError("scalar sphere bases implemented for m <= 2")


def sphere_bundle_basis(item: CatalogImmersion, kmax: int = 16,
                        lmax: int = 8) -> tuple[list, list]:
    scalars, slabels = sphere_scalar_basis(item, kmax, lmax)
    fields, labels = [], []
    for nu in item.parallel_normal_basis:
        for phi, lab in zip(scalars, slabels):
            fields.append(scale_field(phi, nu, name=f"{lab}*{nu.name}"))
            labels.append(f"{lab}*{nu.name}")
    return fields, labels


# ---------------------------------------------------------------------------
# Sphere index: closed form and Galerkin cross-check


@dataclass
class IndexBand:
    band: str
    k: int
    multiplicity: int
    value: float


@dataclass
class IndexResult:
    m: int
    p: int
    r: float
    vp: bool
    index: int
    bands: list[IndexBand]


def harmonic_multiplicity(m: int, k: int) -> int:
    """Dimension of degree-k spherical harmonics on S^m."""
    if k < 2:
        return 1 if k == 0 else m + 1
    return math.comb(m + k, k) - math.comb(m + k - 2, k - 2)


def sphere_index(m: int, p: int, r: float, vp: bool = True) -> IndexResult:
    """Closed-form count of negative directions of Q on the round sphere.

    Radial band (along x/r): k(m+k-1)/r^2 - 1 - m/r^2 per degree k; the p - 1
    directions orthogonal to the sphere's span contribute k(m+k-1)/r^2 - 1.
    The VP restriction drops k = 0 (those are exactly the parallel fields).
    With VP the count is m + 1 precisely when r^2 <= m.
    """
    if m < 1 or p < 1 or r <= 0:
        raise ValueError("need m >= 1, p >= 1, r > 0")
    r2 = r * r
    bands: list[IndexBand] = []
    index = 0
    k = 0
    while True:
        lam = k * (m + k - 1) / r2 - 1.0
        radial = lam - m / r2
        mult = harmonic_multiplicity(m, k)
        include = (k > 0) or not vp
        done_radial = radial > 0
        done_trans = (p == 1) or lam > 0
        if include:
            bands.append(IndexBand("radial", k, mult, radial))
            if radial < -NEGATIVE_TOL:
                index += mult
            if p > 1:
                bands.append(IndexBand("transverse", k, mult * (p - 1), lam))
                if lam < -NEGATIVE_TOL:
                    index += mult * (p - 1)
        if done_radial and done_trans and k >= 2:
            break
        k += 1
    return IndexResult(m=m, p=p, r=r, vp=vp, index=index, bands=bands)


def galerkin_sphere_index(m: int, p: int, r: float, vp: bool = True,
                          kmax: int = 16, lmax: int = 8) -> tuple[int, EigenResult]:
    """Negative-eigenvalue count of the discretized problem on S^m(r)."""
    item = make_sphere(m, r, p)
    xi = xi_data_for(item)
    fields, labels = sphere_bundle_basis(item, kmax=kmax, lmax=lmax)
    mg = measured_grid(item.immersion, default_nodes(item.immersion))
    prob = SpectralProblem(xi=xi, fields=fields, mg=mg, mode="bundle", vp=vp,
                           parallel_basis=item.parallel_normal_basis, labels=labels)
    res = galerkin_spectrum(prob)
    return res.negative_count(), res


# ---------------------------------------------------------------------------
# Instability witnesses


@dataclass
class WitnessResult:
    kind: str
    q: float
    norm_sq: float
    detail: dict


def position_field(item: CatalogImmersion) -> NormalField:
    imm = item.immersion
    return NormalField(imm, lambda U: imm.pos(U), lambda U: imm.jac(U),
                       lambda U: imm.hess(U), name="position")


def instability_witness(kind: str, m: int = 1, p: int = 1, r: float = 1.0,
                        R: float = 10.0) -> WitnessResult:
    """The canonical negative directions: eta = x on spheres, a parallel
    normal on products with flat directions, and a cutoff constant normal on
    planes (negative once the cutoff radius R is large enough)."""
    if kind == "sphere_radial":
        item = make_sphere(m, r, p)
        xi = xi_data_for(item)
        vr = weighted_volume(item.immersion, xi)
        eta = position_field(item)
        q = q_strong(xi, eta, eta, vr.mg)
        nsq = weighted_pair_bundle(xi, eta, eta, vr.mg)
        return WitnessResult(kind, q, nsq,
                             {"closed_form": -(m + r * r) * vr.v, "volume": vr.v})
    if kind == "parallel_normal":
        item = make_product(make_sphere(1, r), make_plane(1, 1))
        xi = xi_data_for(item)
        vr = weighted_volume(item.immersion, xi)
        eta = item.parallel_normal_basis[-1]   # the plane factor's unit normal
        q = q_strong(xi, eta, eta, vr.mg)
        nsq = weighted_pair_bundle(xi, eta, eta, vr.mg)
        return WitnessResult(kind, q, nsq, {"closed_form": -vr.v, "volume": vr.v})
    if kind == "plane_cutoff":
        item = make_plane(m, p)
        xi = xi_data_for(item)
        mg = measured_grid(item.immersion, default_nodes(item.immersion))
        if R + 2.0 > item.immersion.box.hi[0]:
            raise ValueError("cutoff radius exceeds the chart box")
        N = item.parallel_normal_basis[0]

        def q_at(radius):
            eta = scale_field(bump_window(np.zeros(m), radius, radius + 2.0), N)
            return q_weak(xi, eta, eta, mg), eta

        q, eta = q_at(R)
        nsq = weighted_pair_bundle(xi, eta, eta, mg)
        # Smallest sweep radius at which the cutoff direction already tests
        # negative (for the geometries here that is the start of the sweep:
        # the Gaussian mass inside always beats the gradient ring).
        threshold = None
        for radius in np.arange(0.25, R + 0.25, 0.25):
            val, _ = q_at(float(radius))
            if val < 0:
                threshold = float(radius)
                break
        return WitnessResult(kind, q, nsq, {"threshold": threshold, "R": R})
    raise ValueError(f"unknown witness kind {kind!r}")


# ---------------------------------------------------------------------------
# Height-function identities and condition (A)


@dataclass
class HeightIdentityResult:
    vn_defect: float
    lvbot_defect: float
    condition_a_sup: float

    def condition_a_holds(self, tol: float = 1e-8) -> bool:
        return self.condition_a_sup <= tol


def height_identities(item: CatalogImmersion, v, N: NormalField | None = None,
                      grid=None) -> HeightIdentityResult:
    """Check cal_Lt <v, N> = -<A_N, A_{v_perp}> + <A_N(v_tan), A_xi(x_tan)>
    and L(v_perp) = v_perp + h(A_xi(x_tan), v_tan) for a constant vector v,
    and report sup |h(A_xi(x_tan), v_tan)| (condition (A))."""
    imm = item.immersion
    xi = xi_data_for(item)
    if N is None:
        if not item.parallel_normal_basis:
            raise NoParallelFrame(f"{item.family} item has no parallel frame")
        N = item.parallel_normal_basis[0]
    if grid is None:
        grid = verification_grid(imm.box, 8)
    U = as_points(grid)
    jet = geometry_jet(imm, U, strict=False)
    vvec = np.broadcast_to(np.asarray(v, dtype=float), jet.x.shape)

    v_tan = np.einsum("nab,nb->na", jet.p_tan, vvec)
    v_nor = vvec - v_tan
    t_v = np.einsum("nij,na,naj->ni", jet.metric_inv, vvec, jet.jac)
    t_x = np.einsum("nij,na,naj->ni", jet.metric_inv, jet.x, jet.jac)

    A_N = weingarten_map(jet, N(U))
    A_xi = xi.weingarten(jet)
    ANv = np.einsum("nij,nj->ni", A_N, t_v)           # coords of A_N(v_tan)
    Axix = np.einsum("nij,nj->ni", A_xi, t_x)         # coords of A_xi(x_tan)

    # Height-function identity.
    sfield = ScalarField(lambda V: np.einsum("na,na->n", N(V),
                                             np.broadcast_to(np.asarray(v, float),
                                                             (V.shape[0], jet.x.shape[1]))))
    lhs = apply_scalar_operator(xi, sfield, U, mode="cal_Lt", jet=jet)
    pairing = shape_pairing(jet, N(U), v_nor)
    cross = np.einsum("nij,ni,nj->n", jet.metric, ANv, Axix)
    rhs = -pairing + cross
    vn_defect = float(np.abs(lhs - rhs).max() / max(1.0, np.abs(rhs).max()))

    # Normal-projection identity.
    vperp_field = NormalField(imm, lambda V: (
        lambda P: np.einsum("nab,b->na", P, np.asarray(v, float)))(normal_projector(imm, V)))
    Lv = apply_bundle_operator(xi, vperp_field, U, mode="L", jet=jet)
    h_term = np.einsum("naij,ni,nj->na", jet.h, Axix, t_v)
    rhs2 = v_nor + h_term
    lvbot_defect = float(np.abs(Lv - rhs2).max() / max(1.0, np.abs(rhs2).max()))

    cond_a = float(np.linalg.norm(h_term, axis=1).max())
    return HeightIdentityResult(vn_defect=vn_defect, lvbot_defect=lvbot_defect,
                                condition_a_sup=cond_a)

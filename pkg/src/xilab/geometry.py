"""Pointwise differential geometry of chart-parametrized immersions.

An immersion is a map x: D -> R^n, D a box in R^m, n = m + p. All maps are
batched: points have shape (N, m), positions (N, n), Jacobians (N, n, m) and
second derivatives (N, n, m, m). Exact derivative callbacks are used when
present; otherwise 4th-order central differences per the step policy.

Everything here is frame-free: normal projections come from a QR factorization
of the Jacobian, never from a chosen normal frame.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateMetric, NotNormal, OutOfDomain
from .numdiff import DiffPolicy, diff1, hessian_fd, jacobian_fd

RANK_TOL = 1e-10


def as_points(u) -> np.ndarray:
    """Coerce a single point or a batch to shape (N, m)."""
    U = np.asarray(u, dtype=float)
    if U.ndim == 1:
        U = U[None, :]
    if U.ndim != 2:
        raise ValueError(f"points must have shape (m,) or (N, m), got {U.shape}")
    return U


@dataclass(frozen=True)
class Box:
    """Axis-aligned chart domain with per-axis periodicity and collar.

    The collar shrinks *verification* grids away from chart edges where the
    metric degenerates (polar angles); quadrature grids use the full box since
    Gauss-Legendre nodes are interior.
    """

    lo: np.ndarray
    hi: np.ndarray
    periodic: np.ndarray
    collar: np.ndarray

    @classmethod
    def build(cls, lo, hi, periodic=None, collar=None) -> "Box":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        m = lo.size
        per = np.zeros(m, dtype=bool) if periodic is None else np.asarray(periodic, dtype=bool)
        col = np.zeros(m, dtype=float) if collar is None else np.asarray(collar, dtype=float)
        if not np.all(hi > lo):
            raise ValueError("box must have positive extent on every axis")
        return cls(lo=lo, hi=hi, periodic=per, collar=col)

    @property
    def dim(self) -> int:
        return self.lo.size

    def contains(self, U: np.ndarray, slack: float = 1e-9) -> np.ndarray:
        span = self.hi - self.lo
        ok = np.ones(U.shape[0], dtype=bool)
        for i in range(self.dim):
            if self.periodic[i]:
                continue
            s = slack * span[i]
            ok &= (U[:, i] >= self.lo[i] - s) & (U[:, i] <= self.hi[i] + s)
        return ok

    def verification_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.lo + self.collar, self.hi - self.collar


@dataclass
class ParametricImmersion:
    """A chart map u -> x(u) in R^{m+p} with optional exact jet callbacks."""

    dim: int
    codim: int
    box: Box
    position: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    diff: DiffPolicy = field(default_factory=DiffPolicy)
    name: str = ""

    @property
    def ambient_dim(self) -> int:
        return self.dim + self.codim

    def pos(self, u) -> np.ndarray:
        return np.asarray(self.position(as_points(u)), dtype=float)

    def jac(self, u) -> np.ndarray:
        U = as_points(u)
        if self.jacobian is not None:
            return np.asarray(self.jacobian(U), dtype=float)
        return jacobian_fd(self.position, U, self.diff)

    def hess(self, u) -> np.ndarray:
        U = as_points(u)
        if self.hessian is not None:
            return np.asarray(self.hessian(U), dtype=float)
        return hessian_fd(self.position, U, self.diff)

    def require_inside(self, U: np.ndarray) -> None:
        ok = self.box.contains(U)
        if not np.all(ok):
            bad = U[~ok][0]
            raise OutOfDomain(f"point {bad} outside chart box of {self.name or 'immersion'}")

    def check_periodicity(self, samples_per_axis: int = 7, tol: float = 1e-12) -> float:
        """Max mismatch of x between periodic-axis endpoints; raises nothing."""
        worst = 0.0
        for i in range(self.dim):
            if not self.box.periodic[i]:
                continue
            others = [np.linspace(self.box.lo[j], self.box.hi[j], samples_per_axis)
                      if j != i else np.array([self.box.lo[i]])
                      for j in range(self.dim)]
            mesh = np.meshgrid(*others, indexing="ij")
            U0 = np.stack([g.ravel() for g in mesh], axis=-1)
            U1 = U0.copy()
            U1[:, i] = self.box.hi[i]
            gap = np.abs(self.pos(U0) - self.pos(U1)).max()
            worst = max(worst, float(gap))
        return worst


@dataclass
class GeometryJet:
    """Pointwise geometric package at a batch of chart points.

    Index layout: positions (N, n); jac (N, n, m); d2 and second fundamental
    form h (N, n, m, m) with the ambient component first; metric quantities
    (N, m, m); Christoffels gamma[k, i, j] as (N, m, m, m).
    """

    u: np.ndarray
    x: np.ndarray
    jac: np.ndarray
    d2: np.ndarray
    metric: np.ndarray
    metric_inv: np.ndarray
    sqrt_det: np.ndarray
    gamma: np.ndarray
    h: np.ndarray
    H: np.ndarray
    x_tan: np.ndarray
    x_nor: np.ndarray
    p_tan: np.ndarray
    p_nor: np.ndarray

    @property
    def npoints(self) -> int:
        return self.u.shape[0]


def _metric_guard(g: np.ndarray, jac: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    # Scale-aware cutoff: det g against the product of squared column norms
    # (Hadamard bound), i.e. the squared volume of the normalized tangent
    # parallelepiped. Robust to legitimately anisotropic charts (polar axes).
    det = np.linalg.det(g)
    col2 = np.einsum("nai,nai->ni", jac, jac)
    cutoff = RANK_TOL * np.prod(col2, axis=1)
    if np.any(det <= cutoff):
        k = int(np.argmin(det - cutoff))
        raise DegenerateMetric(
            f"det g = {det[k]:.3e} at point index {k} below cutoff {cutoff[k]:.3e}")
    return det, cutoff


def normal_projector(imm: ParametricImmersion, u) -> np.ndarray:
    """Projector onto the normal space, I - QQ^T from a reduced QR of the Jacobian."""
    U = as_points(u)
    J = imm.jac(U)
    g = np.einsum("nai,naj->nij", J, J)
    _metric_guard(g, J, imm.dim)
    Q = np.linalg.qr(J)[0]
    n = imm.ambient_dim
    return np.eye(n)[None, :, :] - np.einsum("nak,nbk->nab", Q, Q)


def geometry_jet(imm: ParametricImmersion, u, strict: bool = True) -> GeometryJet:
    """Assemble the full pointwise package at u (single point or batch)."""
    U = as_points(u)
    if strict:
        imm.require_inside(U)
    x = imm.pos(U)
    J = imm.jac(U)
    d2 = imm.hess(U)

    g = np.einsum("nai,naj->nij", J, J)
    det, _ = _metric_guard(g, J, imm.dim)
    ginv = np.linalg.inv(g)
    sqrt_det = np.sqrt(det)

    Q = np.linalg.qr(J)[0]
    n = imm.ambient_dim
    p_tan = np.einsum("nak,nbk->nab", Q, Q)
    p_nor = np.eye(n)[None, :, :] - p_tan

    # Christoffels of the induced metric from the embedding.
    c = np.einsum("naij,nal->nlij", d2, J)
    gamma = np.einsum("nkl,nlij->nkij", ginv, c)

    # Second fundamental form as the normal part of the chart second derivatives.
    h = np.einsum("nab,nbij->naij", p_nor, d2)
    H = np.einsum("nij,naij->na", ginv, h)

    x_tan = np.einsum("nab,nb->na", p_tan, x)
    x_nor = x - x_tan

    return GeometryJet(u=U, x=x, jac=J, d2=d2, metric=g, metric_inv=ginv,
                       sqrt_det=sqrt_det, gamma=gamma, h=h, H=H,
                       x_tan=x_tan, x_nor=x_nor, p_tan=p_tan, p_nor=p_nor)


def weingarten_map(jet: GeometryJet, N, tol: float = 1e-6) -> np.ndarray:
    """Shape operator A_N with components g^{ik} <h_{kj}, N>; returns (N, m, m).

    N may be a single ambient vector or a batch matching the jet.
    """
    Nv = np.asarray(N, dtype=float)
    if Nv.ndim == 1:
        Nv = np.broadcast_to(Nv, jet.x.shape)
    tangential = np.einsum("nab,nb->na", jet.p_tan, Nv)
    scale = np.maximum(np.linalg.norm(Nv, axis=1), 1.0)
    worst = (np.linalg.norm(tangential, axis=1) / scale).max()
    if worst > tol:
        raise NotNormal(f"tangential part {worst:.3e} exceeds tolerance {tol:.1e}")
    hN = np.einsum("naij,na->nij", jet.h, Nv)
    return np.einsum("nik,nkj->nij", jet.metric_inv, hN)


@dataclass
class NormalField:
    """A section of the normal bundle given by a batched value map.

    `derivative` / `second_derivative`, when present, return exact chart
    derivatives (N, n, m) / (N, n, m, m); otherwise derivatives come from
    central differences of `value`.
    """

    immersion: ParametricImmersion
    value: Callable[[np.ndarray], np.ndarray]
    derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    second_derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    compact_support: bool = False
    parallel: bool = False
    name: str = ""

    def __call__(self, u) -> np.ndarray:
        return np.asarray(self.value(as_points(u)), dtype=float)

    def d(self, u) -> np.ndarray:
        U = as_points(u)
        if self.derivative is not None:
            return np.asarray(self.derivative(U), dtype=float)
        return jacobian_fd(self.value, U, self.immersion.diff)

    def dd(self, u) -> np.ndarray:
        U = as_points(u)
        if self.second_derivative is not None:
            return np.asarray(self.second_derivative(U), dtype=float)
        return hessian_fd(self.value, U, self.immersion.diff)

    def normality_defect(self, grid: np.ndarray) -> float:
        """sup over the grid of |tangential part| / max(1, |field|)."""
        P = normal_projector(self.immersion, grid)
        vals = self(grid)
        tang = vals - np.einsum("nab,nb->na", P, vals)
        scale = np.maximum(np.linalg.norm(vals, axis=1), 1.0)
        return float((np.linalg.norm(tang, axis=1) / scale).max())

    def parallel_defect(self, grid: np.ndarray) -> float:
        """sup of |D^perp field| over the grid and coordinate directions."""
        worst = 0.0
        for i in range(self.immersion.dim):
            D = normal_derivative(self, grid, i)
            worst = max(worst, float(np.linalg.norm(D, axis=1).max()))
        return worst


@dataclass
class ScalarField:
    """A scalar function on the chart with optional exact derivatives."""

    value: Callable[[np.ndarray], np.ndarray]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hess: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""

    def __call__(self, u) -> np.ndarray:
        U = as_points(u)
        out = np.asarray(self.value(U), dtype=float)
        return np.broadcast_to(out, (U.shape[0],)).astype(float, copy=False)

    def d(self, U: np.ndarray, policy: DiffPolicy) -> np.ndarray:
        if self.grad is not None:
            return np.asarray(self.grad(U), dtype=float)
        return jacobian_fd(lambda V: self(V), U, policy)

    def dd(self, U: np.ndarray, policy: DiffPolicy) -> np.ndarray:
        if self.hess is not None:
            return np.asarray(self.hess(U), dtype=float)
        return hessian_fd(lambda V: self(V), U, policy)


def constant_normal_field(imm: ParametricImmersion, vec, name: str = "") -> NormalField:
    v = np.asarray(vec, dtype=float)

    def val(U):
        return np.broadcast_to(v, (U.shape[0], v.size)).copy()

    def der(U):
        return np.zeros((U.shape[0], v.size, imm.dim))

    return NormalField(imm, val, der, parallel=True, name=name or "constant")


def normal_derivative(fld: NormalField, u, axis: int) -> np.ndarray:
    """Normal-connection derivative D^perp_axis of a normal field; (N, n)."""
    U = as_points(u)
    imm = fld.immersion
    P = normal_projector(imm, U)
    if fld.derivative is not None:
        dv = fld.d(U)[:, :, axis]
    else:
        h = imm.diff.step_first(U[:, axis])
        dv = diff1(fld.value, U, axis, h)
    return np.einsum("nab,nb->na", P, dv)


def covariant_normal_derivatives(fld: NormalField, u) -> np.ndarray:
    """All D^perp_i of a normal field at once; (N, n, m)."""
    U = as_points(u)
    P = normal_projector(fld.immersion, U)
    dv = fld.d(U)
    return np.einsum("nab,nbi->nai", P, dv)


def projector_derivatives(imm: ParametricImmersion, u) -> np.ndarray:
    """Chart derivatives of the normal projector by differencing; (N, n, n, m).

    The projector is smooth in the chart wherever the metric is nondegenerate,
    so the 4th-order stencil applies regardless of the field being studied.
    """
    U = as_points(u)

    def P(V):
        return normal_projector(imm, V)

    cols = []
    for i in range(imm.dim):
        h = imm.diff.step_first(U[:, i])
        cols.append(diff1(P, U, i, h))
    return np.stack(cols, axis=-1)


def bundle_laplacian(fld: NormalField, u, jet: GeometryJet | None = None,
                     dP: np.ndarray | None = None) -> np.ndarray:
    """Connection Laplacian on the normal bundle, trace of (D^perp)^2.

    Frame-free expansion D_i(zeta_j) = P (d_i P) d_j(field) + P d2_ij(field),
    with zeta_j = P d_j(field); only the smooth projector is differenced, so
    fields with exact derivative callbacks never enter a stencil.
    """
    U = as_points(u)
    imm = fld.immersion
    if jet is None:
        jet = geometry_jet(imm, U, strict=False)
    if dP is None:
        dP = projector_derivatives(imm, U)
    m = imm.dim

    dv = fld.d(U)            # (N, n, m)
    ddv = fld.dd(U)          # (N, n, m, m)
    zeta = np.einsum("nab,nbj->naj", jet.p_nor, dv)

    out = np.zeros_like(jet.x)
    for i in range(m):
        for j in range(m):
            dz = np.einsum("nab,nb->na", dP[..., i], dv[:, :, j])
            Dz = np.einsum("nab,nb->na", jet.p_nor, dz + ddv[:, :, i, j])
            corr = np.einsum("nk,nak->na", jet.gamma[:, :, i, j], zeta)
            out += jet.metric_inv[:, i, j, None] * (Dz - corr)
    return out


def laplace_beltrami(phi: ScalarField, imm: ParametricImmersion, u,
                     jet: GeometryJet | None = None) -> np.ndarray:
    """Scalar Laplacian g^{ij}(d_i d_j - Gamma^k_{ij} d_k) phi; returns (N,)."""
    U = as_points(u)
    if jet is None:
        jet = geometry_jet(imm, U, strict=False)
    grad = phi.d(U, imm.diff)
    hess = phi.dd(U, imm.diff)
    lead = np.einsum("nij,nij->n", jet.metric_inv, hess)
    gam = np.einsum("nij,nkij->nk", jet.metric_inv, jet.gamma)
    return lead - np.einsum("nk,nk->n", gam, grad)


def tangential_gradient_coords(phi: ScalarField, imm: ParametricImmersion, u,
                               jet: GeometryJet | None = None) -> np.ndarray:
    """Chart components g^{ij} d_j phi of the tangential gradient; (N, m)."""
    U = as_points(u)
    if jet is None:
        jet = geometry_jet(imm, U, strict=False)
    grad = phi.d(U, imm.diff)
    return np.einsum("nij,nj->ni", jet.metric_inv, grad)


def directional_normal_derivative(fld: NormalField, u, coords: np.ndarray) -> np.ndarray:
    """D^perp_X field for a tangent vector X given by chart components (N, m)."""
    U = as_points(u)
    Dall = covariant_normal_derivatives(fld, U)
    return np.einsum("nai,ni->na", Dall, coords)


def rotate_immersion(imm: ParametricImmersion, R: np.ndarray,
                     name: str = "") -> ParametricImmersion:
    """Compose an immersion with an ambient rotation (or any linear map)."""
    R = np.asarray(R, dtype=float)

    def pos(U):
        return imm.pos(U) @ R.T

    jac = None if imm.jacobian is None else (lambda U: np.einsum("ab,nbi->nai", R, imm.jac(U)))
    hes = None if imm.hessian is None else (lambda U: np.einsum("ab,nbij->naij", R, imm.hess(U)))
    return ParametricImmersion(dim=imm.dim, codim=imm.codim, box=imm.box,
                               position=pos, jacobian=jac, hessian=hes,
                               diff=imm.diff, name=name or f"rotated({imm.name})")

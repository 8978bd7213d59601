"""Tensor Gauss-Legendre quadrature and verification grids on chart boxes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFinite
from .geometry import Box, GeometryJet, ParametricImmersion, geometry_jet

DEFAULT_NODES = 24
MAX_NODES = 96


def _axis_rule(lo: float, hi: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


@dataclass
class QuadratureGrid:
    """Tensor-product Gauss-Legendre nodes and weights on a box."""

    points: np.ndarray   # (N, m)
    weights: np.ndarray  # (N,)
    nodes_per_axis: tuple[int, ...]
    box: Box

    @classmethod
    def build(cls, box: Box, nodes_per_axis) -> "QuadratureGrid":
        m = box.dim
        if np.isscalar(nodes_per_axis):
            counts = (int(nodes_per_axis),) * m
        else:
            counts = tuple(int(k) for k in nodes_per_axis)
        axes, wts = [], []
        for i in range(m):
            x, w = _axis_rule(box.lo[i], box.hi[i], counts[i])
            axes.append(x)
            wts.append(w)
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=-1)
        wmesh = np.meshgrid(*wts, indexing="ij")
        weights = np.ones(pts.shape[0])
        for g in wmesh:
            weights = weights * g.ravel()
        return cls(points=pts, weights=weights, nodes_per_axis=counts, box=box)

    @property
    def npoints(self) -> int:
        return self.points.shape[0]

    def refined(self) -> "QuadratureGrid":
        counts = tuple(min(2 * k, MAX_NODES) for k in self.nodes_per_axis)
        return QuadratureGrid.build(self.box, counts)


def verification_grid(box: Box, nodes_per_axis=DEFAULT_NODES) -> np.ndarray:
    """Gauss-Legendre nodes on the collar-shrunk box (points only)."""
    lo, hi = box.lo + box.collar, box.hi - box.collar
    inner = Box.build(lo, hi, periodic=box.periodic)
    return QuadratureGrid.build(inner, nodes_per_axis).points


@dataclass
class MeasuredGrid:
    """A quadrature grid with the induced measure and jets precomputed."""

    grid: QuadratureGrid
    jet: GeometryJet

    @property
    def points(self) -> np.ndarray:
        return self.grid.points

    @property
    def measure(self) -> np.ndarray:
        return self.grid.weights * self.jet.sqrt_det

    def integrate(self, values: np.ndarray) -> float:
        total = float(np.sum(self.measure * np.asarray(values, dtype=float)))
        if not np.isfinite(total):
            raise NonFinite("quadrature sum is not finite")
        return total


def measured_grid(imm: ParametricImmersion, nodes_per_axis=DEFAULT_NODES) -> MeasuredGrid:
    grid = QuadratureGrid.build(imm.box, nodes_per_axis)
    jet = geometry_jet(imm, grid.points, strict=False)
    return MeasuredGrid(grid=grid, jet=jet)


def integrate_scalar(imm: ParametricImmersion, values_fn,
                     nodes_per_axis=DEFAULT_NODES, refine: bool = True,
                     rel_tol: float = 1e-10) -> tuple[float, MeasuredGrid]:
    """Integrate a pointwise map over the immersion, doubling nodes until the
    value settles to rel_tol or the per-axis cap is reached."""
    mg = measured_grid(imm, nodes_per_axis)
    val = mg.integrate(values_fn(mg))
    if not refine:
        return val, mg
    while any(k < MAX_NODES for k in mg.grid.nodes_per_axis):
        nxt_grid = mg.grid.refined()
        jet = geometry_jet(imm, nxt_grid.points, strict=False)
        nxt = MeasuredGrid(grid=nxt_grid, jet=jet)
        nval = nxt.integrate(values_fn(nxt))
        converged = abs(nval - val) <= rel_tol * max(abs(nval), 1e-300)
        val, mg = nval, nxt
        if converged:
            break
    return val, mg

"""Build immersions with exact jet callbacks from symbolic chart expressions."""
from __future__ import annotations

from typing import Sequence

import numpy as np
import sympy as sp

from .geometry import Box, ParametricImmersion


def _lambdify_scalar(expr, syms):
    fn = sp.lambdify(syms, expr, modules="numpy")

    def call(U: np.ndarray) -> np.ndarray:
        out = fn(*(U[:, k] for k in range(len(syms))))
        return np.broadcast_to(np.asarray(out, dtype=float), (U.shape[0],))

    return call


def _lambdify_stack(exprs, syms, shape):
    """Lambdify a flat list of scalar expressions into one (N, *shape) map."""
    fns = [_lambdify_scalar(e, syms) for e in exprs]

    def call(U: np.ndarray) -> np.ndarray:
        cols = [f(U) for f in fns]
        return np.stack(cols, axis=-1).reshape((U.shape[0],) + shape)

    return call


def immersion_from_exprs(exprs: Sequence, syms: Sequence, box: Box,
                         name: str = "") -> ParametricImmersion:
    """Immersion whose position/Jacobian/Hessian callbacks are generated
    symbolically, hence exact to rounding."""
    exprs = [sp.sympify(e) for e in exprs]
    n = len(exprs)
    m = len(syms)
    if box.dim != m:
        raise ValueError("box dimension does not match symbol count")

    pos = _lambdify_stack(exprs, syms, (n,))
    jac_exprs = [sp.diff(e, s) for e in exprs for s in syms]
    jac = _lambdify_stack(jac_exprs, syms, (n, m))
    hes_exprs = [sp.diff(e, si, sj) for e in exprs for si in syms for sj in syms]
    hes = _lambdify_stack(hes_exprs, syms, (n, m, m))

    return ParametricImmersion(dim=m, codim=n - m, box=box, position=pos,
                               jacobian=jac, hessian=hes, name=name)


def vector_field_from_exprs(exprs: Sequence, syms: Sequence):
    """(value, derivative) callbacks for an ambient-vector field on a chart."""
    exprs = [sp.sympify(e) for e in exprs]
    n = len(exprs)
    m = len(syms)
    val = _lambdify_stack(exprs, syms, (n,))
    der = _lambdify_stack([sp.diff(e, s) for e in exprs for s in syms], syms, (n, m))
    return val, der

"""Probabilists' Hermite polynomials and the drift-Laplacian eigenbasis.

Recurrence-built: He_0 = 1, He_1 = u, He_{n+1} = u He_n - n He_{n-1}; products
over axes give the multi-index family on R^m. They diagonalize the
Ornstein-Uhlenbeck operator -Delta + grad_u with eigenvalue |index| and are
orthogonal in L^2 with weight e^{-|u|^2/2}.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

from .errors import DegreeTooLarge

MAX_DEGREE = 30


def hermite_1d(n: int, t: np.ndarray) -> np.ndarray:
    """He_n at the sample points, by the three-term recurrence."""
    if n < 0:
        raise ValueError("degree must be non-negative")
    if n > MAX_DEGREE:
        raise DegreeTooLarge(f"degree {n} beyond guard {MAX_DEGREE}")
    t = np.asarray(t, dtype=float)
    prev = np.ones_like(t)
    if n == 0:
        return prev
    cur = t.copy()
    for k in range(1, n):
        prev, cur = cur, t * cur - k * prev
    return cur


def hermite_1d_derivative(n: int, t: np.ndarray, order: int = 1) -> np.ndarray:
    """Derivatives via He_n' = n He_{n-1} applied `order` times."""
    coeff = 1.0
    k = n
    for _ in range(order):
        coeff *= k
        k -= 1
        if k < 0:
            return np.zeros_like(np.asarray(t, dtype=float))
    return coeff * hermite_1d(k, t)


@dataclass(frozen=True)
class HermiteIndex:
    """Multi-index (n_1, ..., n_m) of the product polynomial."""

    orders: tuple[int, ...]

    def __post_init__(self):
        if any(k < 0 for k in self.orders):
            raise ValueError("multi-index entries must be non-negative")
        if self.degree > MAX_DEGREE:
            raise DegreeTooLarge(f"total degree {self.degree} beyond {MAX_DEGREE}")

    @property
    def degree(self) -> int:
        return sum(self.orders)

    @property
    def dim(self) -> int:
        return len(self.orders)


def hermite_eval(idx: HermiteIndex, U: np.ndarray) -> np.ndarray:
    U = np.atleast_2d(np.asarray(U, dtype=float))
    out = np.ones(U.shape[0])
    for k, n in enumerate(idx.orders):
        out = out * hermite_1d(n, U[:, k])
    return out


def hermite_gradient(idx: HermiteIndex, U: np.ndarray) -> np.ndarray:
    U = np.atleast_2d(np.asarray(U, dtype=float))
    m = idx.dim
    cols = []
    for i in range(m):
        col = hermite_1d_derivative(idx.orders[i], U[:, i])
        for k, n in enumerate(idx.orders):
            if k != i:
                col = col * hermite_1d(n, U[:, k])
        cols.append(col)
    return np.stack(cols, axis=-1)


def hermite_hessian(idx: HermiteIndex, U: np.ndarray) -> np.ndarray:
    U = np.atleast_2d(np.asarray(U, dtype=float))
    m = idx.dim
    out = np.empty((U.shape[0], m, m))
    for i in range(m):
        for j in range(i, m):
            if i == j:
                col = hermite_1d_derivative(idx.orders[i], U[:, i], order=2)
                rest = [k for k in range(m) if k != i]
            else:
                col = (hermite_1d_derivative(idx.orders[i], U[:, i])
                       * hermite_1d_derivative(idx.orders[j], U[:, j]))
                rest = [k for k in range(m) if k not in (i, j)]
            for k in rest:
                col = col * hermite_1d(idx.orders[k], U[:, k])
            out[:, i, j] = col
            out[:, j, i] = col
    return out


def multi_indices(m: int, max_degree: int) -> list[HermiteIndex]:
    """All multi-indices on R^m with total degree <= max_degree, ordered by
    degree then lexicographically (deterministic)."""
    found = []
    for total in range(max_degree + 1):
        for combo in combinations_with_replacement(range(m), total):
            orders = [0] * m
            for axis in combo:
                orders[axis] += 1
            found.append(HermiteIndex(tuple(orders)))
    # combinations_with_replacement already yields a canonical order per degree
    return found


def ou_eigen_defect(idx: HermiteIndex, U: np.ndarray) -> float:
    """sup |(-Delta + u . grad) He - |idx| He| / max(1, sup |He|) on the grid."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    vals = hermite_eval(idx, U)
    grad = hermite_gradient(idx, U)
    lap = np.trace(hermite_hessian(idx, U), axis1=1, axis2=2)
    lhs = -lap + np.einsum("ni,ni->n", U, grad)
    defect = np.abs(lhs - idx.degree * vals).max()
    return float(defect / max(1.0, np.abs(vals).max()))


def gauss_weight(U: np.ndarray) -> np.ndarray:
    U = np.atleast_2d(np.asarray(U, dtype=float))
    return np.exp(-0.5 * np.einsum("ni,ni->n", U, U))

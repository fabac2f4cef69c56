"""Lagrange triangle basis and quadrature shared by assembly and postprocessing.

P1 uses the 3-point midpoint rule (degree 2), P2 the 6-point rule
(degree 4). Per-mesh tabulated data is cached weakly so repeated
assemblies reuse geometry factors.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field

import numpy as np

# barycentric quadrature rules: (points (nq, 3), weights (nq,) summing to 1)
TRI_RULE_DEG2 = (
    np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
    np.array([1.0, 1.0, 1.0]) / 3.0,
)

_a1, _b1 = 0.445948490915965, 0.108103018168070
_a2, _b2 = 0.091576213509771, 0.816847572980459
TRI_RULE_DEG4 = (
    np.array([
        [_a1, _a1, _b1], [_a1, _b1, _a1], [_b1, _a1, _a1],
        [_a2, _a2, _b2], [_a2, _b2, _a2], [_b2, _a2, _a2],
    ]),
    np.array([0.223381589678011] * 3 + [0.109951743655322] * 3),
)

GAUSS_1D_1 = (np.array([0.0]), np.array([2.0]))
GAUSS_1D_2 = (np.array([-1.0, 1.0]) / np.sqrt(3.0), np.array([1.0, 1.0]))


def tri_shape(order: int, lam: np.ndarray) -> np.ndarray:
    """Shape values at barycentric points lam (nq, 3) -> (nq, nen)."""
    l1, l2, l3 = lam[:, 0], lam[:, 1], lam[:, 2]
    if order == 1:
        return np.column_stack([l1, l2, l3])
    return np.column_stack([
        l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), l3 * (2 * l3 - 1),
        4 * l1 * l2, 4 * l2 * l3, 4 * l3 * l1,
    ])


def edge_shape(order: int, xi: np.ndarray):
    """Edge shape values and d/dxi on [-1, 1]; nodes (a, b[, mid])."""
    if order == 1:
        N = np.column_stack([0.5 * (1 - xi), 0.5 * (1 + xi)])
        dN = np.column_stack([-0.5 * np.ones_like(xi), 0.5 * np.ones_like(xi)])
    else:
        N = np.column_stack([0.5 * xi * (xi - 1), 0.5 * xi * (xi + 1), 1 - xi**2])
        dN = np.column_stack([xi - 0.5, xi + 0.5, -2 * xi])
    return N, dN


@dataclass(eq=False)
class ElementBasis:
    """Tabulated per-mesh basis data at the volume quadrature points."""

    order: int
    areas: np.ndarray  # (T,)
    qp_weights: np.ndarray  # (nq,)
    qp_N: np.ndarray  # (nq, nen)
    qp_gradN: np.ndarray = field(repr=False)  # (nq, T, nen, 2)
    qp_xy: np.ndarray = field(repr=False)  # (nq, T, 2)

    @property
    def nen(self) -> int:
        return self.qp_N.shape[1]


def _grad_lambda(corners: np.ndarray, areas: np.ndarray) -> np.ndarray:
    """Barycentric gradients per triangle -> (T, 3, 2)."""
    x, y = corners[..., 0], corners[..., 1]
    g = np.empty(corners.shape)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        g[:, i, 0] = y[:, j] - y[:, k]
        g[:, i, 1] = x[:, k] - x[:, j]
    return g / (2.0 * areas)[:, None, None]


def grad_shape(order: int, lam_point, glam: np.ndarray) -> np.ndarray:
    """Shape gradients at one barycentric point -> (T, nen, 2)."""
    if order == 1:
        return glam
    l1, l2, l3 = lam_point
    out = np.empty((glam.shape[0], 6, 2))
    out[:, 0] = (4 * l1 - 1) * glam[:, 0]
    out[:, 1] = (4 * l2 - 1) * glam[:, 1]
    out[:, 2] = (4 * l3 - 1) * glam[:, 2]
    out[:, 3] = 4 * (l1 * glam[:, 1] + l2 * glam[:, 0])
    out[:, 4] = 4 * (l2 * glam[:, 2] + l3 * glam[:, 1])
    out[:, 5] = 4 * (l3 * glam[:, 0] + l1 * glam[:, 2])
    return out


def build_basis(mesh) -> ElementBasis:
    corners = mesh.nodes[mesh.triangles[:, :3]]
    signed = 0.5 * (
        (corners[:, 1, 0] - corners[:, 0, 0]) * (corners[:, 2, 1] - corners[:, 0, 1])
        - (corners[:, 2, 0] - corners[:, 0, 0]) * (corners[:, 1, 1] - corners[:, 0, 1])
    )
    if np.any(signed <= 0):
        raise ValueError("triangles must be CCW with positive area")
    areas = signed
    glam = _grad_lambda(corners, areas)

    lam, w = TRI_RULE_DEG2 if mesh.element_order == 1 else TRI_RULE_DEG4
    nq = len(w)
    N = tri_shape(mesh.element_order, lam)
    T = len(mesh.triangles)
    nen = N.shape[1]
    gradN = np.empty((nq, T, nen, 2))
    xy = np.empty((nq, T, 2))
    for q in range(nq):
        gradN[q] = grad_shape(mesh.element_order, lam[q], glam)
        xy[q] = np.einsum("tic,i->tc", corners, lam[q])
    return ElementBasis(
        order=mesh.element_order, areas=areas, qp_weights=w,
        qp_N=N, qp_gradN=gradN, qp_xy=xy,
    )


_BASIS_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def basis_for(mesh) -> ElementBasis:
    basis = _BASIS_CACHE.get(mesh)
    if basis is None:
        basis = build_basis(mesh)
        _BASIS_CACHE[mesh] = basis
    return basis


def integrate(mesh, nodal_values: np.ndarray) -> float:
    """Quadrature of a finite element field over the domain."""
    basis = basis_for(mesh)
    vals_e = nodal_values[mesh.triangles]
    total = 0.0
    for q in range(len(basis.qp_weights)):
        total += basis.qp_weights[q] * np.sum(basis.areas * (vals_e @ basis.qp_N[q]))
    return float(total)

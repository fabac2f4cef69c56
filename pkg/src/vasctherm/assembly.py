"""Residual and analytic Jacobian of the coupled heat balance.

The nodal residual collects, per test function w_i:

    R_i = int_Omega d k_s(theta) grad w_i . grad theta
        + int_Omega h_T w_i (theta - theta_amb)
        + int_Omega eps sigma w_i (theta^4 - theta_amb^4)
        + int_Sigma chi w_i grad theta . t_hat
        - int_Omega w_i f
        + int_Gq w_i q_p
        [+ int_Omega d rho_s c_s(theta) w_i theta_dot   in transient assembly]

with material properties evaluated at quadrature-point temperatures. The
Jacobian is the exact linearization, including the k_s' and c_s' terms
from the temperature dependence. Dirichlet constraints (boundary
temperatures plus the channel inlet) are realized by identity rows with
the columns folded into the residual, which preserves a symmetric
sparsity pattern.

The prescribed boundary flux q_p is stored already premultiplied by the
thickness d (units W/m of boundary length), so no thickness factor is
applied here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .elements import GAUSS_1D_1, GAUSS_1D_2, basis_for, edge_shape
from .materials import Coolant, SolidMaterial, curve_derivative, eval_curve, heat_capacity_rate
from .mesh import ChannelMesh

STEFAN_BOLTZMANN = 5.67e-8  # W/(m^2 K^4)


class EllipticityError(ValueError):
    """k_s evaluated non-positive at a quadrature point."""


@dataclass(frozen=True)
class SurfaceExchange:
    """Top-surface convection/radiation data and the ambient temperature."""

    h_T: float = 21.0  # W/(m^2 K)
    emissivity: float = 0.97
    theta_amb: float = 296.42  # K
    sigma: float = STEFAN_BOLTZMANN

    def __post_init__(self):
        if self.theta_amb <= 0:
            raise ValueError("ambient temperature must be positive (kelvin)")
        if self.h_T < 0:
            raise ValueError("heat transfer coefficient must be non-negative")
        if not 0.0 <= self.emissivity <= 1.0:
            raise ValueError("emissivity must lie in [0, 1]")


@dataclass(frozen=True)
class BoundaryData:
    """Inlet temperature, Dirichlet trace theta_p, and boundary flux q_p.

    theta_p and q_p accept constants or callables; q_p(x, y, t) is the
    d-premultiplied outward flux in W/m.
    """

    theta_inlet: float = 296.42  # K
    theta_p: object = None  # K, required when dirichlet edges exist
    q_p: object = 0.0  # W/m


@dataclass(frozen=True)
class TermMask:
    """Toggles for individual residual terms (testing/diagnostics).

    property_derivatives=False drops the k_s'/c_s' Jacobian blocks, which
    deliberately breaks Newton consistency for mutation checks.
    """

    conduction: bool = True
    convection: bool = True
    radiation: bool = True
    channel: bool = True
    mass: bool = True
    property_derivatives: bool = True


ALL_TERMS = TermMask()


@dataclass(frozen=True)
class RateWeights:
    """BDF rate representation: theta_dot = coeff * theta + rhs."""

    coeff: float
    rhs: np.ndarray = field(repr=False)


@dataclass(eq=False)
class TemperatureField:
    """Nodal temperatures (K) aligned with mesh nodes at one instant."""

    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("temperature field holds non-finite values")

    @property
    def kelvin_positive(self) -> bool:
        return bool(np.all(self.values > 0.0))


@dataclass(eq=False)
class ThermalProblem:
    """Full scenario: mesh, materials, coolant, loads, BCs, initial state."""

    mesh: ChannelMesh
    solid: SolidMaterial
    coolant: Coolant
    load: object = 1000.0  # W/m^2, constant or callable(x, y, t)
    surface: SurfaceExchange = SurfaceExchange()
    bcs: BoundaryData = BoundaryData()
    theta_initial: object = None  # K, defaults to ambient
    conductivity_scale: np.ndarray | None = None  # per-triangle multiplier

    def __post_init__(self):
        if self.conductivity_scale is not None:
            self.conductivity_scale = np.asarray(self.conductivity_scale, dtype=float)
            if self.conductivity_scale.shape != (len(self.mesh.triangles),):
                raise ValueError("conductivity_scale must hold one factor per triangle")
        if np.isscalar(self.load) and not np.isfinite(self.load):
            raise ValueError("load must be finite")
        if np.isscalar(self.bcs.q_p) and not np.isfinite(self.bcs.q_p):
            raise ValueError("q_p must be finite")

    @property
    def chi(self) -> float:
        return heat_capacity_rate(self.coolant)

    @property
    def n_dofs(self) -> int:
        return self.mesh.n_nodes

    def load_at(self, x, y, t):
        if callable(self.load):
            return np.broadcast_to(self.load(x, y, t), np.shape(x)).astype(float)
        return np.full(np.shape(x), float(self.load))

    def qp_at(self, x, y, t):
        if callable(self.bcs.q_p):
            return np.broadcast_to(self.bcs.q_p(x, y, t), np.shape(x)).astype(float)
        return np.full(np.shape(x), float(self.bcs.q_p))

    def initial_field(self) -> TemperatureField:
        if self.theta_initial is None:
            vals = np.full(self.mesh.n_nodes, self.surface.theta_amb)
        elif callable(self.theta_initial):
            vals = np.asarray(
                self.theta_initial(self.mesh.nodes[:, 0], self.mesh.nodes[:, 1]), dtype=float
            )
            vals = np.broadcast_to(vals, (self.mesh.n_nodes,)).copy()
        else:
            vals = np.full(self.mesh.n_nodes, float(self.theta_initial))
        return TemperatureField(vals, time=0.0)

    def constrained_values(self) -> dict[int, float]:
        """node id -> prescribed temperature (inlet plus Dirichlet trace).

        The inlet value is enforced only while coolant actually flows
        (chi > 0); with the flow off there is no fluid entering whose
        temperature could be prescribed, and the zero-flow limit must not
        depend on the nominal flow direction.
        """
        out: dict[int, float] = {}
        mesh = self.mesh
        dirichlet = mesh.dirichlet_nodes()
        if dirichlet.size:
            if self.bcs.theta_p is None:
                raise ValueError("mesh has dirichlet edges but bcs.theta_p is unset")
            if callable(self.bcs.theta_p):
                vals = self.bcs.theta_p(mesh.nodes[dirichlet, 0], mesh.nodes[dirichlet, 1])
                vals = np.broadcast_to(vals, dirichlet.shape)
            else:
                vals = np.full(dirichlet.shape, float(self.bcs.theta_p))
            out.update({int(n): float(v) for n, v in zip(dirichlet, vals)})
        if mesh.has_channel and self.chi > 0.0:
            inlet = int(mesh.inlet_node)
            if inlet in out and abs(out[inlet] - self.bcs.theta_inlet) > 1e-9:
                raise ValueError(
                    f"conflicting prescriptions at inlet node {inlet}: "
                    f"theta_p={out[inlet]} vs theta_inlet={self.bcs.theta_inlet}"
                )
            out[inlet] = float(self.bcs.theta_inlet)
        return out


@dataclass(eq=False)
class DiscreteSystem:
    """Assembled residual/Jacobian pair at a given state."""

    residual: np.ndarray
    jacobian: sp.csr_matrix
    constrained_dofs: dict[int, float]
    theta: np.ndarray = field(repr=False)
    constrained: bool = False

    @property
    def n(self) -> int:
        return self.residual.shape[0]


def channel_line_term(mesh: ChannelMesh, theta: np.ndarray, chi: float):
    """Per-edge channel contributions chi * w * (grad theta . t_hat).

    Returns (nodes, residual, jacobian) with shapes (E, k), (E, k) and
    (E, k, k), where k is 2 for linear and 3 for quadratic edges. The
    one-point (P1) / two-point (P2) Gauss rules integrate the edge terms.
    """
    if not mesh.has_channel:
        empty = np.empty((0, 2))
        return np.empty((0, 2), dtype=int), empty, np.empty((0, 2, 2))
    ell = mesh.channel_lengths
    if np.any(ell <= 0):
        raise ValueError("channel chain holds a zero-length edge")
    a = mesh.channel_nodes[:-1]
    b = mesh.channel_nodes[1:]
    if mesh.element_order == 1:
        nodes = np.column_stack([a, b])
        xi, wgt = GAUSS_1D_1
    else:
        nodes = np.column_stack([a, b, mesh.channel_mids])
        xi, wgt = GAUSS_1D_2
    theta_e = theta[nodes]  # (E, k)
    E, k = nodes.shape
    res = np.zeros((E, k))
    jac = np.zeros((E, k, k))
    for g in range(len(xi)):
        N, dNdxi = edge_shape(mesh.element_order, xi[g:g + 1])
        N, dNdxi = N[0], dNdxi[0]
        dNds = (2.0 / ell)[:, None] * dNdxi  # (E, k)
        dthds = np.einsum("ek,ek->e", dNds, theta_e)
        scale = chi * wgt[g] * 0.5 * ell  # d(Gamma) = (ell/2) d(xi)
        res += (scale * dthds)[:, None] * N
        jac += scale[:, None, None] * np.einsum("i,ek->eik", N, dNds)
    return nodes, res, jac


def _scatter(n, rows, cols, vals) -> sp.csr_matrix:
    m = sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n))
    return m.tocsr()


def assemble_raw(
    problem: ThermalProblem,
    theta: np.ndarray,
    time: float = 0.0,
    rate: RateWeights | None = None,
    terms: TermMask = ALL_TERMS,
) -> DiscreteSystem:
    """Assemble residual and Jacobian without constraint rows."""
    mesh = problem.mesh
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (mesh.n_nodes,):
        raise ValueError(f"theta must have shape ({mesh.n_nodes},)")
    basis = basis_for(mesh)
    tri = mesh.triangles
    d = mesh.domain.thickness
    surf = problem.surface
    nen = basis.nen

    theta_e = theta[tri]  # (T, nen)
    if rate is not None and terms.mass:
        thdot = rate.coeff * theta + rate.rhs
        thdot_e = thdot[tri]
    R_e = np.zeros_like(theta_e)
    J_e = np.zeros((len(tri), nen, nen))
    kscale = problem.conductivity_scale

    for q in range(len(basis.qp_weights)):
        N = basis.qp_N[q]
        G = basis.qp_gradN[q]
        w = basis.qp_weights[q] * basis.areas  # (T,)
        th_q = theta_e @ N
        NN = np.outer(N, N)

        if terms.conduction:
            k_q = eval_curve(problem.solid.conductivity, th_q)
            if kscale is not None:
                k_q = k_q * kscale
            if np.any(k_q <= 0.0):
                raise EllipticityError(
                    "conductivity non-positive at a quadrature point "
                    f"(min {float(np.min(k_q)):.4g} W/(m*K))"
                )
            grad_q = np.einsum("tnc,tn->tc", G, theta_e)
            gw = np.einsum("tnc,tc->tn", G, grad_q)  # grad N_i . grad theta
            R_e += (w * d * k_q)[:, None] * gw
            J_e += (w * d * k_q)[:, None, None] * np.einsum("tic,tjc->tij", G, G)
            if terms.property_derivatives:
                kp_q = curve_derivative(problem.solid.conductivity, th_q)
                if kscale is not None:
                    kp_q = kp_q * kscale
                J_e += (w * d * kp_q)[:, None, None] * np.einsum("ti,j->tij", gw, N)

        if terms.convection and surf.h_T != 0.0:
            R_e += (w * surf.h_T * (th_q - surf.theta_amb))[:, None] * N
            J_e += np.einsum("t,ij->tij", w * surf.h_T, NN)

        if terms.radiation and surf.emissivity != 0.0:
            es = surf.emissivity * surf.sigma
            R_e += (w * es * (th_q**4 - surf.theta_amb**4))[:, None] * N
            J_e += np.einsum("t,ij->tij", w * es * 4.0 * th_q**3, NN)

        f_q = problem.load_at(basis.qp_xy[q, :, 0], basis.qp_xy[q, :, 1], time)
        R_e -= (w * f_q)[:, None] * N

        if rate is not None and terms.mass:
            c_q = eval_curve(problem.solid.specific_heat, th_q)
            thdot_q = thdot_e @ N
            coef = w * d * problem.solid.density
            R_e += (coef * c_q * thdot_q)[:, None] * N
            J_e += np.einsum("t,ij->tij", coef * c_q * rate.coeff, NN)
            if terms.property_derivatives:
                cp_q = curve_derivative(problem.solid.specific_heat, th_q)
                J_e += np.einsum("t,ij->tij", coef * cp_q * thdot_q, NN)

    R = np.bincount(tri.ravel(), weights=R_e.ravel(), minlength=mesh.n_nodes)
    rows = np.repeat(tri, nen, axis=1)
    cols = np.tile(tri, (1, nen))
    J = _scatter(mesh.n_nodes, rows, cols, J_e)

    chi = problem.chi
    if terms.channel and mesh.has_channel and chi != 0.0:
        cn, cres, cjac = channel_line_term(mesh, theta, chi)
        R += np.bincount(cn.ravel(), weights=cres.ravel(), minlength=mesh.n_nodes)
        k = cn.shape[1]
        J = J + _scatter(
            mesh.n_nodes,
            np.repeat(cn, k, axis=1),
            np.tile(cn, (1, k)),
            cjac,
        )

    R += _neumann_flux_vector(problem, time)

    return DiscreteSystem(
        residual=R, jacobian=J, constrained_dofs=problem.constrained_values(),
        theta=theta.copy(), constrained=False,
    )


def _neumann_flux_vector(problem: ThermalProblem, time: float) -> np.ndarray:
    """int_Gq w_i q_p dGamma; zero fast path for the adiabatic default."""
    mesh = problem.mesh
    out = np.zeros(mesh.n_nodes)
    if np.isscalar(problem.bcs.q_p) and float(problem.bcs.q_p) == 0.0:
        return out
    sel = mesh.boundary_tags == "neumann"
    if not np.any(sel):
        return out
    edges = mesh.boundary_edges[sel]
    pa, pb = mesh.nodes[edges[:, 0]], mesh.nodes[edges[:, 1]]
    ell = np.linalg.norm(pb - pa, axis=1)
    xi, wgt = GAUSS_1D_2
    Nmat, _ = edge_shape(mesh.element_order, xi)
    for g in range(len(xi)):
        frac = 0.5 * (1.0 + xi[g])
        xg = pa[:, 0] + frac * (pb[:, 0] - pa[:, 0])
        yg = pa[:, 1] + frac * (pb[:, 1] - pa[:, 1])
        qv = problem.qp_at(xg, yg, time)
        scale = wgt[g] * 0.5 * ell * qv
        for k in range(edges.shape[1]):
            np.add.at(out, edges[:, k], scale * Nmat[g, k])
    return out


def apply_constraints(system: DiscreteSystem, constraints: dict[int, float] | None = None) -> DiscreteSystem:
    """Replace constrained rows by theta_i - prescribed; fold columns into R.

    Folding keeps the sparsity pattern symmetric and, once the iterate
    satisfies the constraints, leaves the Jacobian an exact derivative of
    the constrained residual.
    """
    if constraints is None:
        constraints = system.constrained_dofs
    n = system.n
    if not constraints:
        return DiscreteSystem(
            residual=system.residual.copy(), jacobian=system.jacobian.copy(),
            constrained_dofs={}, theta=system.theta, constrained=True,
        )
    ids = np.fromiter(constraints.keys(), dtype=int)
    vals = np.fromiter((constraints[int(i)] for i in ids), dtype=float)
    mask = np.zeros(n, dtype=bool)
    mask[ids] = True
    rc = np.zeros(n)
    rc[ids] = system.theta[ids] - vals

    R = system.residual - system.jacobian @ rc
    R[ids] = rc[ids]
    keep = sp.diags(np.where(mask, 0.0, 1.0))
    J = keep @ system.jacobian @ keep + sp.diags(mask.astype(float))
    return DiscreteSystem(
        residual=R, jacobian=J.tocsr(), constrained_dofs=dict(constraints),
        theta=system.theta, constrained=True,
    )


def assemble_steady(
    problem: ThermalProblem,
    theta: np.ndarray,
    time: float = 0.0,
    terms: TermMask = ALL_TERMS,
    constrained: bool = True,
) -> DiscreteSystem:
    """Steady residual/Jacobian at state theta (constraint rows applied)."""
    system = assemble_raw(problem, theta, time=time, rate=None, terms=terms)
    return apply_constraints(system) if constrained else system


def assemble_transient(
    problem: ThermalProblem,
    theta: np.ndarray,
    rate: RateWeights,
    time: float = 0.0,
    terms: TermMask = ALL_TERMS,
    constrained: bool = True,
) -> DiscreteSystem:
    """Transient residual/Jacobian with the BDF mass term included."""
    system = assemble_raw(problem, theta, time=time, rate=rate, terms=terms)
    return apply_constraints(system) if constrained else system


def dump_system(system: DiscreteSystem, path_prefix: str) -> tuple[str, str]:
    """Write residual and Jacobian in matrix-market text format."""
    from scipy.io import mmwrite

    rpath, jpath = f"{path_prefix}_residual.mtx", f"{path_prefix}_jacobian.mtx"
    mmwrite(rpath, system.residual[:, None])
    mmwrite(jpath, system.jacobian)
    return rpath, jpath

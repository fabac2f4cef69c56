"""Observables and qualitative checks on solved temperature fields.

Mean surface temperature, outlet temperature, thermal efficiency, the
arc-length temperature profile, per-element heat flux vectors, the
global energy balance, and verification of the minimum/maximum bounds
(ambient/inlet/prescribed-trace extremes) that steady solutions must
respect when the load and boundary-flux sign hypotheses hold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import TemperatureField, ThermalProblem, _neumann_flux_vector
from .elements import GAUSS_1D_2, _grad_lambda, basis_for, edge_shape, grad_shape, integrate, tri_shape
from .materials import eval_curve
from .mesh import ChannelMesh


@dataclass(frozen=True)
class Observables:
    """Scalar diagnostics of one temperature field."""

    t: float  # s
    mst: float  # K
    theta_outlet: float  # K (nan without a channel)
    eta: float  # thermal efficiency (nan when the load vanishes)
    energy_balance_residual: float  # W


@dataclass(frozen=True)
class BoundsReport:
    """Outcome of the min/max bound check on a steady field.

    When the sign hypotheses on f and q_p are not met the corresponding
    pass flag is informational only. With radiation active the bounds
    additionally presuppose a non-negative field; without radiation that
    requirement is waived.
    """

    phi_min: float
    phi_max: float
    theta_min: float
    theta_max: float
    min_violation: float
    max_violation: float
    pass_min: bool
    pass_max: bool
    min_hypothesis_met: bool
    max_hypothesis_met: bool
    tolerance: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _values(field) -> np.ndarray:
    return field.values if isinstance(field, TemperatureField) else np.asarray(field, float)


def mean_surface_temperature(field, mesh: ChannelMesh) -> float:
    """Domain average of theta via element quadrature."""
    return integrate(mesh, _values(field)) / float(np.sum(basis_for(mesh).areas))


def outlet_temperature(field, mesh: ChannelMesh) -> float:
    if mesh.outlet_node is None:
        return float("nan")
    return float(_values(field)[mesh.outlet_node])


def efficiency(theta_outlet: float, theta_inlet: float, chi: float, f0: float, area: float) -> float:
    """eta = chi (theta_outlet - theta_inlet) / (area f0) for a uniform load."""
    if f0 == 0.0 or area <= 0.0:
        raise ValueError("efficiency undefined: total supplied power is zero")
    return chi * (theta_outlet - theta_inlet) / (area * f0)


def efficiency_from_total(theta_outlet: float, theta_inlet: float, chi: float, total_load: float) -> float:
    """General form using the integrated load (non-uniform f)."""
    if total_load == 0.0:
        raise ValueError("efficiency undefined: total supplied power is zero")
    return chi * (theta_outlet - theta_inlet) / total_load


def arc_length_profile(field, mesh: ChannelMesh, n_samples: int = 101) -> np.ndarray:
    """(s, theta) rows at equispaced arc lengths along the snapped channel."""
    if not mesh.has_channel:
        raise ValueError("mesh has no channel to sample")
    vals = _values(field)
    s_nodes = mesh.channel_arc_coords()
    total = s_nodes[-1]
    samples = np.linspace(0.0, total, n_samples)
    out = np.empty((n_samples, 2))
    edge_idx = np.clip(np.searchsorted(s_nodes, samples, side="right") - 1, 0, len(s_nodes) - 2)
    for row, (s, k) in enumerate(zip(samples, edge_idx)):
        ell = mesh.channel_lengths[k]
        u = (s - s_nodes[k]) / ell
        a, b = mesh.channel_nodes[k], mesh.channel_nodes[k + 1]
        if mesh.element_order == 1:
            theta = (1.0 - u) * vals[a] + u * vals[b]
        else:
            N, _ = edge_shape(2, np.array([2.0 * u - 1.0]))
            theta = N[0] @ np.array([vals[a], vals[b], vals[mesh.channel_mids[k]]])
        out[row] = (s, theta)
    return out


def heat_flux_field(field, problem: ThermalProblem) -> np.ndarray:
    """q = -k_s(theta) grad theta per element at the centroid, (T, 2)."""
    mesh = problem.mesh
    vals = _values(field)
    basis = basis_for(mesh)
    corners = mesh.nodes[mesh.triangles[:, :3]]
    centroid = np.array([1.0, 1.0, 1.0]) / 3.0
    N = tri_shape(mesh.element_order, centroid[None, :])[0]
    theta_e = vals[mesh.triangles]
    theta_c = theta_e @ N
    if mesh.element_order == 1:
        gradN = basis.qp_gradN[0]  # P1 gradients are constant per element
    else:
        gradN = grad_shape(2, centroid, _grad_lambda(corners, basis.areas))
    grad_theta = np.einsum("tnc,tn->tc", gradN, theta_e)
    k = eval_curve(problem.solid.conductivity, theta_c)
    if problem.conductivity_scale is not None:
        k = k * problem.conductivity_scale
    return -k[:, None] * grad_theta


def channel_peclet(problem: ThermalProblem, theta: float | None = None) -> np.ndarray:
    """Per-edge advection/conduction ratio chi * ell / (2 d k_s(theta)).

    Small values justify the unstabilized Galerkin channel term; the
    conductivity is sampled at ambient unless a temperature is given.
    """
    mesh = problem.mesh
    if not mesh.has_channel:
        return np.empty(0)
    if theta is None:
        theta = problem.surface.theta_amb
    k = eval_curve(problem.solid.conductivity, float(theta))
    return problem.chi * mesh.channel_lengths / (2.0 * mesh.domain.thickness * k)


def energy_balance(field, problem: ThermalProblem, time: float | None = None) -> float:
    """Supplied power minus all modeled sinks; near zero at steady state.

    residual = int f - int h_T (theta - amb) - int eps sigma (theta^4 - amb^4)
               - chi (theta_outlet - theta_inlet) - int_Gq q_p
    computed with the assembly quadrature.
    """
    mesh = problem.mesh
    vals = _values(field)
    if time is None:
        time = field.time if isinstance(field, TemperatureField) else 0.0
    basis = basis_for(mesh)
    surf = problem.surface
    theta_e = vals[mesh.triangles]
    supplied = convected = radiated = 0.0
    for q in range(len(basis.qp_weights)):
        w = basis.qp_weights[q] * basis.areas
        th_q = theta_e @ basis.qp_N[q]
        supplied += np.sum(w * problem.load_at(basis.qp_xy[q, :, 0], basis.qp_xy[q, :, 1], time))
        convected += np.sum(w * surf.h_T * (th_q - surf.theta_amb))
        radiated += np.sum(w * surf.emissivity * surf.sigma * (th_q**4 - surf.theta_amb**4))
    extracted = 0.0
    if mesh.has_channel and problem.chi != 0.0:
        extracted = problem.chi * (vals[mesh.outlet_node] - problem.bcs.theta_inlet)
    boundary_out = float(np.sum(_neumann_flux_vector(problem, time)))
    return float(supplied - convected - radiated - extracted - boundary_out)


def total_load(problem: ThermalProblem, time: float = 0.0) -> float:
    """int_Omega f dOmega with the assembly quadrature."""
    basis = basis_for(problem.mesh)
    out = 0.0
    for q in range(len(basis.qp_weights)):
        w = basis.qp_weights[q] * basis.areas
        out += np.sum(w * problem.load_at(basis.qp_xy[q, :, 0], basis.qp_xy[q, :, 1], time))
    return float(out)


def _load_sign_range(problem: ThermalProblem, time: float) -> tuple[float, float]:
    basis = basis_for(problem.mesh)
    lo, hi = np.inf, -np.inf
    for q in range(len(basis.qp_weights)):
        f_q = problem.load_at(basis.qp_xy[q, :, 0], basis.qp_xy[q, :, 1], time)
        lo, hi = min(lo, float(np.min(f_q))), max(hi, float(np.max(f_q)))
    return lo, hi


def _qp_sign_range(problem: ThermalProblem, time: float) -> tuple[float, float]:
    mesh = problem.mesh
    sel = mesh.boundary_tags == "neumann"
    if not np.any(sel):
        return 0.0, 0.0
    if np.isscalar(problem.bcs.q_p):
        v = float(problem.bcs.q_p)
        return v, v
    edges = mesh.boundary_edges[sel]
    pa, pb = mesh.nodes[edges[:, 0]], mesh.nodes[edges[:, 1]]
    xi, _ = GAUSS_1D_2
    lo, hi = np.inf, -np.inf
    for g in range(len(xi)):
        frac = 0.5 * (1.0 + xi[g])
        qv = problem.qp_at(pa[:, 0] + frac * (pb[:, 0] - pa[:, 0]),
                           pa[:, 1] + frac * (pb[:, 1] - pa[:, 1]), time)
        lo, hi = min(lo, float(np.min(qv))), max(hi, float(np.max(qv)))
    return lo, hi


def bound_candidates(problem: ThermalProblem) -> list[float]:
    """Ambient, inlet (when constrained), and the Dirichlet trace values."""
    cands = [problem.surface.theta_amb]
    if problem.mesh.has_channel and problem.chi > 0.0:
        cands.append(problem.bcs.theta_inlet)
    dirichlet = problem.mesh.dirichlet_nodes()
    if dirichlet.size:
        constrained = problem.constrained_values()
        cands.extend(constrained[int(n)] for n in dirichlet)
    return cands


def check_bounds(field, problem: ThermalProblem, tol: float | None = None) -> BoundsReport:
    """Verify phi_min <= theta <= phi_max on the nodal field.

    tol defaults to 1e-6 * theta_amb; small discrete violations (e.g.
    from under-integrated radiation) are surfaced, not hidden.
    """
    vals = _values(field)
    time = field.time if isinstance(field, TemperatureField) else 0.0
    if tol is None:
        tol = 1e-6 * problem.surface.theta_amb
    cands = bound_candidates(problem)
    phi_min, phi_max = min(cands), max(cands)
    theta_min, theta_max = float(np.min(vals)), float(np.max(vals))

    f_lo, f_hi = _load_sign_range(problem, time)
    q_lo, q_hi = _qp_sign_range(problem, time)
    amb_ok = problem.surface.theta_amb > 0.0
    nonneg_ok = problem.surface.emissivity == 0.0 or theta_min >= 0.0
    min_hyp = f_lo >= 0.0 and q_hi <= 0.0 and amb_ok and nonneg_ok
    max_hyp = f_hi <= 0.0 and q_lo >= 0.0 and amb_ok and nonneg_ok

    return BoundsReport(
        phi_min=phi_min,
        phi_max=phi_max,
        theta_min=theta_min,
        theta_max=theta_max,
        min_violation=max(0.0, phi_min - theta_min),
        max_violation=max(0.0, theta_max - phi_max),
        pass_min=theta_min >= phi_min - tol,
        pass_max=theta_max <= phi_max + tol,
        min_hypothesis_met=min_hyp,
        max_hypothesis_met=max_hyp,
        tolerance=tol,
    )


def observables_for(problem: ThermalProblem, field, time: float | None = None) -> Observables:
    mesh = problem.mesh
    if time is None:
        time = field.time if isinstance(field, TemperatureField) else 0.0
    theta_out = outlet_temperature(field, mesh)
    supplied = total_load(problem, time)
    if supplied == 0.0 or not mesh.has_channel:
        eta = float("nan")
    else:
        eta = efficiency_from_total(theta_out, problem.bcs.theta_inlet, problem.chi, supplied)
    return Observables(
        t=float(time),
        mst=mean_surface_temperature(field, mesh),
        theta_outlet=theta_out,
        eta=eta,
        energy_balance_residual=energy_balance(field, problem, time),
    )


def series_observables(problem: ThermalProblem, series) -> list[Observables]:
    """Observables for every stored step after t = 0."""
    return [observables_for(problem, f) for f in series.fields[1:]]

import numpy as np
import pytest

from conftest import channel_problem, no_channel_problem, wide_material
from vasctherm.assembly import SurfaceExchange, TemperatureField, ThermalProblem
from vasctherm.materials import Coolant, water_coolant
from vasctherm.mesh import build_structured_mesh, mesh_without_channel
from vasctherm.geometry import Domain2D
from vasctherm.postprocess import (
    arc_length_profile,
    channel_peclet,
    check_bounds,
    efficiency,
    efficiency_from_total,
    energy_balance,
    heat_flux_field,
    mean_surface_temperature,
    observables_for,
    outlet_temperature,
    series_observables,
)
from vasctherm.solvers import TransientSettings, solve_steady, solve_transient

AMB = 296.42


def test_mst_constant_field(unit_square_mesh):
    theta = np.full(unit_square_mesh.n_nodes, 300.0)
    assert mean_surface_temperature(theta, unit_square_mesh) == pytest.approx(300.0)


def test_mst_linear_field_exact(unit_square_mesh):
    theta = 290.0 + 20.0 * unit_square_mesh.nodes[:, 0]
    assert mean_surface_temperature(theta, unit_square_mesh) == pytest.approx(300.0, rel=1e-13)


def test_mst_refinement_invariant_for_linear_fields():
    dom = Domain2D(width=1.0, height=1.0, thickness=0.005)
    vals = []
    for n in (4, 8, 16):
        mesh = mesh_without_channel(build_structured_mesh(dom, n))
        theta = 290.0 + 20.0 * mesh.nodes[:, 0]
        vals.append(mean_surface_temperature(theta, mesh))
    assert np.ptp(vals) < 1e-12


def test_outlet_temperature_nodal():
    prob = channel_problem(n=6)
    theta = np.full(prob.n_dofs, 305.0)
    assert outlet_temperature(theta, prob.mesh) == 305.0
    profile = arc_length_profile(theta, prob.mesh, n_samples=7)
    assert profile[-1, 1] == outlet_temperature(theta, prob.mesh)


def test_efficiency_hand_value():
    assert efficiency(306.42, 296.42, 0.0697, 1000.0, 0.01) == pytest.approx(0.0697, rel=1e-12)
    assert efficiency(296.42, 296.42, 0.0697, 1000.0, 0.01) == 0.0


def test_efficiency_linear_in_delta_theta():
    e1 = efficiency(300.0, 296.0, 0.07, 1000.0, 0.01)
    e2 = efficiency(304.0, 296.0, 0.07, 1000.0, 0.01)
    assert e2 == pytest.approx(2.0 * e1)


def test_efficiency_zero_load_raises():
    with pytest.raises(ValueError):
        efficiency(300.0, 296.0, 0.07, 0.0, 0.01)
    with pytest.raises(ValueError):
        efficiency_from_total(300.0, 296.0, 0.07, 0.0)


def test_arc_profile_constant_field_flat():
    prob = channel_problem(n=8)
    theta = np.full(prob.n_dofs, 311.0)
    profile = arc_length_profile(theta, prob.mesh, n_samples=13)
    assert np.allclose(profile[:, 1], 311.0)
    assert profile[0, 0] == 0.0
    assert profile[-1, 0] == pytest.approx(prob.mesh.channel_arc_length)


def test_arc_profile_starts_at_inlet_value():
    prob = channel_problem(n=10)
    fld = solve_steady(prob)
    profile = arc_length_profile(fld, prob.mesh, n_samples=41)
    assert profile[0, 1] == pytest.approx(296.42, abs=1e-9)
    assert profile[-1, 1] == pytest.approx(outlet_temperature(fld, prob.mesh), abs=1e-12)


def test_arc_profile_linear_interpolation_midpoint():
    prob = channel_problem(n=4)
    mesh = prob.mesh
    theta = np.zeros(mesh.n_nodes)
    theta[mesh.channel_nodes] = np.arange(len(mesh.channel_nodes), dtype=float)
    s_mid = 0.5 * (mesh.channel_arc_coords()[0] + mesh.channel_arc_coords()[1])
    profile = arc_length_profile(theta, mesh, n_samples=2 * len(mesh.channel_nodes) - 1)
    row = np.argmin(np.abs(profile[:, 0] - s_mid))
    assert profile[row, 1] == pytest.approx(0.5)


def test_heat_flux_constant_field_zero():
    prob = channel_problem(n=5)
    theta = np.full(prob.n_dofs, 300.0)
    q = heat_flux_field(theta, prob)
    assert np.allclose(q, 0.0)


def test_heat_flux_linear_field_exact():
    prob = no_channel_problem(n=5, material=wide_material(k=(2.0, 0.0)))
    slope = 150.0
    theta = 300.0 + slope * prob.mesh.nodes[:, 0]
    q = heat_flux_field(theta, prob)
    assert np.allclose(q[:, 0], -2.0 * slope, rtol=1e-12)
    assert np.allclose(q[:, 1], 0.0, atol=1e-9)


def test_heat_flux_dissipative_orientation():
    prob = channel_problem(n=10)
    fld = solve_steady(prob)
    q = heat_flux_field(fld, prob)
    from vasctherm.elements import basis_for

    basis = basis_for(prob.mesh)
    grad = np.einsum("tnc,tn->tc", basis.qp_gradN[0], fld.values[prob.mesh.triangles])
    assert np.all(np.einsum("tc,tc->t", q, grad) <= 1e-12)


def test_energy_balance_equilibrium_zero():
    prob = channel_problem(n=6, f0=0.0)
    theta = np.full(prob.n_dofs, AMB)
    assert energy_balance(theta, prob) == pytest.approx(0.0, abs=1e-12)


def test_energy_balance_closed_form_scenario():
    prob = no_channel_problem(n=4, emissivity=0.0)
    fld = solve_steady(prob)
    assert abs(energy_balance(fld, prob)) < 1e-7


def test_energy_balance_low_conductivity_channel_run():
    from vasctherm.materials import builtin_material

    prob = channel_problem(n=20, material=builtin_material("gfrp_like", "TDMP"))
    fld = solve_steady(prob)
    assert abs(energy_balance(fld, prob)) <= 0.005 * 10.0


def test_check_bounds_heated_lower_bound():
    prob = channel_problem(n=10, f0=1000.0)
    fld = solve_steady(prob)
    rep = check_bounds(fld, prob)
    assert rep.min_hypothesis_met
    assert rep.pass_min
    assert rep.phi_min == pytest.approx(AMB)
    assert rep.min_violation == 0.0


def test_check_bounds_cooled_upper_bound():
    prob = channel_problem(n=10, f0=-500.0, emissivity=0.0)
    fld = solve_steady(prob)
    rep = check_bounds(fld, prob)
    assert rep.max_hypothesis_met
    assert rep.pass_max
    assert rep.max_violation == 0.0


def test_check_bounds_equilibrium_tight():
    prob = channel_problem(n=5, f0=0.0)
    fld = solve_steady(prob)
    rep = check_bounds(fld, prob)
    assert rep.pass_min and rep.pass_max
    assert rep.theta_min == pytest.approx(rep.phi_min)
    assert rep.theta_max == pytest.approx(rep.phi_max)
    assert rep.min_violation == 0.0 and rep.max_violation == 0.0


def test_check_bounds_hypothesis_flags():
    prob = channel_problem(n=5, f0=-100.0)  # f <= 0 breaks the minimum hypothesis
    fld = TemperatureField(np.full(prob.n_dofs, AMB))
    rep = check_bounds(fld, prob)
    assert not rep.min_hypothesis_met
    assert rep.max_hypothesis_met


def test_check_bounds_radiation_requires_nonnegative_field():
    prob = channel_problem(n=5)
    fld = TemperatureField(np.full(prob.n_dofs, AMB))
    fld.values[0] = -1.0
    rep = check_bounds(fld, prob)
    assert not rep.min_hypothesis_met  # emissivity > 0 and theta < 0 somewhere
    prob0 = channel_problem(n=5, emissivity=0.0)
    rep0 = check_bounds(fld, prob0)
    assert rep0.min_hypothesis_met is (True if prob0.load >= 0 else False)


def test_observables_row_and_series():
    prob = channel_problem(n=6)
    series = solve_transient(prob, TransientSettings(dt=1.0, t_end=3.0))
    rows = series_observables(prob, series)
    assert len(rows) == 3
    assert [r.t for r in rows] == [1.0, 2.0, 3.0]
    assert all(np.isfinite(r.mst) for r in rows)
    assert all(np.isfinite(r.eta) for r in rows)


def test_observables_eta_undefined_without_load():
    prob = channel_problem(n=5, f0=0.0)
    fld = solve_steady(prob)
    obs = observables_for(prob, fld)
    assert np.isnan(obs.eta)
    assert obs.mst == pytest.approx(AMB)


def test_bound_structure_orders_mst():
    # phi_min <= MST <= max nodal theta for a heated solution
    prob = channel_problem(n=10)
    fld = solve_steady(prob)
    rep = check_bounds(fld, prob)
    mst = mean_surface_temperature(fld, prob.mesh)
    assert rep.phi_min <= mst <= rep.theta_max


def test_channel_peclet_small_at_desk_scale():
    prob = channel_problem(n=40 // 4)
    pe = channel_peclet(prob)
    assert pe.shape == (len(prob.mesh.channel_lengths),)
    assert np.all(pe < 1.0)

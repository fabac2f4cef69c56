"""Scenario ingestion, experiment orchestration, and CSV artifact emission.

Subcommands: mesh, solve, flow-reversal, compare-props, verify. Scenarios
are JSON configs (schema documented in the README) whose defaults are the
desk-scale defaults: 0.1 m square plate, 5 mm thick, water at 1 mL/min,
f0 = 1000 W/m^2, h_T = 21, emissivity 0.97, ambient 296.42 K, BDF2 at
dt = 1 s to 1500 s. Outputs are plot-ready CSV files plus JSON summaries;
every run directory embeds an echoed config that reproduces it
byte-identically. Exit codes: 0 ok, 1 check failure, 2 invalid input,
3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy

from . import __version__
from .assembly import BoundaryData, SurfaceExchange, ThermalProblem
from .geometry import LAYOUT_KINDS, Domain2D, LayoutParams, VasculaturePath, generate_layout
from .materials import (
    Coolant,
    builtin_material,
    builtin_names,
    check_ellipticity,
    load_material_file,
)
from .mesh import build_structured_mesh, embed_vasculature, export_mesh_csv, mesh_stats
from .postprocess import (
    arc_length_profile,
    channel_peclet,
    check_bounds,
    heat_flux_field,
    observables_for,
    series_observables,
)
from .solvers import NewtonSettings, SolverError, TransientSettings, solve_steady, solve_transient
from .verification import (
    jacobian_check,
    mms_case_cmp,
    mms_case_tdmp,
    mms_convergence,
    scalar_reference,
    toggle_masks,
)

# engineering thresholds for the reversal experiment; the theory gives exact
# invariance, these bound the acceptable discrete gap at desk resolution
REVERSAL_STEADY_TOL = 0.05  # K
REVERSAL_TRANSIENT_TOL = 0.2  # K

EXIT_OK, EXIT_CHECK_FAILED, EXIT_INVALID_INPUT, EXIT_SOLVER_FAILURE = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("VASCTHERM_THREADS", "1")))
    except ValueError:
        return 1


def _fmt(x) -> str:
    return repr(float(x))


def _json_safe(x):
    """Map non-finite floats to None so summaries stay strict JSON."""
    if isinstance(x, float) and not np.isfinite(x):
        return None
    return x


def _check_keys(d: dict, allowed: set, where: str):
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)} in {where}; allowed: {sorted(allowed)}")


@dataclass
class ScenarioConfig:
    """Validated scenario description (see README for the JSON schema)."""

    domain: dict = field(default_factory=lambda: {"width": 0.1, "height": 0.1, "thickness": 0.005})
    layout: dict = field(default_factory=lambda: {"kind": "u_shape"})
    mesh: dict = field(default_factory=lambda: {"n": 40, "element_order": 1})
    material: dict = field(default_factory=lambda: {"name": "cfrp_like", "mode": "TDMP"})
    coolant: dict = field(default_factory=lambda: {
        "density": 1000.0, "specific_heat": 4183.0, "flow_rate_ml_per_min": 1.0})
    load: dict = field(default_factory=lambda: {"f0": 1000.0})
    surface: dict = field(default_factory=lambda: {"h_T": 21.0, "emissivity": 0.97, "theta_amb": 296.42})
    inlet: dict = field(default_factory=dict)
    transient: dict = field(default_factory=lambda: {"dt": 1.0, "t_end": 1500.0, "bdf_order": 2})
    flow_direction: str = "forward"
    steady_only: bool = False
    output_dir: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        _check_keys(data, set(cls.__dataclass_fields__), "config")
        cfg = cls()
        for group in ("domain", "layout", "mesh", "material", "coolant", "load",
                      "surface", "inlet", "transient"):
            if group in data:
                if not isinstance(data[group], dict):
                    raise ConfigError(f"config section {group!r} must be an object")
                merged = dict(getattr(cfg, group))
                merged.update(data[group])
                setattr(cfg, group, merged)
        if "margins" in cfg.layout:  # documented alias of margin
            cfg.layout["margin"] = cfg.layout.pop("margins")
        if "flow_direction" in data:
            cfg.flow_direction = data["flow_direction"]
        if "steady_only" in data:
            cfg.steady_only = bool(data["steady_only"])
        if "output_dir" in data:
            cfg.output_dir = data["output_dir"]
        cfg.validate()
        return cfg

    def validate(self):
        _check_keys(self.domain, {"width", "height", "thickness"}, "domain")
        if "vertices" in self.layout:
            _check_keys(self.layout, {"vertices"}, "layout")
        else:
            _check_keys(self.layout, {"kind", "spacing", "margin", "pass_count",
                                      "offset", "inlet_edge"}, "layout")
            if self.layout.get("kind", "u_shape") not in LAYOUT_KINDS:
                raise ConfigError(f"layout.kind must be one of {LAYOUT_KINDS}")
        _check_keys(self.mesh, {"n", "element_order"}, "mesh")
        _check_keys(self.material, {"name", "mode", "file"}, "material")
        _check_keys(self.coolant, {"density", "specific_heat", "flow_rate_ml_per_min"}, "coolant")
        _check_keys(self.load, {"f0"}, "load")
        _check_keys(self.surface, {"h_T", "emissivity", "theta_amb"}, "surface")
        _check_keys(self.inlet, {"theta_inlet"}, "inlet")
        _check_keys(self.transient, {"dt", "t_end", "bdf_order"}, "transient")
        if self.flow_direction not in ("forward", "reverse"):
            raise ConfigError("flow_direction must be 'forward' or 'reverse'")
        if self.mesh.get("n", 40) < 2:
            raise ConfigError("mesh.n must be at least 2")
        if self.mesh.get("element_order", 1) not in (1, 2):
            raise ConfigError("mesh.element_order must be 1 or 2")
        for key, val in (("coolant.density", self.coolant["density"]),
                         ("coolant.specific_heat", self.coolant["specific_heat"])):
            if val <= 0:
                raise ConfigError(f"{key} must be positive")
        if self.coolant["flow_rate_ml_per_min"] < 0:
            raise ConfigError("coolant.flow_rate_ml_per_min must be non-negative")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **groups) -> "ScenarioConfig":
        data = self.to_dict()
        for key, val in groups.items():
            if isinstance(val, dict) and key in data and isinstance(data[key], dict):
                data[key] = {**data[key], **val}
            else:
                data[key] = val
        return ScenarioConfig.from_dict(data)

    @property
    def theta_amb(self) -> float:
        return float(self.surface["theta_amb"])

    @property
    def theta_inlet(self) -> float:
        return float(self.inlet.get("theta_inlet", self.theta_amb))


def load_config(path: str | None, overrides: dict | None = None) -> ScenarioConfig:
    if path is None:
        data = {}
    else:
        with open(path) as fh:
            data = json.load(fh)
    cfg = ScenarioConfig.from_dict(data)
    if overrides:
        cfg = cfg.replace(**overrides)
    return cfg


def build_problem(config: ScenarioConfig) -> ThermalProblem:
    """Materialize the scenario: layout, mesh, materials, boundary data."""
    dom = Domain2D(**config.domain)
    if "vertices" in config.layout:
        path = VasculaturePath(np.asarray(config.layout["vertices"], dtype=float))
    else:
        layout = dict(config.layout)
        kind = layout.get("kind", "u_shape")
        if kind == "serpentine":
            layout.setdefault("spacing", 0.02)  # keeps 4 passes clear of the sides
        elif kind == "asymmetric":
            layout.setdefault("spacing", 0.05)
            layout.setdefault("offset", 0.005)
        path = generate_layout(dom, LayoutParams(**layout))
    if config.flow_direction == "reverse":
        path = path.reversed()
    grid = build_structured_mesh(dom, int(config.mesh["n"]), int(config.mesh.get("element_order", 1)))
    mesh = embed_vasculature(grid, path)

    mode = config.material.get("mode", "TDMP")
    if config.material.get("file"):
        solid = load_material_file(config.material["file"], config.material.get("name"), mode)
    else:
        solid = builtin_material(config.material["name"], mode)
    rep = check_ellipticity(solid)
    if not rep.passed:
        raise ConfigError(f"material {solid.name} fails uniform ellipticity (k1={rep.k1})")

    coolant = Coolant(
        density=float(config.coolant["density"]),
        specific_heat=float(config.coolant["specific_heat"]),
        flow_rate=float(config.coolant["flow_rate_ml_per_min"]) * 1e-6 / 60.0,
    )
    return ThermalProblem(
        mesh=mesh,
        solid=solid,
        coolant=coolant,
        load=float(config.load["f0"]),
        surface=SurfaceExchange(
            h_T=float(config.surface["h_T"]),
            emissivity=float(config.surface["emissivity"]),
            theta_amb=config.theta_amb,
        ),
        bcs=BoundaryData(theta_inlet=config.theta_inlet),
    )


@dataclass(eq=False)
class RunResult:
    """One scenario run: solved fields plus derived observables."""

    config: ScenarioConfig
    problem: ThermalProblem
    steady_field: object
    steady_obs: object
    bounds: object
    series: object = None
    series_obs: list = field(default_factory=list)
    newton_log: list = field(default_factory=list)
    wall_time: float = 0.0


@dataclass(eq=False)
class ExperimentReport:
    """Aggregate of one or more runs with cross-run deltas and echoes."""

    kind: str
    runs: dict
    summary: dict
    out_dir: str | None = None


_NOTES = (
    "initial temperature not specified by the scenario source; ambient assumed",
    "flow-reversal gap thresholds (0.05 K steady, 0.2 K transient) are engineering choices",
)


def _versions() -> dict:
    return {"vasctherm": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def execute_run(config: ScenarioConfig) -> RunResult:
    """Solve one scenario (steady always; transient unless steady_only)."""
    t0 = time.perf_counter()
    problem = build_problem(config)
    log: list = []
    steady = solve_steady(problem, log=log)
    bounds = check_bounds(steady, problem)
    series = None
    sobs: list = []
    if not config.steady_only:
        ts = TransientSettings(
            dt=float(config.transient["dt"]),
            t_end=float(config.transient["t_end"]),
            bdf_order=int(config.transient.get("bdf_order", 2)),
        )
        series = solve_transient(problem, ts, log=log)
        sobs = series_observables(problem, series)
    return RunResult(
        config=config,
        problem=problem,
        steady_field=steady,
        steady_obs=observables_for(problem, steady),
        bounds=bounds,
        series=series,
        series_obs=sobs,
        newton_log=log,
        wall_time=time.perf_counter() - t0,
    )


def _write_csv(path: str, header: list[str], rows) -> str:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def emit_plot_data(run: RunResult, outdir: str) -> list[str]:
    """Figure-oriented CSVs: time series, arc-length profile, field snapshot."""
    os.makedirs(outdir, exist_ok=True)
    written = []
    if run.series_obs:
        obs = run.series_obs
        written.append(_write_csv(
            os.path.join(outdir, "observables.csv"),
            ["t", "mst", "theta_outlet", "eta", "energy_residual"],
            [[_fmt(o.t), _fmt(o.mst), _fmt(o.theta_outlet), _fmt(o.eta),
              _fmt(o.energy_balance_residual)] for o in obs],
        ))
        written.append(_write_csv(
            os.path.join(outdir, "mst_vs_time.csv"), ["t", "mst"],
            [[_fmt(o.t), _fmt(o.mst)] for o in obs]))
        written.append(_write_csv(
            os.path.join(outdir, "outlet_vs_time.csv"), ["t", "theta_outlet"],
            [[_fmt(o.t), _fmt(o.theta_outlet)] for o in obs]))
        written.append(_write_csv(
            os.path.join(outdir, "eta_vs_time.csv"), ["t", "eta"],
            [[_fmt(o.t), _fmt(o.eta)] for o in obs]))
    mesh = run.problem.mesh
    profile = arc_length_profile(run.steady_field, mesh)
    written.append(_write_csv(
        os.path.join(outdir, "arclength_profile.csv"), ["s", "theta"],
        [[_fmt(s), _fmt(v)] for s, v in profile]))
    flux = heat_flux_field(run.steady_field, run.problem)
    tri_flux = np.zeros((mesh.n_nodes, 2))
    counts = np.zeros(mesh.n_nodes)
    for k in range(mesh.triangles.shape[1]):
        np.add.at(tri_flux, mesh.triangles[:, k], flux)
        np.add.at(counts, mesh.triangles[:, k], 1.0)
    counts[counts == 0] = 1.0
    tri_flux /= counts[:, None]
    written.append(_write_csv(
        os.path.join(outdir, "field_snapshot.csv"), ["x", "y", "theta", "q_x", "q_y"],
        [[_fmt(x), _fmt(y), _fmt(v), _fmt(qx), _fmt(qy)]
         for (x, y), v, (qx, qy) in zip(mesh.nodes, run.steady_field.values, tri_flux)]))
    return written


def _write_run(run: RunResult, outdir: str) -> None:
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "config_echo.json"), "w") as fh:
        json.dump(run.config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    emit_plot_data(run, outdir)
    _write_csv(
        os.path.join(outdir, "solver_log.csv"),
        ["step", "iteration", "residual_norm", "damping"],
        [[rec.step, rec.iteration, _fmt(rec.residual_norm), _fmt(rec.damping)]
         for rec in run.newton_log],
    )
    bounds_payload = {
        "steady": run.bounds.as_dict(),
        "note": "bounds are proven for the steady regime; transient entries are informational",
    }
    if run.series is not None:
        bounds_payload["transient_final_informational"] = check_bounds(
            run.series.final, run.problem).as_dict()
    with open(os.path.join(outdir, "bounds.json"), "w") as fh:
        json.dump(bounds_payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    obs = run.steady_obs
    summary = {
        "steady": {
            "mst": _json_safe(obs.mst),
            "theta_outlet": _json_safe(obs.theta_outlet),
            "eta": _json_safe(obs.eta),
            "energy_residual": _json_safe(obs.energy_balance_residual),
        },
        "mesh": dataclasses.asdict(mesh_stats(run.problem.mesh)),
        "snap_error": run.problem.mesh.snap_error,
        "max_channel_peclet": float(np.max(channel_peclet(run.problem)))
        if run.problem.mesh.has_channel else None,
        "n_time_steps": 0 if run.series is None else len(run.series) - 1,
        "wall_time_s": run.wall_time,
        "versions": _versions(),
        "seeds": {},
        "notes": list(_NOTES),
    }
    with open(os.path.join(outdir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_scenario(config: ScenarioConfig, outdir: str) -> ExperimentReport:
    run = execute_run(config)
    _write_run(run, outdir)
    return ExperimentReport(kind="solve", runs={"run": run}, summary={}, out_dir=outdir)


def _paired_runs(configs: dict[str, ScenarioConfig]) -> dict[str, RunResult]:
    names = list(configs)
    if worker_count() > 1:
        with ThreadPoolExecutor(max_workers=min(worker_count(), len(names))) as pool:
            futures = {name: pool.submit(execute_run, configs[name]) for name in names}
            return {name: futures[name].result() for name in names}
    return {name: execute_run(configs[name]) for name in names}


def flow_reversal_experiment(config: ScenarioConfig, outdir: str) -> ExperimentReport:
    """Forward and reverse runs with identical everything else, plus deltas."""
    runs = _paired_runs({
        "forward": config.replace(flow_direction="forward"),
        "reverse": config.replace(flow_direction="reverse"),
    })
    os.makedirs(outdir, exist_ok=True)
    for name, run in runs.items():
        _write_run(run, os.path.join(outdir, name))

    fwd, rev = runs["forward"], runs["reverse"]
    steady_dmst = abs(fwd.steady_obs.mst - rev.steady_obs.mst)
    steady_dout = abs(fwd.steady_obs.theta_outlet - rev.steady_obs.theta_outlet)
    rows, max_dmst, max_dout = [], 0.0, 0.0
    for of, orv in zip(fwd.series_obs, rev.series_obs):
        dm, do = abs(of.mst - orv.mst), abs(of.theta_outlet - orv.theta_outlet)
        max_dmst, max_dout = max(max_dmst, dm), max(max_dout, do)
        rows.append([_fmt(of.t), _fmt(dm), _fmt(do)])
    _write_csv(os.path.join(outdir, "deltas.csv"), ["t", "abs_dmst", "abs_doutlet"], rows)
    passed = (
        steady_dmst <= REVERSAL_STEADY_TOL
        and steady_dout <= REVERSAL_STEADY_TOL
        and max_dmst <= REVERSAL_TRANSIENT_TOL
        and max_dout <= REVERSAL_TRANSIENT_TOL
    )
    summary = {
        "steady_abs_dmst": steady_dmst,
        "steady_abs_doutlet": steady_dout,
        "transient_max_abs_dmst": max_dmst,
        "transient_max_abs_doutlet": max_dout,
        "thresholds": {"steady": REVERSAL_STEADY_TOL, "transient": REVERSAL_TRANSIENT_TOL},
        "passed": passed,
        "config_echo": config.to_dict(),
        "versions": _versions(),
        "notes": list(_NOTES),
    }
    with open(os.path.join(outdir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ExperimentReport(kind="flow-reversal", runs=runs, summary=summary, out_dir=outdir)


def compare_cmp_tdmp(config: ScenarioConfig, outdir: str) -> ExperimentReport:
    """Paired constant-vs-temperature-dependent property runs."""
    runs = _paired_runs({
        "cmp": config.replace(material={"mode": "CMP"}),
        "tdmp": config.replace(material={"mode": "TDMP"}),
    })
    os.makedirs(outdir, exist_ok=True)
    for name, run in runs.items():
        _write_run(run, os.path.join(outdir, name))
    cmp_run, tdmp_run = runs["cmp"], runs["tdmp"]
    rows, max_dmst, max_deta = [], 0.0, 0.0
    for oc, ot in zip(cmp_run.series_obs, tdmp_run.series_obs):
        dm = abs(oc.mst - ot.mst)
        de = abs(oc.eta - ot.eta) if np.isfinite(oc.eta) and np.isfinite(ot.eta) else float("nan")
        if np.isfinite(de):
            max_deta = max(max_deta, de)
        max_dmst = max(max_dmst, dm)
        rows.append([_fmt(oc.t), _fmt(dm), _fmt(de),
                     _fmt(abs(oc.theta_outlet - ot.theta_outlet))])
    _write_csv(os.path.join(outdir, "deltas.csv"),
               ["t", "abs_dmst", "abs_deta", "abs_doutlet"], rows)
    summary = {
        "steady_abs_dmst": abs(cmp_run.steady_obs.mst - tdmp_run.steady_obs.mst),
        "steady_abs_deta": _json_safe(abs(cmp_run.steady_obs.eta - tdmp_run.steady_obs.eta)),
        "steady_abs_doutlet": _json_safe(
            abs(cmp_run.steady_obs.theta_outlet - tdmp_run.steady_obs.theta_outlet)),
        "transient_max_abs_dmst": max_dmst,
        "transient_max_abs_deta": max_deta,
        "config_echo": config.to_dict(),
        "versions": _versions(),
        "notes": list(_NOTES),
    }
    with open(os.path.join(outdir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ExperimentReport(kind="compare-props", runs=runs, summary=summary, out_dir=outdir)


def run_verify(outdir: str, full: bool = False, seed: int = 0) -> int:
    """MMS slopes, Jacobian toggle masks, scalar-reference consistency."""
    os.makedirs(outdir, exist_ok=True)
    sizes = (8, 16, 32, 64) if full else (8, 16, 32)
    failures = []
    for case in (mms_case_cmp(), mms_case_tdmp()):
        table = mms_convergence(case, mesh_sizes=sizes)
        _write_csv(
            os.path.join(outdir, f"convergence_{case.name}.csv"),
            ["h", "l2_error", "max_error"],
            [[_fmt(r.h), _fmt(r.l2_error), _fmt(r.max_error)] for r in table.rows],
        )
        ok = abs(table.slope - 2.0) <= 0.2
        print(f"{'PASS' if ok else 'FAIL'} mms {case.name}: L2 slope {table.slope:.3f} (target 2.0 +/- 0.2)")
        if not ok:
            failures.append(f"mms {case.name}")

    problem = _verify_problem()
    worst = 0.0
    for mask in toggle_masks():
        gap = jacobian_check(problem, trials=2, terms=mask, seed=seed)
        worst = max(worst, gap)
    ok = worst <= 1e-5
    print(f"{'PASS' if ok else 'FAIL'} jacobian toggle masks: max relative gap {worst:.2e} (target <= 1e-5)")
    if not ok:
        failures.append("jacobian")

    scal_prob = _scalar_problem()
    series = solve_transient(scal_prob, TransientSettings(dt=1.0, t_end=300.0))
    ref = scalar_reference(scal_prob, t_end=300.0)
    fem = np.array([f.values[0] for f in series.fields])
    gap = float(np.max(np.abs(fem - ref.at(series.times)) / ref.at(series.times)))
    ok = gap <= 0.005
    print(f"{'PASS' if ok else 'FAIL'} scalar reference: max relative gap {gap:.2e} (target <= 5e-3)")
    if not ok:
        failures.append("scalar")

    with open(os.path.join(outdir, "verify_summary.json"), "w") as fh:
        json.dump({"failures": failures, "seed": seed, "versions": _versions()},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK if not failures else EXIT_CHECK_FAILED


def _verify_problem() -> ThermalProblem:
    from .materials import PropertyCurve, SolidMaterial

    dom = Domain2D()
    grid = build_structured_mesh(dom, 3)
    mesh = embed_vasculature(grid, VasculaturePath(np.array([[0.05, 0.1], [0.05, 0.0]])))
    wide = (200.0, 600.0)  # keeps clamp kinks away from finite-difference probes
    solid = SolidMaterial(
        name="verify",
        density=1600.0,
        specific_heat=PropertyCurve((560.0, 1.2), wide, "J/(kg*K)"),
        conductivity=PropertyCurve((5.0, 0.01), wide, "W/(m*K)"),
    )
    return ThermalProblem(
        mesh=mesh, solid=solid,
        coolant=Coolant(1000.0, 4183.0, 1e-6 / 60.0), load=1000.0,
    )


def _scalar_problem() -> ThermalProblem:
    from .mesh import mesh_without_channel

    dom = Domain2D()
    mesh = mesh_without_channel(build_structured_mesh(dom, 2))
    return ThermalProblem(
        mesh=mesh, solid=builtin_material("cfrp_like", "CMP"),
        coolant=Coolant(1000.0, 4183.0, 0.0), load=1000.0,
    )


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vasctherm", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="scenario JSON file")
        sp.add_argument("--out", help="output directory (falls back to config output_dir)")
        sp.add_argument("--flux", type=float, help="override applied flux f0 (W/m^2)")
        sp.add_argument("--layout", choices=LAYOUT_KINDS, help="override layout kind")
        sp.add_argument("--material", help=f"override material name ({', '.join(builtin_names())})")
        sp.add_argument("--mode", choices=("CMP", "TDMP"), help="override property mode")
        sp.add_argument("--reverse", action="store_true", help="reverse the flow direction")
        sp.add_argument("--steady-only", action="store_true", help="skip the transient solve")
        sp.add_argument("--mesh-n", type=int, help="override mesh subdivisions")
        sp.add_argument("--order", type=int, choices=(1, 2), help="override element order")
        sp.add_argument("--t-end", type=float, help="override total time (s)")
        sp.add_argument("--dt", type=float, help="override time step (s)")

    for name in ("mesh", "solve", "flow-reversal", "compare-props"):
        common(sub.add_parser(name))
    vp = sub.add_parser("verify")
    vp.add_argument("--out", required=True)
    vp.add_argument("--full", action="store_true", help="include the n=64 mesh")
    vp.add_argument("--seed", type=int, default=0)
    return p


def _overrides(args) -> dict:
    out: dict = {}
    if args.flux is not None:
        out["load"] = {"f0": args.flux}
    if args.layout is not None:
        out["layout"] = {"kind": args.layout}
    material = {}
    if args.material is not None:
        material["name"] = args.material
    if args.mode is not None:
        material["mode"] = args.mode
    if material:
        out["material"] = material
    if args.reverse:
        out["flow_direction"] = "reverse"
    if args.steady_only:
        out["steady_only"] = True
    mesh = {}
    if args.mesh_n is not None:
        mesh["n"] = args.mesh_n
    if args.order is not None:
        mesh["element_order"] = args.order
    if mesh:
        out["mesh"] = mesh
    transient = {}
    if args.t_end is not None:
        transient["t_end"] = args.t_end
    if args.dt is not None:
        transient["dt"] = args.dt
    if transient:
        out["transient"] = transient
    return out


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "verify":
            return run_verify(args.out, full=args.full, seed=args.seed)
        config = load_config(args.config, _overrides(args))
        if args.out is None:
            if config.output_dir is None:
                raise ConfigError("no output directory: pass --out or set output_dir")
            args.out = config.output_dir
        if args.command == "mesh":
            problem = build_problem(config)
            export_mesh_csv(problem.mesh, args.out)
            stats = dataclasses.asdict(mesh_stats(problem.mesh))
            stats["snap_error"] = problem.mesh.snap_error
            with open(os.path.join(args.out, "mesh_stats.json"), "w") as fh:
                json.dump(stats, fh, indent=2, sort_keys=True)
                fh.write("\n")
            return EXIT_OK
        if args.command == "solve":
            run_scenario(config, args.out)
            return EXIT_OK
        if args.command == "flow-reversal":
            report = flow_reversal_experiment(config, args.out)
            return EXIT_OK if report.summary["passed"] else EXIT_CHECK_FAILED
        if args.command == "compare-props":
            compare_cmp_tdmp(config, args.out)
            return EXIT_OK
        raise AssertionError(f"unhandled command {args.command}")
    except (ConfigError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT
    except SolverError as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER_FAILURE


if __name__ == "__main__":
    sys.exit(main())

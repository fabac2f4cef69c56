"""Temperature-dependent solid properties and the constant-property coolant.

Host-material specific heat and conductivity are polynomial fits of
temperature (kelvin), clamped to the fitted range so that positivity and
uniform ellipticity survive extrapolation. The coolant is characterized by
a single heat capacity rate chi = rho_f * Q * c_f (W/K).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

MODES = ("CMP", "TDMP")
REFERENCE_TEMPERATURE = 296.15  # K, room temperature at which CMP values are sampled


@dataclass(frozen=True)
class PropertyCurve:
    """Clamped polynomial property of temperature.

    coefficients are in ascending degree, evaluated in kelvin. Outside
    valid_range the curve extrapolates as a constant (endpoint value).
    """

    coefficients: tuple[float, ...]
    valid_range: tuple[float, float]
    unit: str = ""

    def __post_init__(self):
        if len(self.coefficients) == 0:
            raise ValueError("PropertyCurve needs at least one coefficient")
        lo, hi = self.valid_range
        if not lo < hi:
            raise ValueError(f"valid_range must satisfy lo < hi, got ({lo}, {hi})")
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        object.__setattr__(self, "valid_range", (float(lo), float(hi)))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1


def constant_curve(value: float, valid_range=(250.0, 500.0), unit: str = "") -> PropertyCurve:
    return PropertyCurve((float(value),), valid_range, unit)


def eval_curve(curve: PropertyCurve, theta):
    """Evaluate the curve at temperature theta (K); scalar or ndarray.

    Horner evaluation at clamp(theta, lo, hi): exact polynomial inside the
    fitted range, constant extrapolation outside. Total (never raises).
    """
    lo, hi = curve.valid_range
    t = np.clip(theta, lo, hi)
    out = np.polynomial.polynomial.polyval(t, curve.coefficients)
    if np.isscalar(theta):
        return float(out)
    return out


def curve_derivative(curve: PropertyCurve, theta):
    """d(curve)/d(theta), zero on the clamped plateaus.

    Exactly at the range endpoints the interior one-sided derivative is
    returned, so Newton linearizations stay consistent with eval_curve.
    """
    lo, hi = curve.valid_range
    c = curve.coefficients
    dcoeffs = tuple(k * c[k] for k in range(1, len(c))) or (0.0,)
    t = np.clip(theta, lo, hi)
    inner = np.polynomial.polynomial.polyval(t, dcoeffs)
    out = np.where((np.asarray(theta) >= lo) & (np.asarray(theta) <= hi), inner, 0.0)
    if np.isscalar(theta):
        return float(out)
    return out


@dataclass(frozen=True)
class SolidMaterial:
    """Host solid: density plus temperature-dependent c_s and k_s."""

    name: str
    density: float  # kg/m^3
    specific_heat: PropertyCurve  # J/(kg*K)
    conductivity: PropertyCurve  # W/(m*K), isotropic scalar

    def __post_init__(self):
        if self.density <= 0:
            raise ValueError(f"density must be positive, got {self.density}")


@dataclass(frozen=True)
class Coolant:
    """Constant-property coolant (water by default in scenarios)."""

    density: float  # kg/m^3
    specific_heat: float  # J/(kg*K)
    flow_rate: float  # m^3/s

    def __post_init__(self):
        if self.density <= 0 or self.specific_heat <= 0:
            raise ValueError("coolant density and specific heat must be positive")
        if self.flow_rate < 0:
            raise ValueError("flow rate must be non-negative")


@dataclass(frozen=True)
class EllipticityReport:
    k1: float  # W/(m*K), sampled lower bound of k_s
    sampled_min: float
    sampled_max: float
    sample_count: int
    passed: bool


def heat_capacity_rate(coolant: Coolant) -> float:
    """chi = rho_f * Q * c_f in W/K."""
    return coolant.density * coolant.flow_rate * coolant.specific_heat


def check_ellipticity(material: SolidMaterial, samples: int = 101) -> EllipticityReport:
    """Sample k_s over its fitted range and report the lower bound k1.

    passed is True iff k1 > 0. Non-positive minima produce a failing
    report rather than an exception, so invalid curves can be surfaced.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    lo, hi = material.conductivity.valid_range
    theta = np.linspace(lo, hi, samples)
    values = eval_curve(material.conductivity, theta)
    k1 = float(np.min(values))
    return EllipticityReport(
        k1=k1,
        sampled_min=k1,
        sampled_max=float(np.max(values)),
        sample_count=samples,
        passed=k1 > 0.0,
    )


def _curve_from_dict(d: dict, unit_default: str = "") -> PropertyCurve:
    return PropertyCurve(
        coefficients=tuple(d["coeffs"]),
        valid_range=tuple(d["range"]),
        unit=d.get("unit", unit_default),
    )


def material_from_dict(d: dict, mode: str = "TDMP") -> SolidMaterial:
    """Build a SolidMaterial from the coefficients-file record format.

    mode="CMP" collapses both curves to constants sampled at room
    temperature (296.15 K), mode="TDMP" keeps the fitted polynomials.
    """
    mode = mode.upper()
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    c_s = _curve_from_dict(d["c_s"], "J/(kg*K)")
    k_s = _curve_from_dict(d["k_s"], "W/(m*K)")
    if mode == "CMP":
        c_s = PropertyCurve((eval_curve(c_s, REFERENCE_TEMPERATURE),), c_s.valid_range, c_s.unit)
        k_s = PropertyCurve((eval_curve(k_s, REFERENCE_TEMPERATURE),), k_s.valid_range, k_s.unit)
    return SolidMaterial(
        name=f"{d['name']}:{mode}",
        density=float(d["density"]),
        specific_heat=c_s,
        conductivity=k_s,
    )


def _builtin_records() -> dict[str, dict]:
    text = resources.files("vasctherm.data").joinpath("material_coefficients.json").read_text()
    data = json.loads(text)
    return {rec["name"]: rec for rec in data["materials"]}


def builtin_material(name: str, mode: str = "TDMP") -> SolidMaterial:
    """One of the shipped host materials (cfrp_like, gfrp_like, epoxy_like)."""
    records = _builtin_records()
    if name not in records:
        raise KeyError(f"unknown material {name!r}; built-ins: {sorted(records)}")
    return material_from_dict(records[name], mode)


def builtin_names() -> list[str]:
    return sorted(_builtin_records())


def load_material_file(path, name: str | None = None, mode: str = "TDMP") -> SolidMaterial:
    """Load a material from a user coefficients file (same schema as the
    shipped material_coefficients.json; a file holding a single record is
    also accepted)."""
    with open(path) as fh:
        data = json.load(fh)
    if "materials" in data:
        records = {rec["name"]: rec for rec in data["materials"]}
        if name is None:
            if len(records) != 1:
                raise ValueError(f"file holds {sorted(records)}; pass name=")
            name = next(iter(records))
        if name not in records:
            raise KeyError(f"material {name!r} not in file; found {sorted(records)}")
        return material_from_dict(records[name], mode)
    return material_from_dict(data, mode)


def water_coolant(flow_rate_ml_per_min: float = 1.0) -> Coolant:
    """Table-defaults coolant: water at rho=1000, c_f=4183, Q in mL/min."""
    return Coolant(
        density=1000.0,
        specific_heat=4183.0,
        flow_rate=flow_rate_ml_per_min * 1e-6 / 60.0,
    )

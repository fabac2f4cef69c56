"""Nonlinear steady solves (damped Newton) and BDF time integration.

Each implicit BDF step reuses the steady Newton machinery on the
transient residual. Fixed order 1 or 2 with a constant step: a BDF1
startup step followed by BDF2 keeps the integrator second order without
variable-order bookkeeping.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .assembly import (
    ALL_TERMS,
    DiscreteSystem,
    RateWeights,
    TemperatureField,
    TermMask,
    ThermalProblem,
    assemble_raw,
    apply_constraints,
)


class SolverError(RuntimeError):
    pass


class SingularSystemError(SolverError):
    pass


class NewtonError(SolverError):
    def __init__(self, message, log=None, theta=None, residual_norm=None):
        super().__init__(message)
        self.log = log or []
        self.theta = theta
        self.residual_norm = residual_norm


class TransientError(SolverError):
    def __init__(self, message, series=None, cause=None):
        super().__init__(message)
        self.series = series
        self.cause = cause


@dataclass(frozen=True)
class NewtonSettings:
    abs_tol: float = 1e-8  # residual 2-norm, W
    rel_tol: float = 1e-12  # reduction relative to the first residual
    max_iters: int = 25
    damping: float = 1.0
    line_search: bool = True

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")


@dataclass(frozen=True)
class TransientSettings:
    dt: float = 1.0  # s
    t_end: float = 1500.0  # s
    bdf_order: int = 2

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_end < self.dt:
            raise ValueError("t_end must be at least one step")
        if self.bdf_order not in (1, 2):
            raise ValueError("bdf_order must be 1 or 2")

    @property
    def n_steps(self) -> int:
        steps = round(self.t_end / self.dt)
        if abs(steps * self.dt - self.t_end) > 1e-9 * max(1.0, self.t_end):
            raise ValueError("t_end must be an integer multiple of dt")
        return int(steps)


@dataclass(frozen=True)
class NewtonIteration:
    step: int
    iteration: int
    residual_norm: float
    damping: float


@dataclass(eq=False)
class SolutionSeries:
    """Temperature history: fields[0] is the initial state at t = 0."""

    fields: list[TemperatureField]
    newton_iters: list[int] = field(default_factory=list)
    residual_norms: list[float] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([f.time for f in self.fields])

    @property
    def final(self) -> TemperatureField:
        return self.fields[-1]

    def __len__(self) -> int:
        return len(self.fields)


def linear_solve(system: DiscreteSystem, method: str = "direct") -> np.ndarray:
    """Newton update: solve J delta = -R.

    direct uses a sparse LU factorization; iterative uses restarted GMRES
    preconditioned with an incomplete LU. Both are deterministic for
    fixed inputs.
    """
    J = system.jacobian.tocsc()
    rhs = -system.residual
    if method == "direct":
        try:
            lu = spla.splu(J)
        except RuntimeError as exc:  # SuperLU reports exact singularity
            raise SingularSystemError(f"sparse factorization failed: {exc}") from exc
        pivots = np.abs(lu.U.diagonal())
        if pivots.min() <= 1e-13 * pivots.max():
            raise SingularSystemError(
                "numerically singular system: pivot ratio "
                f"{pivots.min():.3e} / {pivots.max():.3e}"
            )
        delta = lu.solve(rhs)
    elif method == "iterative":
        try:
            ilu = spla.spilu(J, drop_tol=1e-6, fill_factor=20.0)
        except RuntimeError as exc:
            raise SingularSystemError(f"incomplete factorization failed: {exc}") from exc
        M = spla.LinearOperator(J.shape, ilu.solve)
        delta, info = spla.gmres(J, rhs, M=M, rtol=1e-12, atol=0.0, restart=60, maxiter=2000)
        if info != 0:
            raise SolverError(f"GMRES did not converge (info={info})")
    else:
        raise ValueError(f"unknown linear solver {method!r}")
    if not np.all(np.isfinite(delta)):
        raise SingularSystemError("linear solve produced non-finite update (singular system?)")
    return delta


def solve_steady(
    problem: ThermalProblem,
    settings: NewtonSettings | None = None,
    theta_guess: np.ndarray | None = None,
    time: float = 0.0,
    rate: RateWeights | None = None,
    terms: TermMask = ALL_TERMS,
    log: list | None = None,
    step_index: int = 0,
    linear_method: str = "direct",
) -> TemperatureField:
    """Damped Newton on the (steady or, via rate, transient) residual.

    The guess is first projected onto the constraints so every iterate
    satisfies them exactly and the logged norms are pure weak-form
    residuals in watts.
    """
    settings = settings or NewtonSettings()
    if theta_guess is None:
        theta = np.full(problem.n_dofs, problem.surface.theta_amb)
    else:
        theta = np.array(theta_guess, dtype=float, copy=True)
    constraints = problem.constrained_values()
    if constraints:
        ids = np.fromiter(constraints.keys(), dtype=int)
        theta[ids] = np.fromiter((constraints[int(i)] for i in ids), dtype=float)

    system = apply_constraints(assemble_raw(problem, theta, time=time, rate=rate, terms=terms))
    rnorm = float(np.linalg.norm(system.residual))
    r0 = rnorm
    if log is not None:
        log.append(NewtonIteration(step_index, 0, rnorm, 0.0))
    if rnorm <= settings.abs_tol:
        return _accept(theta, time)

    for it in range(1, settings.max_iters + 1):
        delta = linear_solve(system, method=linear_method)
        lam = settings.damping
        while True:
            trial = theta + lam * delta
            trial_system = apply_constraints(
                assemble_raw(problem, trial, time=time, rate=rate, terms=terms)
            )
            trial_norm = float(np.linalg.norm(trial_system.residual))
            if not settings.line_search or trial_norm < rnorm or lam <= 1.0 / 64.0:
                break
            lam *= 0.5
        theta, system, rnorm = trial, trial_system, trial_norm
        if log is not None:
            log.append(NewtonIteration(step_index, it, rnorm, lam))
        if rnorm <= settings.abs_tol or rnorm <= settings.rel_tol * r0:
            return _accept(theta, time)

    raise NewtonError(
        f"Newton did not converge in {settings.max_iters} iterations "
        f"(residual {rnorm:.3e} W, started at {r0:.3e} W)",
        log=log, theta=theta, residual_norm=rnorm,
    )


def _accept(theta: np.ndarray, time: float) -> TemperatureField:
    field_out = TemperatureField(theta, time=time)
    if not field_out.kelvin_positive:
        warnings.warn(
            "accepted solution violates kelvin positivity (theta <= 0 somewhere)",
            RuntimeWarning,
        )
    return field_out


def solve_transient(
    problem: ThermalProblem,
    tsettings: TransientSettings | None = None,
    nsettings: NewtonSettings | None = None,
    log: list | None = None,
    linear_method: str = "direct",
) -> SolutionSeries:
    """Integrate from theta_initial with fixed-step BDF1/BDF2.

    On a Newton failure the partial series is attached to the raised
    TransientError.
    """
    tsettings = tsettings or TransientSettings()
    nsettings = nsettings or NewtonSettings()
    dt = tsettings.dt
    initial = problem.initial_field()
    series = SolutionSeries(fields=[initial], newton_iters=[0], residual_norms=[0.0])
    theta_prev = initial.values
    theta_prev2 = None

    for k in range(tsettings.n_steps):
        t_next = (k + 1) * dt
        if tsettings.bdf_order == 1 or theta_prev2 is None:
            rate = RateWeights(coeff=1.0 / dt, rhs=-theta_prev / dt)
            guess = theta_prev
        else:
            rate = RateWeights(
                coeff=1.5 / dt, rhs=(-2.0 * theta_prev + 0.5 * theta_prev2) / dt
            )
            guess = 2.0 * theta_prev - theta_prev2  # linear predictor
        step_log: list = [] if log is None else log
        try:
            field_next = solve_steady(
                problem,
                settings=nsettings,
                theta_guess=guess,
                time=t_next,
                rate=rate,
                log=step_log,
                step_index=k + 1,
                linear_method=linear_method,
            )
        except SolverError as exc:
            raise TransientError(
                f"time step {k + 1} (t={t_next:g} s) failed: {exc}",
                series=series, cause=exc,
            ) from exc
        own = [rec for rec in step_log if rec.step == k + 1]
        series.fields.append(field_next)
        series.newton_iters.append(max((rec.iteration for rec in own), default=0))
        series.residual_norms.append(own[-1].residual_norm if own else 0.0)
        theta_prev2, theta_prev = theta_prev, field_next.values
    return series

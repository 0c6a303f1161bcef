"""Empirical checks of the inertial-manifold properties on a computed chart.

Invariance and exponential tracking are tested by evolving samples with the
exponential Euler integrator; dissipativity by fitting the discrete energy
inequality |u_{k+1}|^2 <= (1 - c dt)|u_k|^2 + B dt to an energy series.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .errors import DegenerateFitError, ExtrapolationError, ParameterError
from .lyapunov_perron import ManifoldChart, chart_eval, interpolate
from .solver import SolveProblem, evolve_array
from .spectral import SpectralField, SpectrumModel

__all__ = [
    "InvarianceReport",
    "TrackingReport",
    "DissipationReport",
    "invariance_residual",
    "tracking_fit",
    "energy_monitor",
    "report_record",
]


def _check_chart(chart: ManifoldChart, problem: SolveProblem):
    if chart.M != problem.model.M or chart.model.epsilon != problem.model.epsilon:
        raise ParameterError("chart and problem disagree on M or epsilon")
    if chart.model.alpha != problem.model.alpha:
        raise ParameterError("chart and problem disagree on alpha")


@dataclass(frozen=True)
class InvarianceReport:
    t_test: float
    max_residual: float
    relative: float
    n_samples: int
    n_excluded: int


def invariance_residual(
    chart: ManifoldChart, problem: SolveProblem, t_test: float, samples, dt: float = 0.01
) -> InvarianceReport:
    """max |Q u(t) - Phi(P u(t))| over samples started on the chart.

    Samples whose evolved low-mode part leaves the chart box are dropped with
    a warning.
    """
    _check_chart(chart, problem)
    if t_test < 0:
        raise ParameterError("t_test must be >= 0")
    N = chart.N
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    start = np.array([chart_eval(chart, p).coeffs for p in samples])
    start[:, :N] = samples
    if t_test > 0:
        end = evolve_array(start, t_test, dt, problem)[0]
    else:
        end = start
    res, excluded = [], 0
    for u in end:
        try:
            phi = interpolate(chart.grid, chart.phi, u[:N])
        except ExtrapolationError:
            excluded += 1
            continue
        res.append(float(np.linalg.norm(u[N:] - phi)))
    if excluded:
        warnings.warn(f"{excluded} evolved samples left the chart box and were excluded")
    worst = max(res) if res else float("nan")
    scale = chart.sup_norm()
    return InvarianceReport(
        t_test, worst, worst / scale if scale > 0 else worst, len(samples), excluded
    )


@dataclass(frozen=True)
class TrackingReport:
    eta: float
    beta: float
    r2: float
    times: np.ndarray
    distances: np.ndarray


def tracking_fit(
    u0: SpectralField,
    chart: ManifoldChart,
    problem: SolveProblem,
    horizon: float,
    dt: float,
    min_efolds: float = 3.0,
) -> TrackingReport:
    """Fit |u(t) - v(t)| ~ eta e^{-beta t} |u0 - v0| with v0 = P u0 + Phi(P u0)."""
    _check_chart(chart, problem)
    N = chart.N
    rate = problem.model.lam(N + 1) - chart.sigma
    if horizon * rate < min_efolds:
        raise ParameterError(
            f"horizon {horizon:g} covers only {horizon * rate:.2f} e-foldings of "
            f"lambda_(N+1) - sigma (need {min_efolds:g})"
        )
    v0 = chart_eval(chart, u0.coeffs[:N]).coeffs.copy()
    v0[:N] = u0.coeffs[:N]
    pair = np.stack([u0.coeffs, v0])
    _, times, _, states, _ = evolve_array(pair, horizon, dt, problem, keep=True)
    dist = np.linalg.norm(states[:, 0] - states[:, 1], axis=-1)
    floor = 10 * np.finfo(float).eps * max(1.0, u0.norm())
    ok = dist > floor
    if ok.sum() < 3:
        raise DegenerateFitError("distance below round-off at (almost) every sample")
    fit = stats.linregress(times[ok], np.log(dist[ok]))
    d0 = dist[0] if dist[0] > 0 else np.exp(fit.intercept)
    return TrackingReport(
        eta=float(np.exp(fit.intercept) / d0),
        beta=float(-fit.slope),
        r2=float(fit.rvalue**2),
        times=times,
        distances=dist,
    )


@dataclass(frozen=True)
class DissipationReport:
    c: float
    B: float
    radius: float
    ok: bool
    window: tuple[int, int]
    message: str = ""


def energy_monitor(
    energy, times, g: SpectralField, model: SpectrumModel, tail_fraction: float = 0.5
) -> DissipationReport:
    """Fit the discrete inequality E_{k+1} <= (1 - c dt) E_k + B dt on the tail.

    c comes from a least-squares fit of (E_{k+1} - E_k)/dt against E_k; B is
    then the smallest value that makes the inequality hold at every tail step.
    When the tail is stationary (relative spread < 1e-8) the slope carries no
    information and c falls back to the linear rate 2 lambda_1.
    """
    E = np.asarray(energy, dtype=float)
    t = np.asarray(times, dtype=float)
    if E.size < 4 or E.size != t.size:
        raise ParameterError("need matching energy and time series of length >= 4")
    if g.M != model.M:
        raise ParameterError("forcing and model disagree on M")
    dt = float(t[1] - t[0])
    start = min(int(E.size * (1.0 - tail_fraction)), E.size - 3)
    Ek, Enext = E[start:-1], E[start + 1 :]
    y = (Enext - Ek) / dt
    spread = np.ptp(Ek) / max(np.max(np.abs(Ek)), 1e-300)
    if spread < 1e-8:
        c = 2.0 * model.lam(1)
    else:
        c = float(-np.polyfit(Ek, y, 1)[0])
    window = (start, E.size - 1)
    if not c > 0:
        return DissipationReport(c, float("nan"), float("nan"), False, window,
                                 f"non-dissipative fit c={c:.3g} on steps {window}")
    B = max(float(np.max((Enext - (1.0 - c * dt) * Ek) / dt)), 0.0)
    return DissipationReport(c, B, float(np.sqrt(B / c)), True, window)


def report_record(name: str, params: dict, values: dict, passed: bool) -> dict:
    """JSON-ready record (test name, parameters, measured values, pass flag)."""
    clean = {}
    for k, v in values.items():
        if isinstance(v, np.ndarray):
            continue
        clean[k] = float(v) if isinstance(v, (np.floating, float)) else v
    return {"test": name, "parameters": params, "values": clean, "pass": bool(passed)}


def as_dict(report) -> dict:
    return {k: v for k, v in asdict(report).items() if not isinstance(v, np.ndarray)}

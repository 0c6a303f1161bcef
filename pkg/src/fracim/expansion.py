"""Small-epsilon expansion Phi^eps = Phi^0 + eps Phi^1 + ... and M_eps -> M_0 studies.

Two modes for the corrections:

``paper_literal``
    u_k solves du_k/dt + A u_k + f^(k)(u_0)/k! u_k = 0 on (-inf, 0] with
    P_N u_k(0) = 0.  The equation is linear and homogeneous, so its bounded
    solution (and therefore Phi^k) is identically zero.

``corrected`` (order 1 only)
    u_1 solves du_1/dt + A_alpha u_1 + f'(u_0) u_1 = Laplacian(u_0), the
    equation obtained by differentiating the full problem in eps at eps = 0.
    For f = 0 this gives Phi^1_n = -n^2 g_n / Lambda_n^2.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, DependencyError, ParameterError, RegimeError
from .lyapunov_perron import (
    GridSpec,
    LPConfig,
    ManifoldChart,
    build_chart,
    integral_map,
    interpolate,
    picard,
)
from .solver import SolveProblem
from .spectral import SpectralField, analyze_array, synthesize_array

__all__ = [
    "ExpansionChart",
    "StudyRow",
    "StudyResult",
    "phi0_chart",
    "phi1_chart",
    "phik_chart",
    "build_expansion",
    "expansion_eval",
    "hausdorff_semidistance",
    "eps_convergence_study",
    "fit_slope",
]

MODES = ("paper_literal", "corrected")


def _base_problem(problem: SolveProblem) -> SolveProblem:
    base = problem.with_model(problem.model.with_epsilon(0.0))
    if base.model.alpha < 1.0:
        raise RegimeError(
            "0 < alpha < 1 with eps = 0: the gap decreases to zero, so no N satisfies the "
            "spectral gap condition and no inertial manifold M_0 exists"
        )
    return base


def phi0_chart(
    grid: GridSpec,
    problem: SolveProblem,
    N: int,
    sigma: float | None = None,
    config: LPConfig | None = None,
    threads: int = 1,
) -> ManifoldChart:
    """Chart of Phi^0 on the eps = 0 spectrum, keeping the u_0 trajectories."""
    base = _base_problem(problem)
    return build_chart(grid, base, N, sigma, config, threads, keep_trajectories=True)


def _linear_fixed_point(u0_values, times, problem, N, sigma, config, k, forced):
    """Bounded solution of du/dt + A u + f^(k)(u_0)/k! u = forcing on the stored grid."""
    lam = problem.model.eigenvalues
    f = problem.f
    modes = problem.model.modes
    forcing = -(modes**2) * u0_values if forced else np.zeros_like(u0_values)
    if f.kind == "zero" or (f.kind == "linear" and k > 1):
        coef = None
    elif f.kind == "linear":
        coef = f.c
    else:
        vals = synthesize_array(u0_values, problem.J)
        if k == 1:
            coef = f.derivative(vals)
        else:
            # higher derivatives by central differences of f'
            d = 1e-4
            coef = _nth_derivative(f, vals, k, d) / math.factorial(k)

    def apply(u):
        if coef is None:
            F = forcing
        elif np.isscalar(coef):
            F = forcing - coef * u
        else:
            prod = coef * synthesize_array(u, problem.J)
            F = forcing - analyze_array(prod, problem.model.M)
        return integral_map(F, None, lam, N, times, config.tail_mode)

    phi, history, ratio = picard(apply, np.zeros_like(u0_values), times, sigma, config.tol, config.max_iter)
    return phi[-1, N:] + 0.0, ratio, len(history)


def _nth_derivative(f, s, k, h):
    if k == 1:
        return f.derivative(s)
    return (_nth_derivative(f, s + h, k - 1, h) - _nth_derivative(f, s - h, k - 1, h)) / (2 * h)


def _corrections(base, problem, N, k, forced, threads):
    if base.trajectories is None or any(t is None for t in base.trajectories):
        raise DependencyError("Phi^0 chart carries no u_0 trajectories (build it with phi0_chart)")
    bp = _base_problem(problem)

    def one(traj):
        return _linear_fixed_point(traj.values, traj.times, bp, N, base.sigma, base.config, k, forced)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, base.trajectories))
    else:
        results = [one(t) for t in base.trajectories]
    phi = np.array([r[0] for r in results])
    return replace(
        base,
        phi=phi,
        iterations=np.array([r[2] for r in results]),
        contraction=np.array([r[1] for r in results]),
        trajectories=None,
    )


def phi1_chart(
    base: ManifoldChart, problem: SolveProblem, mode: str = "corrected", threads: int = 1
) -> ManifoldChart:
    """First-order correction Phi^1 on the grid of ``base`` (a Phi^0 chart)."""
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}")
    return _corrections(base, problem, base.N, 1, mode == "corrected", threads)


def phik_chart(
    base: ManifoldChart, problem: SolveProblem, k: int, mode: str = "paper_literal", threads: int = 1
) -> ManifoldChart:
    """Order-k correction; only the literal (homogeneous) hierarchy exists for k >= 2.

    Experimental: the literal equations always return zero corrections.
    """
    if k == 1:
        return phi1_chart(base, problem, mode, threads)
    if k < 1:
        raise ParameterError("k must be >= 1")
    if mode != "paper_literal":
        raise ParameterError("corrections of order >= 2 exist only in paper_literal mode")
    return _corrections(base, problem, base.N, k, False, threads)


@dataclass(frozen=True, eq=False)
class ExpansionChart:
    base: ManifoldChart
    corrections: tuple  # ManifoldChart per order 1..k
    mode: str

    @property
    def order(self) -> int:
        return len(self.corrections)


def build_expansion(
    grid: GridSpec,
    problem: SolveProblem,
    N: int,
    mode: str = "corrected",
    order: int = 1,
    sigma: float | None = None,
    config: LPConfig | None = None,
    threads: int = 1,
) -> ExpansionChart:
    base = phi0_chart(grid, problem, N, sigma, config, threads)
    corr = [phi1_chart(base, problem, mode, threads)]
    for k in range(2, order + 1):
        corr.append(phik_chart(base, problem, k, "paper_literal", threads))
    return ExpansionChart(base, tuple(corr), mode)


def expansion_eval(expansion: ExpansionChart, p, epsilon: float, order: int | None = None) -> SpectralField:
    """sum_{j <= order} eps^j Phi^j(p) by chart interpolation."""
    order = expansion.order if order is None else order
    if not 0 <= order <= expansion.order:
        raise ParameterError(f"order {order} exceeds stored order {expansion.order}")
    base = expansion.base
    total = interpolate(base.grid, base.phi, p)
    for j in range(1, order + 1):
        total = total + epsilon**j * interpolate(base.grid, expansion.corrections[j - 1].phi, p)
    a = np.zeros(base.M)
    a[base.N :] = total
    return SpectralField(a)


def _compatible(a: ManifoldChart, b: ManifoldChart):
    if a.N != b.N or a.M != b.M or a.grid != b.grid:
        raise ParameterError(
            f"incompatible charts: N {a.N}/{b.N}, M {a.M}/{b.M}, grid equal={a.grid == b.grid}"
        )


def hausdorff_semidistance(chart_a: ManifoldChart, chart_b: ManifoldChart) -> float:
    """sup over A's nodes of the distance from (p, Phi_A(p)) to B's sampled graph.

    B's graph is represented by its nodes; the same-p node is always a
    candidate, so the value bounds the true semi-distance from above.
    """
    _compatible(chart_a, chart_b)
    nodes = chart_a.grid.nodes()
    pts_a = np.hstack([nodes, chart_a.phi])
    pts_b = np.hstack([nodes, chart_b.phi])
    ok_a = np.all(np.isfinite(pts_a), axis=1)
    ok_b = np.all(np.isfinite(pts_b), axis=1)
    if not ok_a.any() or not ok_b.any():
        return float("nan")
    dist, _ = cKDTree(pts_b[ok_b]).query(pts_a[ok_a])
    return float(np.max(dist))


@dataclass(frozen=True)
class StudyRow:
    epsilon: float
    dist_H: float
    slope_running: float
    nodes_failed: int
    feasible: bool = True


@dataclass(frozen=True, eq=False)
class StudyResult:
    rows: tuple
    slope: float | None
    base: ManifoldChart
    charts: tuple


def fit_slope(eps, dist) -> float | None:
    """Least-squares slope of log(dist) against log(eps); None with < 2 points."""
    eps, dist = np.asarray(eps, float), np.asarray(dist, float)
    ok = np.isfinite(dist) & (dist > 0) & (eps > 0)
    if ok.sum() < 2:
        return None
    return float(np.polyfit(np.log(eps[ok]), np.log(dist[ok]), 1)[0])


def eps_convergence_study(
    eps_list,
    problem: SolveProblem,
    grid: GridSpec,
    N: int,
    sigma: float | None = None,
    config: LPConfig | None = None,
    threads: int = 1,
) -> StudyResult:
    """Build M_eps directly at each eps, compare with M_0, fit the log-log slope.

    ``sigma=None`` picks the window midpoint separately for every eps.
    """
    base_problem = _base_problem(problem)
    base = build_chart(grid, base_problem, N, sigma, config, threads)
    rows, charts, seen_e, seen_d = [], [], [], []
    for eps in eps_list:
        eps = float(eps)
        p_eps = problem.with_model(problem.model.with_epsilon(eps))
        try:
            chart = build_chart(grid, p_eps, N, sigma, config, threads)
        except ConfigError:
            rows.append(StudyRow(eps, float("nan"), float("nan"), grid.size, feasible=False))
            charts.append(None)
            continue
        d = hausdorff_semidistance(chart, base)
        seen_e.append(eps)
        seen_d.append(d)
        s = fit_slope(seen_e, seen_d)
        rows.append(StudyRow(eps, d, float("nan") if s is None else s, len(chart.failed)))
        charts.append(chart)
    return StudyResult(tuple(rows), fit_slope(seen_e, seen_d), base, tuple(charts))

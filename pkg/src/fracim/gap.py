"""Spectral-gap analysis: manifold dimension, sigma window and alpha regimes."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import FracimError, ParameterError
from .spectral import SpectrumModel, _check_alpha, _check_epsilon, eigenvalue

__all__ = [
    "Regime",
    "GapReport",
    "gap_sequence",
    "spectral_gap",
    "gap_derivative",
    "sigma_window",
    "find_gap_index",
    "classify_regime",
    "min_epsilon_for_gap",
]

DEFAULT_N_MAX = 10**6


class Regime(str, enum.Enum):
    ALPHA_ONE = "AlphaOne"
    ALPHA_ABOVE_ONE = "AlphaAboveOne"
    ALPHA_BELOW_ONE = "AlphaBelowOne"


@dataclass(frozen=True)
class GapReport:
    """Outcome of a gap search.

    ``gap_holds`` is the plain condition gap > 2 l_f.  ``feasible`` additionally
    requires a nonempty sigma window (gap > 2 l_f (K1 + K1 K2)), which is what
    the Lyapunov-Perron contraction actually needs.
    """

    N: int
    gap: float
    threshold: float
    sigma_window: tuple[float, float]
    sigma: float | None
    regime: Regime
    gap_holds: bool
    feasible: bool
    l_f: float
    alpha: float
    epsilon: float


def gap_sequence(n, alpha: float, epsilon: float):
    """lambda_{n+1} - lambda_n in closed form, vectorised over ``n``.

    The fractional part is evaluated as y**a * expm1(a*log1p(1/(2y))) so that
    gaps stay accurate for n ~ 1e6 where both eigenvalues are large.
    """
    _check_alpha(alpha)
    _check_epsilon(epsilon)
    n = np.asarray(n, dtype=float)
    y = 0.5 * n - (2.0 - alpha) / 8.0
    frac = y**alpha * np.expm1(alpha * np.log1p(0.5 / y))
    out = epsilon * (2.0 * n + 1.0) + frac
    return float(out) if out.ndim == 0 else out


def spectral_gap(n: int, model: SpectrumModel) -> float:
    """lambda_{n+1} - lambda_n for 1 <= n < M."""
    if int(n) != n or not 1 <= n < model.M:
        raise ParameterError(f"gap index {n!r} outside 1..{model.M - 1}")
    return gap_sequence(n, model.alpha, model.epsilon)


def gap_derivative(n: float, model: SpectrumModel) -> float:
    """d/dn of the gap with the gamma*o(1/n^2) remainder dropped."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    a = model.alpha
    c = (2.0 - a) / 8.0
    bracket = ((n + 1) / 2 - c) ** (a - 1) - (n / 2 - c) ** (a - 1)
    return 2.0 * model.epsilon + 0.5 * a * bracket


def sigma_window(N: int, model: SpectrumModel, l_f: float) -> tuple[float, float]:
    lo = eigenvalue(N, model.alpha, model.epsilon) + 2.0 * l_f * model.K1
    hi = eigenvalue(N + 1, model.alpha, model.epsilon) - 2.0 * l_f * model.K1 * model.K2
    return lo, hi


def _report(N: int, model: SpectrumModel, l_f: float) -> GapReport:
    gap = gap_sequence(N, model.alpha, model.epsilon)
    lo, hi = sigma_window(N, model, l_f)
    sigma = 0.5 * (lo + hi) if hi > lo else None
    holds = gap > 2.0 * l_f
    return GapReport(
        N=int(N),
        gap=gap,
        threshold=2.0 * l_f,
        sigma_window=(lo, hi),
        sigma=sigma,
        regime=classify_regime(model.alpha)[0],
        gap_holds=holds,
        feasible=bool(holds and sigma is not None and lo < sigma < hi),
        l_f=l_f,
        alpha=model.alpha,
        epsilon=model.epsilon,
    )


def report_for(N: int, model: SpectrumModel, l_f: float) -> GapReport:
    """GapReport for a user-chosen N (no search)."""
    if not 1 <= N < model.M:
        raise ParameterError(f"N={N} outside 1..{model.M - 1}")
    return _report(N, model, l_f)


def find_gap_index(
    model: SpectrumModel,
    l_f: float,
    n_max: int | None = None,
    *,
    require_window: bool = False,
) -> GapReport | None:
    """Smallest N <= n_max with gap(N) > 2 l_f, or None.

    With ``require_window`` the search asks for a nonempty sigma window
    instead, i.e. gap(N) > 2 l_f (K1 + K1 K2).
    """
    if l_f < 0:
        raise ParameterError("l_f must be nonnegative")
    if n_max is None:
        n_max = min(DEFAULT_N_MAX, model.M - 1)
    if n_max > model.M - 1:
        raise ParameterError(f"n_max={n_max} exceeds M-1={model.M - 1}")
    if n_max < 1:
        return None
    need = 2.0 * l_f * (model.K1 + model.K1 * model.K2) if require_window else 2.0 * l_f
    chunk = 1 << 18
    for start in range(1, n_max + 1, chunk):
        n = np.arange(start, min(start + chunk, n_max + 1), dtype=float)
        hit = np.flatnonzero(gap_sequence(n, model.alpha, model.epsilon) > need)
        if hit.size:
            return _report(int(n[hit[0]]), model, l_f)
    return None


_RATIONALE = {
    Regime.ALPHA_ONE: "alpha = 1: gap = eps(2n+1) + 1/2, constant 1/2 at eps = 0",
    Regime.ALPHA_ABOVE_ONE: "1 < alpha < 2: gap increases without bound in n",
    Regime.ALPHA_BELOW_ONE: "0 < alpha < 1: gap decreases to 0 at eps = 0; needs eps > 0",
}


def classify_regime(alpha: float) -> tuple[Regime, str]:
    _check_alpha(alpha)
    if alpha == 1.0:
        r = Regime.ALPHA_ONE
    elif alpha > 1.0:
        r = Regime.ALPHA_ABOVE_ONE
    else:
        r = Regime.ALPHA_BELOW_ONE
    return r, _RATIONALE[r]


def min_epsilon_for_gap(
    alpha: float,
    l_f: float,
    n_max: int,
    eps_grid,
    *,
    require_window: bool = False,
) -> float | None:
    """Smallest grid epsilon for which a gap index exists within n_max."""
    grid = sorted(float(e) for e in eps_grid)
    if not grid:
        raise ParameterError("eps_grid is empty")
    ok = [
        find_gap_index(SpectrumModel(alpha, e, n_max + 1), l_f, n_max, require_window=require_window)
        is not None
        for e in grid
    ]
    if True not in ok:
        return None
    first = ok.index(True)
    if not all(ok[first:]):
        raise FracimError("gap existence is not monotone on the epsilon grid")
    return grid[first]

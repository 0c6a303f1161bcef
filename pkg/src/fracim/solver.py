"""Time integration of du/dt + A_eps u = F(u), F(u) = g - f(u), in spectral form.

The nonlinearity ``f`` acts pointwise and is evaluated on the collocation grid.
For polynomial nonlinearities of degree <= 3 a grid of J >= 2M nodes returns
the exact Galerkin projection onto modes 1..M (aliases of modes up to 3M land
above M).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NumericError, ParameterError
from .spectral import SpectralField, SpectrumModel, analyze_array, synthesize_array

__all__ = [
    "NonlinearSpec",
    "SolveProblem",
    "EvolveResult",
    "rhs_nonlinear",
    "step_exponential_euler",
    "evolve",
    "estimate_lipschitz",
    "validate_assumption_iii",
]

BLOWUP_NORM = 1e6


@dataclass(frozen=True)
class NonlinearSpec:
    """A pointwise nonlinearity f(s).

    ``radius`` is the pointwise amplitude R of the ball on which the Lipschitz
    bound is stated.  For ``cubic`` and ``custom`` kinds f is saturated outside
    [-R, R] (f(s) := f(clip(s, -R, R))), which makes it globally Lipschitz with
    the bound it has on the ball.  Inside an absorbing set with |u| <= R the
    saturated and raw nonlinearities coincide.
    """

    kind: str
    c: float = 0.0
    a: float = 0.0
    b: float = 0.0
    radius: float | None = None
    func: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    dfunc: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("zero", "linear", "cubic", "custom"):
            raise ParameterError(f"unknown nonlinearity kind {self.kind!r}")
        if self.kind == "custom" and self.func is None:
            raise ParameterError("custom nonlinearity needs func")
        if self.radius is not None and not self.radius > 0:
            raise ParameterError("radius must be positive")

    @classmethod
    def zero(cls) -> "NonlinearSpec":
        return cls("zero")

    @classmethod
    def linear(cls, c: float) -> "NonlinearSpec":
        return cls("linear", c=float(c))

    @classmethod
    def cubic(cls, a: float, b: float = 0.0, radius: float | None = None) -> "NonlinearSpec":
        return cls("cubic", a=float(a), b=float(b), radius=radius)

    @classmethod
    def custom(cls, func, dfunc=None, radius=None, name="custom") -> "NonlinearSpec":
        return cls("custom", func=func, dfunc=dfunc, radius=radius, name=name)

    def _clip(self, s):
        if self.radius is None or self.kind in ("zero", "linear"):
            return s
        return np.clip(s, -self.radius, self.radius)

    def evaluate(self, s, saturate: bool = True) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if saturate:
            s = self._clip(s)
        if self.kind == "zero":
            return np.zeros_like(s)
        if self.kind == "linear":
            return self.c * s
        if self.kind == "cubic":
            return self.a * s**3 + self.b * s
        return np.asarray(self.func(s), dtype=float)

    def derivative(self, s, saturate: bool = True) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        inside = np.ones(s.shape, dtype=bool)
        if saturate and self.radius is not None and self.kind in ("cubic", "custom"):
            inside = np.abs(s) < self.radius
        if self.kind == "zero":
            d = np.zeros_like(s)
        elif self.kind == "linear":
            d = np.full_like(s, self.c)
        elif self.kind == "cubic":
            d = 3.0 * self.a * s**2 + self.b
        elif self.dfunc is not None:
            d = np.asarray(self.dfunc(s), dtype=float)
        else:
            h = 1e-6 * np.maximum(1.0, np.abs(s))
            d = (self.func(s + h) - self.func(s - h)) / (2 * h)
        return np.where(inside, d, 0.0)

    @property
    def lipschitz(self) -> float:
        """l_f on the stated ball (closed form where available)."""
        if self.kind in ("zero", "linear"):
            return estimate_lipschitz(self, 1.0)
        if self.radius is None:
            raise ParameterError(f"{self.kind} nonlinearity needs a ball radius for l_f")
        return estimate_lipschitz(self, self.radius)

    def descriptor(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "linear":
            d["c"] = self.c
        elif self.kind == "cubic":
            d.update(a=self.a, b=self.b)
        elif self.kind == "custom":
            d["name"] = self.name
        if self.radius is not None:
            d["radius"] = self.radius
        return d


@dataclass(frozen=True, eq=False)
class SolveProblem:
    """du/dt - eps u_xx + (-Laplacian)^(alpha/2) u + f(u) = g."""

    model: SpectrumModel
    f: NonlinearSpec
    g: SpectralField
    u0: SpectralField | None = None
    J: int | None = None

    def __post_init__(self):
        M = self.model.M
        if self.g.M != M or (self.u0 is not None and self.u0.M != M):
            raise ParameterError("mode counts of model, forcing and initial state disagree")
        J = 2 * M if self.J is None else int(self.J)
        if J < 2 * M:
            raise ParameterError(f"collocation grid needs J >= 2M = {2 * M}")
        object.__setattr__(self, "J", J)

    def with_model(self, model: SpectrumModel) -> "SolveProblem":
        return SolveProblem(model, self.f, self.g, self.u0, self.J)

    def equilibrium_linear(self) -> SpectralField:
        """A^{-1} g, the equilibrium when f = 0."""
        return SpectralField(self.g.coeffs / self.model.eigenvalues)


def nonlinear_term(coeffs: np.ndarray, problem: SolveProblem) -> np.ndarray:
    """Spectral coefficients of f(u) for coefficient rows (..., M)."""
    f = problem.f
    if f.kind == "zero":
        return np.zeros_like(coeffs)
    if f.kind == "linear":
        return f.c * coeffs
    vals = synthesize_array(coeffs, problem.J)
    return analyze_array(f.evaluate(vals), problem.model.M)


def rhs_array(coeffs: np.ndarray, problem: SolveProblem) -> np.ndarray:
    out = problem.g.coeffs - nonlinear_term(coeffs, problem)
    if not np.all(np.isfinite(out)):
        raise NumericError("non-finite values in the nonlinear term")
    return out


def rhs_nonlinear(u: SpectralField, problem: SolveProblem) -> SpectralField:
    """F(u) = g - f(u), projected onto modes 1..M."""
    return SpectralField(rhs_array(u.coeffs, problem))


def _euler_factors(model: SpectrumModel, dt: float):
    lam = model.eigenvalues
    return np.exp(-lam * dt), -np.expm1(-lam * dt) / lam


def step_array(coeffs, dt, problem, factors=None):
    decay, phi = factors if factors is not None else _euler_factors(problem.model, dt)
    return decay * coeffs + phi * rhs_array(coeffs, problem)


def step_exponential_euler(u: SpectralField, dt: float, problem: SolveProblem) -> SpectralField:
    """One exponential Euler step: linear part exact, F frozen over the step."""
    if not dt > 0:
        raise ParameterError("dt must be positive")
    return SpectralField(step_array(u.coeffs, dt, problem))


@dataclass(frozen=True, eq=False)
class EvolveResult:
    final: SpectralField
    times: np.ndarray
    energy: np.ndarray  # |u(t_k)|^2
    dt: float
    states: np.ndarray | None = None


def _step_plan(t_end: float, dt: float):
    if t_end < 0:
        raise ParameterError("t_end must be >= 0")
    if not dt > 0:
        raise ParameterError("dt must be positive")
    n = math.ceil(t_end / dt - 1e-9) if t_end > 0 else 0
    return n, (t_end / n if n else dt)


def evolve_array(coeffs: np.ndarray, t_end: float, dt: float, problem: SolveProblem, keep=False):
    """Evolve a batch of states (..., M); returns (final, times, energies[, states])."""
    n, h = _step_plan(t_end, dt)
    factors = _euler_factors(problem.model, h)
    u = np.array(coeffs, dtype=float)
    energy = [np.sum(u**2, axis=-1)]
    states = [u] if keep else None
    for k in range(n):
        u = step_array(u, h, problem, factors)
        e = np.sum(u**2, axis=-1)
        if not np.all(np.isfinite(e)) or np.any(e > BLOWUP_NORM**2):
            raise NumericError(
                f"blow-up at t={(k + 1) * h:.6g}: |u| = {np.sqrt(np.max(e)):.3g} > {BLOWUP_NORM:g}"
            )
        energy.append(e)
        if keep:
            states.append(u)
    times = h * np.arange(n + 1)
    return u, times, np.array(energy), (np.array(states) if keep else None), h


def evolve(
    u0: SpectralField, t_end: float, dt: float, problem: SolveProblem, keep_states: bool = False
) -> EvolveResult:
    """Repeated exponential Euler steps; dt is shrunk so steps tile [0, t_end]."""
    u, times, energy, states, h = evolve_array(u0.coeffs, t_end, dt, problem, keep_states)
    return EvolveResult(SpectralField(u), times, energy, h, states)


def estimate_lipschitz(f: NonlinearSpec, R: float, samples: int = 4001) -> float:
    """Lipschitz constant of f on [-R, R].

    Closed form for zero/linear/cubic; for custom f the sampled supremum of
    difference quotients, which is a lower bound.
    """
    if not R > 0:
        raise ParameterError("R must be positive")
    if f.kind == "zero":
        return 0.0
    if f.kind == "linear":
        return abs(f.c)
    if f.kind == "cubic":
        return max(abs(3.0 * f.a * R * R + f.b), abs(f.b))
    s = np.linspace(-R, R, samples)
    v = f.evaluate(s, saturate=False)
    if not np.all(np.isfinite(v)):
        raise NumericError("non-finite sample of custom nonlinearity")
    return float(np.max(np.abs(np.diff(v) / np.diff(s))))


def validate_assumption_iii(
    f: NonlinearSpec,
    p: float,
    C: float,
    s_range: tuple[float, float] = (-10.0, 10.0),
    samples: int = 4001,
) -> tuple[bool, float]:
    """Check C|s|^p - C <= f(s) s <= C|s|^p + C on a grid; returns (ok, min slack)."""
    if p < 2 or not C > 0:
        raise ParameterError("need p >= 2 and C > 0")
    s = np.linspace(s_range[0], s_range[1], samples)
    fs = f.evaluate(s, saturate=False) * s
    growth = C * np.abs(s) ** p
    slack = np.minimum(fs - (growth - C), (growth + C) - fs)
    worst = float(np.min(slack))
    return worst >= -1e-12 * max(1.0, float(np.max(growth))), worst

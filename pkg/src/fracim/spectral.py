"""Diagonal spectral model of A_eps = -eps*Laplacian + (-Laplacian)^(alpha/2) on (-pi, pi).

Every state is stored as a coefficient vector in one shared sine basis,

    phi_n(x) = sin(n (x + pi) / 2) / sqrt(pi),    n = 1..M,

which is orthonormal in L^2(-pi, pi) and vanishes at both endpoints.  Both
operators are taken to be diagonal in this basis with eigenvalues

    lambda_n = eps * n**2 + (n/2 - (2 - alpha)/8)**alpha

(the o(1/n) remainder of the fractional asymptotics is dropped).  Pointwise
nonlinearities are evaluated on the interior DST-I collocation grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft

from .errors import ContractError, NumericError, ParameterError

__all__ = [
    "SpectrumModel",
    "SpectralField",
    "PhysicalGrid",
    "base_eigenvalue",
    "eigenvalue",
    "semigroup_apply",
    "project",
    "grid_nodes",
    "synthesize",
    "analyze",
    "spectral_tail_ok",
]


def _check_alpha(alpha):
    if not (0.0 < alpha < 2.0):
        raise ParameterError(f"alpha must lie in (0, 2), got {alpha!r}")


def _check_epsilon(epsilon):
    if not (0.0 <= epsilon < 1.0):
        raise ParameterError(f"epsilon must lie in [0, 1), got {epsilon!r}")


def base_eigenvalue(n, alpha):
    """Eigenvalues Lambda_n = (n/2 - (2-alpha)/8)**alpha of the fractional part.

    Accepts scalars or arrays of mode indices ``n >= 1``.
    """
    _check_alpha(alpha)
    n = np.asarray(n, dtype=float)
    if np.any(n < 1):
        raise ParameterError("mode index must be >= 1")
    out = (0.5 * n - (2.0 - alpha) / 8.0) ** alpha
    return float(out) if out.ndim == 0 else out


def eigenvalue(n, alpha, epsilon):
    """lambda_n = epsilon * n**2 + Lambda_n (scalar or vectorised over ``n``).

    >>> eigenvalue(1, 1.0, 0.0)
    0.375
    >>> eigenvalue(2, 1.0, 0.5)
    2.875
    """
    _check_epsilon(epsilon)
    lam = base_eigenvalue(n, alpha)
    n = np.asarray(n, dtype=float)
    out = epsilon * n * n + lam
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class SpectrumModel:
    """Diagonal model of A_eps truncated to ``M`` modes.

    ``K1`` and ``K2`` are the exponential-dichotomy constants; 1 is exact for a
    self-adjoint diagonal generator, larger values are only useful for stress
    tests of the sigma window.
    """

    alpha: float
    epsilon: float
    M: int
    K1: float = 1.0
    K2: float = 1.0

    def __post_init__(self):
        _check_alpha(self.alpha)
        _check_epsilon(self.epsilon)
        if int(self.M) != self.M or self.M < 1:
            raise ParameterError(f"mode count M must be a positive integer, got {self.M!r}")
        if self.K1 < 1.0 or self.K2 < 1.0:
            raise ParameterError("dichotomy constants K1, K2 must be >= 1")

    @cached_property
    def modes(self) -> np.ndarray:
        return np.arange(1, self.M + 1, dtype=float)

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        lam = eigenvalue(self.modes, self.alpha, self.epsilon)
        lam.setflags(write=False)
        return lam

    @cached_property
    def base_eigenvalues(self) -> np.ndarray:
        lam = base_eigenvalue(self.modes, self.alpha)
        lam.setflags(write=False)
        return lam

    def lam(self, n: int) -> float:
        """1-based eigenvalue lookup."""
        if not 1 <= n <= self.M:
            raise ParameterError(f"mode index {n} outside 1..{self.M}")
        return float(self.eigenvalues[n - 1])

    def with_epsilon(self, epsilon: float) -> "SpectrumModel":
        return SpectrumModel(self.alpha, epsilon, self.M, self.K1, self.K2)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Real coefficients a_1..a_M in the shared eigenbasis (read-only)."""

    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.array(self.coeffs, dtype=float, copy=True).reshape(-1)
        if a.size == 0:
            raise ParameterError("a field needs at least one mode")
        if not np.all(np.isfinite(a)):
            raise NumericError("field coefficients must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "coeffs", a)

    @classmethod
    def zeros(cls, M: int) -> "SpectralField":
        return cls(np.zeros(M))

    @classmethod
    def unit(cls, n: int, M: int, amplitude: float = 1.0) -> "SpectralField":
        a = np.zeros(M)
        a[n - 1] = amplitude
        return cls(a)

    @property
    def M(self) -> int:
        return self.coeffs.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def h_norm(self, alpha: float) -> float:
        """H^(alpha/2) norm using the eps = 0 eigenvalues."""
        lam = base_eigenvalue(np.arange(1, self.M + 1), alpha)
        return float(np.sqrt(np.sum((1.0 + lam) * self.coeffs**2)))

    def __add__(self, other):
        return SpectralField(self.coeffs + _coeffs_of(other, self.M))

    def __sub__(self, other):
        return SpectralField(self.coeffs - _coeffs_of(other, self.M))

    def __mul__(self, scalar):
        return SpectralField(self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(-self.coeffs)

    def __eq__(self, other):
        return isinstance(other, SpectralField) and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    def __repr__(self):
        return f"SpectralField(M={self.M}, norm={self.norm():.6g})"


def _coeffs_of(u, M):
    a = u.coeffs if isinstance(u, SpectralField) else np.asarray(u, dtype=float)
    if a.shape != (M,):
        raise ParameterError(f"mode count mismatch: expected {M}, got {a.shape}")
    return a


def _check_binding(u: SpectralField, model: SpectrumModel):
    if u.M != model.M:
        raise ParameterError(f"field has {u.M} modes, model has {model.M}")


def _mode_mask(M: int, part: str, N: int | None) -> np.ndarray:
    if part == "full":
        return np.ones(M, dtype=bool)
    if part not in ("low", "high"):
        raise ParameterError(f"unknown spectral range {part!r}")
    if N is None or int(N) != N or not 0 <= N <= M:
        raise ParameterError(f"N must be an integer in 0..{M}, got {N!r}")
    idx = np.arange(1, M + 1)
    return idx <= N if part == "low" else idx > N


def semigroup_apply(
    u: SpectralField, t: float, model: SpectrumModel, part: str = "full", N: int | None = None
) -> SpectralField:
    """Exact action of exp(-t A) restricted to ``part`` ("full", "low", "high").

    Modes outside the selected range are zeroed.  Negative ``t`` is only
    meaningful on the finite-dimensional low-mode range.
    """
    _check_binding(u, model)
    mask = _mode_mask(model.M, part, N)
    if t < 0 and part != "low":
        raise ContractError("backward flow (t < 0) is only defined on the low-mode range")
    out = np.where(mask, np.exp(-model.eigenvalues * t) * u.coeffs, 0.0)
    return SpectralField(out)


def project(u: SpectralField, N: int, part: str) -> SpectralField:
    """P_N (``part="low"``: modes 1..N) or Q_N = I - P_N (``part="high"``)."""
    if part not in ("low", "high"):
        raise ParameterError(f"part must be 'low' or 'high', got {part!r}")
    mask = _mode_mask(u.M, part, N)
    return SpectralField(np.where(mask, u.coeffs, 0.0))


@dataclass(frozen=True, eq=False)
class PhysicalGrid:
    """Samples at the J interior nodes x_j = -pi + 2*pi*j/(J+1), j = 1..J."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True).reshape(-1)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def J(self) -> int:
        return self.values.size

    @property
    def nodes(self) -> np.ndarray:
        return grid_nodes(self.J)

    def l2_norm(self) -> float:
        """Quadrature L^2 norm; equals the coefficient norm for band-limited data."""
        h = 2.0 * np.pi / (self.J + 1)
        return float(np.sqrt(h * np.sum(self.values**2)))


def grid_nodes(J: int) -> np.ndarray:
    return -np.pi + 2.0 * np.pi * np.arange(1, J + 1) / (J + 1)


def synthesize_array(coeffs: np.ndarray, J: int) -> np.ndarray:
    """Evaluate coefficient rows (..., M) on the J-point grid -> (..., J)."""
    M = coeffs.shape[-1]
    if J < M:
        raise ParameterError(f"grid of {J} nodes cannot carry {M} modes")
    pad = [(0, 0)] * (coeffs.ndim - 1) + [(0, J - M)]
    full = np.pad(coeffs, pad)
    return scipy.fft.dst(full, type=1, axis=-1) / (2.0 * np.sqrt(np.pi))


def analyze_array(values: np.ndarray, M: int) -> np.ndarray:
    """Project grid rows (..., J) onto modes 1..M -> (..., M)."""
    J = values.shape[-1]
    if J < M:
        raise ParameterError(f"grid of {J} nodes cannot resolve {M} modes")
    a = scipy.fft.dst(values, type=1, axis=-1) * (np.sqrt(np.pi) / (J + 1))
    return a[..., :M]


def synthesize(u: SpectralField, J: int | None = None) -> PhysicalGrid:
    """Sample ``u`` on the collocation grid; ``J`` defaults to 2M."""
    J = 2 * u.M if J is None else int(J)
    if J < 2 * u.M:
        raise ParameterError(f"need J >= 2M = {2 * u.M} nodes, got {J}")
    return PhysicalGrid(synthesize_array(u.coeffs, J))


def analyze(g: PhysicalGrid, M: int) -> SpectralField:
    """Coefficients of modes 1..M from grid samples (requires J >= 2M)."""
    if g.J < 2 * M:
        raise ParameterError(f"need J >= 2M = {2 * M} nodes, got {g.J}")
    return SpectralField(analyze_array(g.values, M))


def spectral_tail_ok(u: SpectralField, fraction: float = 0.25, threshold: float = 1e-8) -> bool:
    """False when the last ``fraction`` of modes holds more than ``threshold`` of the energy."""
    e = u.coeffs**2
    total = e.sum()
    if total == 0.0:
        return True
    start = int(np.floor(u.M * (1.0 - fraction)))
    return bool(e[start:].sum() <= threshold * total)

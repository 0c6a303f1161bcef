"""Inertial-manifold graph Phi(p) as the fixed point of the Lyapunov-Perron map.

For p in P_N H the map acting on backward trajectories phi: [-T, 0] -> H is

    J(phi, p)(t) = e^{-tA} p - int_t^0 e^{-(t-s)A} P_N F(phi(s)) ds
                              + int_{-inf}^t e^{-(t-s)A} Q_N F(phi(s)) ds,

with F(u) = g - f(u).  Time integrals use product integration: F is
interpolated linearly between nodes and integrated exactly against the
exponential kernel, so each step is second order and constant forcing is
integrated without error.  The part of the Q_N integral before -T is either
dropped (``tail_mode="zero"``) or closed with F frozen at -T (``"frozen"``).
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigError, ConvergenceError, ExtrapolationError, NumericError, ParameterError
from .gap import sigma_window
from .solver import SolveProblem, rhs_array
from .spectral import SpectralField, SpectrumModel

__all__ = [
    "TrajectorySegment",
    "LPConfig",
    "GridSpec",
    "GraphPoint",
    "ManifoldChart",
    "time_grid",
    "sigma_norm",
    "contraction_bound",
    "lp_map",
    "solve_graph_point",
    "build_chart",
    "chart_eval",
]


def time_grid(T: float, K: int) -> np.ndarray:
    """Uniform nodes t_k = -T + k T/K with t_K = 0 exactly."""
    return T * (np.arange(K + 1) / K - 1.0)


@dataclass(frozen=True, eq=False)
class TrajectorySegment:
    times: np.ndarray
    values: np.ndarray  # (K+1, M)
    sigma: float

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.size < 2 or v.shape[0] != t.size:
            raise ParameterError("times and values must agree in length (>= 2 nodes)")
        if t[-1] != 0.0:
            raise ParameterError("trajectory must end exactly at t = 0")
        steps = np.diff(t)
        if not np.allclose(steps, steps[0], rtol=1e-10, atol=0.0) or steps[0] <= 0:
            raise ParameterError("time grid must be uniform and increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def K(self) -> int:
        return self.times.size - 1

    @property
    def T(self) -> float:
        return -float(self.times[0])

    @property
    def dt(self) -> float:
        return self.T / self.K

    def at(self, k: int) -> SpectralField:
        return SpectralField(self.values[k])


def _weighted_sup(times, values, sigma):
    # weight before the norm: low modes grow like e^{-lambda_N t} and would overflow when squared
    return float(np.max(np.linalg.norm(np.exp(sigma * times)[:, None] * values, axis=-1)))


def sigma_norm(traj: TrajectorySegment) -> float:
    """max_k e^{sigma t_k} |phi(t_k)|."""
    return _weighted_sup(traj.times, traj.values, traj.sigma)


@dataclass(frozen=True)
class LPConfig:
    """Discretisation of the Lyapunov-Perron map.

    ``T=None`` picks the shortest horizon with e^{(sigma - lambda_{N+1}) T} < tol/10;
    an explicit T is checked against the same bound by :meth:`resolve`.
    """

    T: float | None = None
    K: int = 512
    tol: float = 1e-9
    max_iter: int = 200
    tail_mode: str = "frozen"

    def __post_init__(self):
        if self.tail_mode not in ("zero", "frozen"):
            raise ConfigError(f"tail_mode must be 'zero' or 'frozen', got {self.tail_mode!r}")
        if self.K < 1 or self.max_iter < 1 or not self.tol > 0:
            raise ConfigError("need K >= 1, max_iter >= 1, tol > 0")
        if self.T is not None and not self.T > 0:
            raise ConfigError("horizon T must be positive")

    def resolve(self, sigma: float, lam_next: float) -> "LPConfig":
        rate = lam_next - sigma
        if not rate > 0:
            raise ConfigError("sigma must lie below lambda_{N+1}")
        need = math.log(10.0 / self.tol) / rate
        if self.T is None:
            return replace(self, T=need * (1.0 + 1e-9))
        if math.exp(-rate * self.T) >= self.tol / 10.0:
            raise ConfigError(
                f"horizon T={self.T:g} too short: e^(-(lambda_N+1 - sigma) T) = "
                f"{math.exp(-rate * self.T):.3g} >= tol/10; need T > {need:.6g}"
            )
        return self


def contraction_bound(N: int, sigma: float, l_f: float, model: SpectrumModel) -> float:
    """max{2 l_f K1 / (sigma - lambda_N), 2 l_f K2 / (lambda_{N+1} - sigma)}."""
    lam = model.eigenvalues
    return max(
        2.0 * l_f * model.K1 / (sigma - lam[N - 1]),
        2.0 * l_f * model.K2 / (lam[N] - sigma),
    )


def check_sigma(N: int, sigma: float, l_f: float, model: SpectrumModel):
    if not 1 <= N < model.M:
        raise ConfigError(f"N={N} must satisfy 1 <= N < M={model.M}")
    lo, hi = sigma_window(N, model, l_f)
    if not lo < sigma < hi:
        raise ConfigError(
            f"sigma={sigma:.6g} outside the window ({lo:.6g}, {hi:.6g}) for N={N}, l_f={l_f:.6g}"
        )


def _series(z, terms):
    out = np.zeros_like(z)
    for k in reversed(range(len(terms))):
        out = out * z + terms[k]
    return out


_A_TERMS = [(-1) ** k * (k + 1) / math.factorial(k + 2) for k in range(9)]
_B_TERMS = [(-1) ** k / math.factorial(k + 2) for k in range(9)]


def _kernel_weights(z: np.ndarray, h: float):
    """Weights (a, b) with int_0^h e^{-lam(h-tau)} F(tau) dtau ~ a F(0) + b F(h), z = lam h.

    F is interpolated linearly on [0, h]; z may have either sign.
    """
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 0.1
    zs = np.where(small, 1.0, z)
    em = np.exp(-zs)
    a = (-np.expm1(-zs) - zs * em) / zs**2
    b = (zs + np.expm1(-zs)) / zs**2
    a = np.where(small, _series(z, _A_TERMS), a)
    b = np.where(small, _series(z, _B_TERMS), b)
    return h * a, h * b


def integral_map(F, p_low, lam, N, times, tail_mode):
    """Apply the discrete Lyapunov-Perron integrals to forcing samples F (K+1, M).

    Returns e^{-tA} p - int_t^0 e^{-(t-s)A} P F ds + int_{-inf}^t e^{-(t-s)A} Q F ds
    at every node.  ``p_low`` may be None (no free-flow term).
    """
    K = times.size - 1
    h = -times[0] / K
    out = np.empty_like(F)
    z = lam * h
    a, b = _kernel_weights(z, h)
    am, bm = _kernel_weights(-z, h)
    # low modes: L_K = 0, L_k = e^{lam h} L_{k+1} + a(-z) F_{k+1} + b(-z) F_k
    for n in range(N):
        drive = np.empty(K + 1)
        drive[0] = 0.0
        drive[1:] = am[n] * F[:0:-1, n] + bm[n] * F[-2::-1, n]
        L = lfilter([1.0], [1.0, -math.exp(z[n])], drive)[::-1]
        free = 0.0 if p_low is None else np.exp(-lam[n] * times) * p_low[n]
        out[:, n] = free - L
    # high modes: I_0 = tail, I_{k+1} = e^{-lam h} I_k + a(z) F_k + b(z) F_{k+1}
    for n in range(N, F.shape[1]):
        drive = np.empty(K + 1)
        drive[0] = F[0, n] / lam[n] if tail_mode == "frozen" else 0.0
        drive[1:] = a[n] * F[:-1, n] + b[n] * F[1:, n]
        out[:, n] = lfilter([1.0], [1.0, -math.exp(-z[n])], drive)
    return out


def _p_low(p, N):
    if isinstance(p, SpectralField):
        arr = p.coeffs[:N]
    else:
        arr = np.asarray(p, dtype=float).reshape(-1)
    if arr.size != N:
        raise ParameterError(f"expected {N} low-mode coordinates, got {arr.size}")
    return arr


def lp_map(
    traj: TrajectorySegment,
    p,
    problem: SolveProblem,
    N: int,
    sigma: float,
    config: LPConfig | None = None,
) -> TrajectorySegment:
    """One application of J(., p) on the trajectory's time grid."""
    model = problem.model
    config = config or LPConfig()
    check_sigma(N, sigma, problem.f.lipschitz, model)
    if traj.values.shape[1] != model.M:
        raise ParameterError("trajectory and model disagree on the mode count")
    F = rhs_array(traj.values, problem)
    vals = integral_map(F, _p_low(p, N), model.eigenvalues, N, traj.times, config.tail_mode)
    return TrajectorySegment(traj.times, vals, sigma)


def picard(apply, phi0, times, sigma, tol, max_iter):
    """Iterate phi <- apply(phi) until the sigma-norm update drops below tol.

    Returns (phi, history, contraction) where contraction is the largest ratio
    of successive update norms above the round-off floor.
    """
    phi = phi0
    history = []
    for _ in range(max_iter):
        new = apply(phi)
        if not np.all(np.isfinite(new)):
            raise NumericError("non-finite trajectory in Picard iteration")
        history.append(_weighted_sup(times, new - phi, sigma))
        phi = new
        if history[-1] < tol:
            break
    else:
        raise ConvergenceError(
            f"no convergence in {max_iter} iterations (last update {history[-1]:.3g}, tol {tol:g})",
            history,
        )
    scale = _weighted_sup(times, phi, sigma)
    floor = max(1e3 * np.finfo(float).eps * scale, 1e-300)
    ratios = [
        history[k] / history[k - 1]
        for k in range(1, len(history))
        if history[k - 1] > floor and history[k] > floor
    ]
    return phi, history, (max(ratios) if ratios else 0.0)


@dataclass(frozen=True, eq=False)
class GraphPoint:
    phi: SpectralField  # Q_N part of the fixed point at t = 0 (low modes zero)
    trajectory: TrajectorySegment
    contraction: float
    iterations: int
    history: list = field(repr=False)


def resolve_sigma(problem: SolveProblem, N: int, sigma: float | None) -> float:
    if sigma is not None:
        return float(sigma)
    lo, hi = sigma_window(N, problem.model, problem.f.lipschitz)
    if not hi > lo:
        raise ConfigError(f"empty sigma window for N={N}: ({lo:.6g}, {hi:.6g})")
    return 0.5 * (lo + hi)


def solve_graph_point(
    p,
    problem: SolveProblem,
    N: int,
    sigma: float | None = None,
    config: LPConfig | None = None,
) -> GraphPoint:
    """Phi(p) = Q_N phi(p)(0) for the fixed point phi(p) of J(., p)."""
    model = problem.model
    sigma = resolve_sigma(problem, N, sigma)
    check_sigma(N, sigma, problem.f.lipschitz, model)
    config = (config or LPConfig()).resolve(sigma, model.lam(N + 1))
    p_low = _p_low(p, N)
    times = time_grid(config.T, config.K)
    lam = model.eigenvalues
    phi0 = np.zeros((times.size, model.M))
    phi0[:, :N] = np.exp(-np.outer(times, lam[:N])) * p_low

    def apply(phi):
        return integral_map(rhs_array(phi, problem), p_low, lam, N, times, config.tail_mode)

    phi, history, ratio = picard(apply, phi0, times, sigma, config.tol, config.max_iter)
    q = phi[-1].copy()
    q[:N] = 0.0
    return GraphPoint(
        SpectralField(q), TrajectorySegment(times, phi, sigma), ratio, len(history), history
    )


@dataclass(frozen=True)
class GridSpec:
    """Tensor grid over a box in the N low-mode coordinates.

    An axis with a single node is pinned at its lower bound (which must equal
    the upper bound).
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        lo = tuple(float(x) for x in self.lower)
        hi = tuple(float(x) for x in self.upper)
        ct = tuple(int(c) for c in self.counts)
        if not (len(lo) == len(hi) == len(ct)) or not ct:
            raise ParameterError("grid bounds and counts must have the same (nonzero) length")
        for l, u, c in zip(lo, hi, ct):
            if c < 1 or (c == 1 and l != u) or (c > 1 and not u > l):
                raise ParameterError(f"bad grid axis lower={l}, upper={u}, count={c}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "counts", ct)

    @classmethod
    def box(cls, radius: float, N: int, nodes: int) -> "GridSpec":
        return cls((-radius,) * N, (radius,) * N, (nodes,) * N)

    @property
    def N(self) -> int:
        return len(self.counts)

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(l, u, c) for l, u, c in zip(self.lower, self.upper, self.counts)]

    def nodes(self) -> np.ndarray:
        """All nodes, row-major (last axis fastest), shape (n_nodes, N)."""
        return np.array(list(itertools.product(*self.axes())), dtype=float).reshape(-1, self.N)

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    def contains(self, p, tol: float = 1e-12) -> bool:
        p = np.asarray(p, dtype=float)
        lo, hi = np.array(self.lower), np.array(self.upper)
        pad = tol * np.maximum(1.0, np.maximum(np.abs(lo), np.abs(hi)))
        return bool(np.all(p >= lo - pad) and np.all(p <= hi + pad))


@dataclass(frozen=True, eq=False)
class ManifoldChart:
    """Phi sampled on a tensor grid of low-mode coordinates.

    ``phi`` has shape (n_nodes, M - N) and holds Q_N coefficients in row-major
    node order; failed nodes are NaN and listed in ``failed``.
    """

    N: int
    grid: GridSpec
    phi: np.ndarray
    model: SpectrumModel
    sigma: float
    config: LPConfig
    f_descriptor: dict
    g: np.ndarray
    iterations: np.ndarray
    contraction: np.ndarray
    failed: tuple[int, ...] = ()
    trajectories: tuple | None = field(default=None, repr=False)

    @property
    def partial(self) -> bool:
        return bool(self.failed)

    @property
    def M(self) -> int:
        return self.model.M

    def node_field(self, i: int) -> SpectralField:
        a = np.zeros(self.M)
        a[self.N :] = self.phi[i]
        return SpectralField(a)

    def sup_norm(self) -> float:
        return float(np.nanmax(np.linalg.norm(self.phi, axis=-1)))

    def lipschitz_estimate(self) -> float:
        """Largest |dPhi| / |dp| between neighbouring nodes along any axis."""
        shape = self.grid.counts + (self.phi.shape[1],)
        vals = self.phi.reshape(shape)
        best = 0.0
        for ax, (lo, hi, c) in enumerate(zip(self.grid.lower, self.grid.upper, self.grid.counts)):
            if c < 2:
                continue
            d = np.linalg.norm(np.diff(vals, axis=ax), axis=-1) / ((hi - lo) / (c - 1))
            if np.any(np.isfinite(d)):
                best = max(best, float(np.nanmax(d)))
        return best


def build_chart(
    grid: GridSpec,
    problem: SolveProblem,
    N: int,
    sigma: float | None = None,
    config: LPConfig | None = None,
    threads: int = 1,
    keep_trajectories: bool = False,
) -> ManifoldChart:
    """Solve for Phi at every grid node; failed nodes leave the chart partial."""
    if grid.N != N:
        raise ParameterError(f"grid has {grid.N} axes, N={N}")
    sigma = resolve_sigma(problem, N, sigma)
    config = (config or LPConfig()).resolve(sigma, problem.model.lam(N + 1))
    nodes = grid.nodes()

    def solve(p):
        try:
            return solve_graph_point(p, problem, N, sigma, config)
        except (ConvergenceError, NumericError):
            return None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(solve, nodes))
    else:
        results = [solve(p) for p in nodes]

    M = problem.model.M
    phi = np.full((len(nodes), M - N), np.nan)
    iters = np.zeros(len(nodes), dtype=int)
    contr = np.full(len(nodes), np.nan)
    failed = []
    for i, r in enumerate(results):
        if r is None:
            failed.append(i)
            continue
        phi[i] = r.phi.coeffs[N:]
        iters[i] = r.iterations
        contr[i] = r.contraction
    trajs = tuple(r.trajectory if r else None for r in results) if keep_trajectories else None
    return ManifoldChart(
        N=N,
        grid=grid,
        phi=phi,
        model=problem.model,
        sigma=sigma,
        config=config,
        f_descriptor=problem.f.descriptor(),
        g=problem.g.coeffs.copy(),
        iterations=iters,
        contraction=contr,
        failed=tuple(failed),
        trajectories=trajs,
    )


def _interp_weights(grid: GridSpec, p):
    """Per-axis (indices, weights) for multilinear interpolation."""
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.size != grid.N:
        raise ParameterError(f"expected {grid.N} coordinates, got {p.size}")
    if not grid.contains(p):
        raise ExtrapolationError(f"point {p.tolist()} lies outside the chart box")
    per_axis = []
    for x, lo, hi, c in zip(p, grid.lower, grid.upper, grid.counts):
        if c == 1:
            per_axis.append(((0, 1.0),))
            continue
        s = (min(max(x, lo), hi) - lo) / (hi - lo) * (c - 1)
        i = min(int(np.floor(s)), c - 2)
        w = s - i
        per_axis.append(((i, 1.0 - w), (i + 1, w)))
    return per_axis


def interpolate(grid: GridSpec, values: np.ndarray, p) -> np.ndarray:
    """Multilinear interpolation of row-major node values (n_nodes, D) at p."""
    strides = np.cumprod((1,) + grid.counts[::-1])[:-1][::-1]
    out = np.zeros(values.shape[1])
    for corner in itertools.product(*_interp_weights(grid, p)):
        w = math.prod(c[1] for c in corner)
        if w == 0.0:
            continue
        out += w * values[int(sum(c[0] * s for c, s in zip(corner, strides)))]
    return out


def chart_eval(chart: ManifoldChart, p) -> SpectralField:
    """Phi(p) by multilinear interpolation; raises ExtrapolationError off the box."""
    a = np.zeros(chart.M)
    a[chart.N :] = interpolate(chart.grid, chart.phi, p)
    return SpectralField(a)

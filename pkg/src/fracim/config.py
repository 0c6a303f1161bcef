"""Experiment configuration: flat ``section.key = <JSON value>`` lines.

Example::

    # cubic family, two-dimensional chart
    operator.alpha = 1.5
    nonlinearity.kind = "cubic"
    nonlinearity.a = 0.0174
    lp.N = "auto"
    grid.nodes = 9

Lines starting with ``#`` and blank lines are ignored.  Every key not given
takes its default; :func:`serialize` writes all keys in sorted order, so
``serialize(parse(text))`` is a fixed point of ``serialize . parse``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .lyapunov_perron import GridSpec, LPConfig
from .solver import NonlinearSpec, SolveProblem
from .spectral import SpectralField, SpectrumModel

__all__ = [
    "ConfigKeyError",
    "ExperimentConfig",
    "parse",
    "serialize",
    "load",
    "forcing_profile",
]

PROFILES = ("zero", "inverse_square", "random")


class ConfigKeyError(ConfigError):
    """A configuration value is missing, unknown or out of its domain."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


# validators ---------------------------------------------------------------


def _num(lo=-math.inf, hi=math.inf, lo_open=False, hi_open=False):
    def check(key, v):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigKeyError(key, f"expected a finite number, got {v!r}")
        v = float(v)
        if v < lo or v > hi or (lo_open and v == lo) or (hi_open and v == hi):
            lb = "(" if lo_open else "["
            rb = ")" if hi_open else "]"
            raise ConfigKeyError(key, f"{v!r} outside {lb}{lo}, {hi}{rb}")
        return v

    return check


def _int(lo=1):
    def check(key, v):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigKeyError(key, f"expected an integer, got {v!r}")
        if v < lo:
            raise ConfigKeyError(key, f"must be >= {lo}, got {v}")
        return v

    return check


def _choice(*options):
    def check(key, v):
        if v not in options:
            raise ConfigKeyError(key, f"expected one of {list(options)}, got {v!r}")
        return v

    return check


def _optional(inner, token=None):
    """``None`` (or the string ``token``) passes through unchanged."""

    def check(key, v):
        if v is None or (token is not None and v == token):
            return v
        return inner(key, v)

    return check


def _list(inner, min_len=0):
    def check(key, v):
        if not isinstance(v, list):
            raise ConfigKeyError(key, f"expected a list, got {v!r}")
        if len(v) < min_len:
            raise ConfigKeyError(key, f"needs at least {min_len} entries")
        return [inner(f"{key}[{i}]", x) for i, x in enumerate(v)]

    return check


def _str(key, v):
    if not isinstance(v, str) or not v:
        raise ConfigKeyError(key, f"expected a nonempty string, got {v!r}")
    return v


_pos = _num(0.0, lo_open=True)
_nonneg = _num(0.0)

SCHEMA = {
    "operator.alpha": (1.5, _num(0.0, 2.0, True, True)),
    "operator.epsilon": (0.0, _num(0.0, 1.0, hi_open=True)),
    "operator.M": (32, _int(2)),
    "operator.K1": (1.0, _num(1.0)),
    "operator.K2": (1.0, _num(1.0)),
    "nonlinearity.kind": ("zero", _choice("zero", "linear", "cubic")),
    "nonlinearity.c": (0.0, _num()),
    "nonlinearity.a": (0.0, _num()),
    "nonlinearity.b": (0.0, _num()),
    "nonlinearity.radius": (None, _optional(_pos)),
    "forcing.profile": ("inverse_square", _choice(*PROFILES)),
    "forcing.amplitude": (1.0, _num()),
    "forcing.modes": (16, _int(0)),
    "forcing.coeffs": (None, _optional(_list(_num()))),
    "lp.N": ("auto", _optional(_int(1), "auto")),
    "lp.sigma": ("auto", _optional(_num(), "auto")),
    "lp.T": (None, _optional(_pos)),
    "lp.K": (512, _int(1)),
    "lp.tol": (1e-9, _pos),
    "lp.max_iter": (200, _int(1)),
    "lp.tail_mode": ("frozen", _choice("zero", "frozen")),
    "grid.radius": (1.0, _pos),
    "grid.nodes": (5, _int(1)),
    "study.alphas": ([0.5, 1.0, 1.5], _list(_num(0.0, 2.0, True, True))),
    "study.scan_epsilons": (None, _optional(_list(_num(0.0, 1.0, hi_open=True)))),
    "study.lipschitz": ([0.2], _list(_nonneg)),
    "study.n_max": (10**6, _int(1)),
    "study.epsilons": ([0.1, 0.01, 0.001], _list(_num(0.0, 1.0, True, True))),
    "study.t_test": ([0.5, 1.0, 2.0], _list(_nonneg)),
    "study.samples": (5, _int(1)),
    "study.sample_fraction": (0.8, _num(0.0, 1.0, True)),
    "study.dt": (0.01, _pos),
    "study.t_end": (10.0, _nonneg),
    "study.u0_amplitude": (0.5, _nonneg),
    "study.tracking_horizon": ("auto", _optional(_pos, "auto")),
    "study.energy_horizon": ("auto", _optional(_pos, "auto")),
    "study.invariance_tol": (1e-3, _pos),
    "study.tracking_r2": (0.95, _num(0.0, 1.0)),
    "study.slope_range": ([0.85, 1.15], _list(_num(), 2)),
    "study.order_min": (1.8, _num()),
    "output.directory": ("out", _str),
    "output.formats": (["csv", "json", "chart"], _list(_choice("csv", "json", "chart"), 1)),
    "seed": (0, _int(0)),
}


# blocks -------------------------------------------------------------------


@dataclass(frozen=True)
class OperatorBlock:
    alpha: float
    epsilon: float
    M: int
    K1: float
    K2: float


@dataclass(frozen=True)
class NonlinearityBlock:
    kind: str
    c: float
    a: float
    b: float
    radius: float | None


@dataclass(frozen=True)
class ForcingBlock:
    profile: str
    amplitude: float
    modes: int
    coeffs: list | None


@dataclass(frozen=True)
class LPBlock:
    N: int | str
    sigma: float | str
    T: float | None
    K: int
    tol: float
    max_iter: int
    tail_mode: str


@dataclass(frozen=True)
class GridBlock:
    radius: float
    nodes: int


@dataclass(frozen=True)
class StudyBlock:
    alphas: list
    scan_epsilons: list | None
    lipschitz: list
    n_max: int
    epsilons: list
    t_test: list
    samples: int
    sample_fraction: float
    dt: float
    t_end: float
    u0_amplitude: float
    tracking_horizon: float | str
    energy_horizon: float | str
    invariance_tol: float
    tracking_r2: float
    slope_range: list
    order_min: float


@dataclass(frozen=True)
class OutputBlock:
    directory: str
    formats: list


_BLOCKS = {
    "operator": OperatorBlock,
    "nonlinearity": NonlinearityBlock,
    "forcing": ForcingBlock,
    "lp": LPBlock,
    "grid": GridBlock,
    "study": StudyBlock,
    "output": OutputBlock,
}


@dataclass(frozen=True)
class ExperimentConfig:
    operator: OperatorBlock
    nonlinearity: NonlinearityBlock
    forcing: ForcingBlock
    lp: LPBlock
    grid: GridBlock
    study: StudyBlock
    output: OutputBlock
    seed: int

    @classmethod
    def from_flat(cls, values: dict) -> "ExperimentConfig":
        for key in values:
            if key not in SCHEMA:
                raise ConfigKeyError(key, "unknown key")
        flat = {}
        for key, (default, check) in SCHEMA.items():
            v = values.get(key, default)
            flat[key] = check(key, v) if key in values else v
        _cross_check(flat)
        blocks = {
            name: block(**{f.name: flat[f"{name}.{f.name}"] for f in fields(block)})
            for name, block in _BLOCKS.items()
        }
        return cls(**blocks, seed=flat["seed"])

    def to_flat(self) -> dict:
        out = {}
        for name in _BLOCKS:
            block = getattr(self, name)
            for f in fields(block):
                out[f"{name}.{f.name}"] = getattr(block, f.name)
        out["seed"] = self.seed
        return out

    def with_values(self, **dotted) -> "ExperimentConfig":
        """Copy with some keys replaced; keys use ``__`` for the dot."""
        flat = self.to_flat()
        flat.update({k.replace("__", "."): v for k, v in dotted.items()})
        return ExperimentConfig.from_flat(flat)

    # builders --------------------------------------------------------------

    def model(self, epsilon: float | None = None) -> SpectrumModel:
        o = self.operator
        eps = o.epsilon if epsilon is None else epsilon
        return SpectrumModel(o.alpha, eps, o.M, o.K1, o.K2)

    def nonlinearity_spec(self) -> NonlinearSpec:
        n = self.nonlinearity
        if n.kind == "zero":
            return NonlinearSpec.zero()
        if n.kind == "linear":
            return NonlinearSpec.linear(n.c)
        return NonlinearSpec.cubic(n.a, n.b, n.radius)

    def forcing_field(self) -> SpectralField:
        return forcing_profile(self)

    def problem(self, epsilon: float | None = None) -> SolveProblem:
        return SolveProblem(self.model(epsilon), self.nonlinearity_spec(), self.forcing_field())

    def lp_config(self) -> LPConfig:
        lp = self.lp
        return LPConfig(lp.T, lp.K, lp.tol, lp.max_iter, lp.tail_mode)

    def grid_spec(self, N: int) -> GridSpec:
        return GridSpec.box(self.grid.radius, N, self.grid.nodes)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def _cross_check(flat: dict):
    M = flat["operator.M"]
    coeffs = flat["forcing.coeffs"]
    if coeffs is not None and len(coeffs) > M:
        raise ConfigKeyError("forcing.coeffs", f"{len(coeffs)} coefficients exceed M={M}")
    N = flat["lp.N"]
    if N != "auto" and N >= M:
        raise ConfigKeyError("lp.N", f"must be < M={M}")
    if flat["nonlinearity.kind"] == "cubic" and flat["nonlinearity.radius"] is None:
        raise ConfigKeyError("nonlinearity.radius", "cubic nonlinearity needs a ball radius")
    lo, hi = flat["study.slope_range"]
    if not lo < hi:
        raise ConfigKeyError("study.slope_range", "needs lower < upper")


def forcing_profile(config: ExperimentConfig) -> SpectralField:
    """Forcing coefficients: an explicit list, or a named profile on the first modes."""
    M = config.operator.M
    fb = config.forcing
    g = np.zeros(M)
    if fb.coeffs is not None:
        g[: len(fb.coeffs)] = fb.coeffs
        return SpectralField(g)
    modes = min(fb.modes, M)  # profiles beyond M modes are truncated
    n = np.arange(1, modes + 1)
    if fb.profile == "inverse_square":
        g[:modes] = fb.amplitude * (-1.0) ** (n + 1) / n**2
    elif fb.profile == "random":
        # separate stream so that sampling elsewhere does not shift the forcing
        rng = np.random.default_rng([config.seed, 1])
        g[:modes] = fb.amplitude * rng.uniform(-1.0, 1.0, modes) / n
    return SpectralField(g)


# text form ----------------------------------------------------------------


def parse(text: str) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, rhs = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigKeyError(f"line {lineno}", f"expected 'section.key = value', got {raw!r}")
        if key in values:
            raise ConfigKeyError(key, f"duplicate key (line {lineno})")
        try:
            values[key] = json.loads(rhs.strip())
        except json.JSONDecodeError as exc:
            raise ConfigKeyError(key, f"value is not valid JSON ({exc.msg})") from None
    return ExperimentConfig.from_flat(values)


def serialize(config: ExperimentConfig) -> str:
    flat = config.to_flat()
    return "".join(f"{k} = {json.dumps(flat[k], sort_keys=True)}\n" for k in sorted(flat))


def load(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse(text)

"""Inertial manifolds for fractional reaction-diffusion equations with small viscosity.

Numerical companion for du/dt - eps u_xx + (-Laplacian)^(alpha/2) u + f(u) = g
on (-pi, pi): spectral model, gap analysis, exponential-Euler solver,
Lyapunov-Perron chart construction, small-eps expansion and diagnostics.
"""

from .chartio import read_chart, write_chart, write_chart_csv
from .config import ExperimentConfig, parse, serialize
from .diagnostics import energy_monitor, invariance_residual, tracking_fit
from .errors import (
    ConfigError,
    ContractError,
    ConvergenceError,
    DegenerateFitError,
    DependencyError,
    ExtrapolationError,
    FracimError,
    NumericError,
    ParameterError,
    RegimeError,
)
from .expansion import (
    build_expansion,
    eps_convergence_study,
    expansion_eval,
    fit_slope,
    hausdorff_semidistance,
    phi0_chart,
    phi1_chart,
)
from .gap import (
    GapReport,
    Regime,
    classify_regime,
    find_gap_index,
    gap_derivative,
    gap_sequence,
    min_epsilon_for_gap,
    sigma_window,
    spectral_gap,
)
from .lyapunov_perron import (
    GridSpec,
    LPConfig,
    ManifoldChart,
    build_chart,
    chart_eval,
    contraction_bound,
    solve_graph_point,
)
from .solver import NonlinearSpec, SolveProblem, evolve, step_exponential_euler
from .spectral import (
    SpectralField,
    SpectrumModel,
    analyze,
    eigenvalue,
    project,
    semigroup_apply,
    synthesize,
)

__version__ = "0.1.0"

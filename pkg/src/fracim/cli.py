"""Batch front-end: ``fracim <subcommand> --config PATH [--out DIR] ...``.

Exit codes: 0 success, 1 a check run by the subcommand failed, 2 bad
configuration or usage, 3 no inertial manifold in the requested regime,
4 chart file invalid or inconsistent with the configuration, 5 numerical
or I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import chartio
from .config import ExperimentConfig, load, serialize
from .diagnostics import as_dict, energy_monitor, invariance_residual, report_record, tracking_fit
from .errors import ConfigError, FracimError, NumericError, RegimeError
from .expansion import (
    _base_problem,
    build_expansion,
    eps_convergence_study,
    fit_slope,
)
from .gap import classify_regime, find_gap_index, sigma_window
from .lyapunov_perron import build_chart, contraction_bound
from .solver import evolve
from .spectral import SpectralField, SpectrumModel

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_REGIME, EXIT_CHART, EXIT_NUMERIC = range(6)

CONTRACTION_SLACK = 0.05
TRACKING_EFOLDS = 3.0


class ChartMismatchError(FracimError):
    def __init__(self, fields):
        super().__init__("chart does not match the configuration in: " + ", ".join(fields))
        self.fields = list(fields)


# output -------------------------------------------------------------------


def fmt(x) -> str:
    if x is None:
        return "NONE"
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


class Writer:
    """Collects outputs and writes them from one place, in a fixed order."""

    def __init__(self, directory: Path, formats):
        self.directory = Path(directory)
        self.formats = set(formats)
        self.pending: list[tuple[str, object]] = []
        self.written: list[Path] = []

    def table(self, name: str, header, rows):
        if "csv" not in self.formats:
            return
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])
        self.pending.append((name, buf.getvalue()))

    def json(self, name: str, obj):
        if "json" not in self.formats:
            return
        text = json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"
        self.pending.append((name, text))

    def chart(self, stem: str, chart):
        if "chart" not in self.formats:
            return
        self.pending.append((stem + ".bin", ("chart", chart)))
        self.pending.append((stem + ".csv", ("chart_csv", chart)))

    def flush(self):
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OSError(f"cannot create output directory {self.directory}: {exc.strerror}") from None
        for name, payload in self.pending:
            path = self.directory / name
            try:
                if isinstance(payload, tuple):
                    kind, chart = payload
                    (chartio.write_chart if kind == "chart" else chartio.write_chart_csv)(chart, path)
                else:
                    path.write_text(payload)
            except OSError as exc:
                raise OSError(f"cannot write {path}: {exc.strerror}") from None
            self.written.append(path)
        self.pending.clear()


# shared orchestration -----------------------------------------------------


def _regime_message(model: SpectrumModel, l_f: float) -> str:
    regime, why = classify_regime(model.alpha)
    return (
        f"no N < M={model.M} with a nonempty sigma window for alpha={model.alpha:g}, "
        f"eps={model.epsilon:g}, l_f={l_f:g} ({regime.value}: {why})"
    )


def resolve_dimension(cfg: ExperimentConfig, model: SpectrumModel | None = None):
    """(N, sigma) from the config; "auto" values come from the gap search."""
    model = model or cfg.model()
    l_f = cfg.nonlinearity_spec().lipschitz
    N = cfg.lp.N
    if N == "auto":
        rep = find_gap_index(model, l_f, model.M - 1, require_window=True)
        if rep is None:
            raise RegimeError(_regime_message(model, l_f))
        N = rep.N
    sigma = cfg.lp.sigma
    if sigma == "auto":
        lo, hi = sigma_window(N, model, l_f)
        if not hi > lo:
            raise RegimeError(_regime_message(model, l_f))
        sigma = 0.5 * (lo + hi)
    return N, float(sigma)


def _sample_points(cfg: ExperimentConfig, N: int) -> np.ndarray:
    r = cfg.grid.radius * cfg.study.sample_fraction
    axes = [np.linspace(-r, r, cfg.study.samples)] * N
    return np.array(np.meshgrid(*axes, indexing="ij")).reshape(N, -1).T


def _random_state(cfg: ExperimentConfig, N: int, rng) -> SpectralField:
    """Low modes uniform in the sample box, high modes decaying like 1/n."""
    M = cfg.operator.M
    a = np.zeros(M)
    r = cfg.grid.radius * cfg.study.sample_fraction
    a[:N] = rng.uniform(-r, r, N)
    n = np.arange(N + 1, M + 1)
    a[N:] = cfg.study.u0_amplitude * rng.normal(size=M - N) / n
    return SpectralField(a)


def _contraction_stats(chart, l_f):
    bound = contraction_bound(chart.N, chart.sigma, l_f, chart.model)
    ok = np.isfinite(chart.contraction)
    c = chart.contraction[ok]
    return {
        "bound": bound,
        "max": float(c.max()) if c.size else None,
        "mean": float(c.mean()) if c.size else None,
        "min": float(c.min()) if c.size else None,
        "within_bound": bool(c.size == 0 or c.max() <= bound + CONTRACTION_SLACK),
    }


# subcommands --------------------------------------------------------------


def cmd_gap_scan(cfg: ExperimentConfig, args, out: Writer) -> int:
    s = cfg.study
    eps_list = s.scan_epsilons if s.scan_epsilons is not None else [cfg.operator.epsilon]
    rows, records = [], []
    for alpha in s.alphas:
        for eps in eps_list:
            model = SpectrumModel(alpha, eps, s.n_max + 1, cfg.operator.K1, cfg.operator.K2)
            regime = classify_regime(alpha)[0].value
            for l_f in s.lipschitz:
                rep = find_gap_index(model, l_f, s.n_max)
                if rep is None:
                    row = [alpha, eps, l_f, None, None, None, None, False, regime]
                else:
                    lo, hi = rep.sigma_window
                    row = [alpha, eps, l_f, rep.N, rep.gap, lo, hi, rep.feasible, regime]
                rows.append(row)
                records.append(dict(zip(GAP_HEADER, row)))
    out.table("gap_scan.csv", GAP_HEADER, rows)
    out.json("gap_scan.json", {"n_max": s.n_max, "rows": records})
    return EXIT_OK


GAP_HEADER = ["alpha", "epsilon", "l_f", "N", "gap", "sigma_lo", "sigma_hi", "window_nonempty", "regime"]


def cmd_solve(cfg: ExperimentConfig, args, out: Writer) -> int:
    problem = cfg.problem()
    rng = cfg.rng()
    u0 = _random_state(cfg, 0, rng)
    res = evolve(u0, cfg.study.t_end, cfg.study.dt, problem)
    out.table("solve_energy.csv", ["t", "energy"], zip(res.times, res.energy))
    out.table(
        "solve_final.csv",
        ["n", "u0", "u_final"],
        zip(problem.model.modes, u0.coeffs, res.final.coeffs),
    )
    summary = {
        "t_end": float(res.times[-1]),
        "dt": res.dt,
        "steps": int(res.times.size - 1),
        "norm_initial": u0.norm(),
        "norm_final": res.final.norm(),
    }
    if res.times.size >= 4 and cfg.study.t_end > 0:
        summary["dissipation"] = as_dict(energy_monitor(res.energy, res.times, problem.g, problem.model))
    out.json("solve.json", summary)
    return EXIT_OK


def cmd_build_manifold(cfg: ExperimentConfig, args, out: Writer) -> int:
    problem = cfg.problem()
    N, sigma = resolve_dimension(cfg)
    chart = build_chart(cfg.grid_spec(N), problem, N, sigma, cfg.lp_config(), args.threads)
    stats = _contraction_stats(chart, problem.f.lipschitz)
    summary = {
        "N": N,
        "sigma": sigma,
        "T": chart.config.T,
        "contraction": stats,
        "lipschitz_estimate": chart.lipschitz_estimate(),
        "failed_nodes": list(chart.failed),
        "iterations_max": int(chart.iterations.max()),
        "pass": bool(not chart.failed and stats["within_bound"]),
    }
    out.chart("chart", chart)
    out.json("build_summary.json", summary)
    return EXIT_OK if summary["pass"] else EXIT_CHECK


def _expected_header(cfg: ExperimentConfig, chart) -> dict:
    """Header fields a chart built from ``cfg`` must carry."""
    o = cfg.operator
    want = {
        "alpha": o.alpha,
        "epsilon": o.epsilon,
        "M": o.M,
        "K1": o.K1,
        "K2": o.K2,
        "nonlinearity": cfg.nonlinearity_spec().descriptor(),
        "g": [float(x) for x in cfg.forcing_field().coeffs],
    }
    N, sigma = resolve_dimension(cfg)
    want["N"] = N
    want["sigma"] = sigma
    grid = cfg.grid_spec(N)
    want["grid"] = {"lower": list(grid.lower), "upper": list(grid.upper), "counts": list(grid.counts)}
    lp = cfg.lp
    lp_want = {"K": lp.K, "tol": lp.tol, "max_iter": lp.max_iter, "tail_mode": lp.tail_mode}
    if lp.T is not None:
        lp_want["T"] = lp.T
    want["lp"] = lp_want
    return want


def check_chart_matches(cfg: ExperimentConfig, chart) -> None:
    have = chartio.chart_header(chart)
    want = _expected_header(cfg, chart)
    diff = []
    for key, value in want.items():
        got = have[key]
        if key == "lp":
            diff += [f"lp.{k}" for k, v in value.items() if got.get(k) != v]
        elif key == "nonlinearity":
            if json.dumps(got, sort_keys=True) != json.dumps(value, sort_keys=True):
                diff.append(key)
        elif got != value:
            diff.append(key)
    if diff:
        raise ChartMismatchError(diff)


def cmd_verify(cfg: ExperimentConfig, args, out: Writer) -> int:
    path = Path(args.chart) if args.chart else Path(cfg.output.directory) / "chart.bin"
    try:
        chart = chartio.read_chart(path)
    except OSError as exc:
        raise OSError(f"cannot read chart {path}: {exc.strerror}") from None
    check_chart_matches(cfg, chart)
    problem = cfg.problem()
    N, s = chart.N, cfg.study
    rng = cfg.rng()
    records = []

    samples = _sample_points(cfg, N)
    for t in s.t_test:
        rep = invariance_residual(chart, problem, t, samples, s.dt)
        records.append(
            report_record(
                "invariance",
                {"t_test": t, "samples": len(samples)},
                as_dict(rep),
                bool(rep.relative <= s.invariance_tol),
            )
        )

    rate = problem.model.lam(N + 1) - chart.sigma
    horizon = s.tracking_horizon
    if horizon == "auto":
        horizon = TRACKING_EFOLDS * (1.0 + 1e-6) / rate
    u0 = _random_state(cfg, N, rng)
    tr = tracking_fit(u0, chart, problem, horizon, s.dt, TRACKING_EFOLDS)
    records.append(
        report_record(
            "tracking",
            {"horizon": horizon, "dt": s.dt},
            {"eta": tr.eta, "beta": tr.beta, "r2": tr.r2},
            bool(tr.beta > 0 and tr.r2 >= s.tracking_r2),
        )
    )

    e_horizon = s.energy_horizon
    if e_horizon == "auto":
        e_horizon = 50.0 / problem.model.lam(1)
    u1 = _random_state(cfg, N, rng)
    run = evolve(u1, e_horizon, s.dt, problem)
    dis = energy_monitor(run.energy, run.times, problem.g, problem.model)
    tail = run.energy[dis.window[0] :]
    tail_max = float(np.sqrt(tail.max()))
    respected = bool(dis.ok and tail_max <= dis.radius * (1.0 + 1e-9))
    vals = as_dict(dis)
    vals["tail_max_norm"] = tail_max
    records.append(report_record("dissipation", {"horizon": e_horizon, "dt": s.dt}, vals, respected))

    passed = all(r["pass"] for r in records)
    out.table("tracking.csv", ["t", "distance"], zip(tr.times, tr.distances))
    out.json("verify.json", {"chart": path.name, "records": records, "pass": passed})
    return EXIT_OK if passed else EXIT_CHECK


def cmd_compare_eps(cfg: ExperimentConfig, args, out: Writer) -> int:
    problem = cfg.problem()
    _base_problem(problem)  # regime check before any work
    N, sigma = resolve_dimension(cfg, cfg.model(0.0))
    fixed_sigma = None if cfg.lp.sigma == "auto" else sigma
    study = eps_convergence_study(
        cfg.study.epsilons, problem, cfg.grid_spec(N), N, fixed_sigma, cfg.lp_config(), args.threads
    )
    rows = [
        (r.epsilon, r.dist_H if r.feasible else None,
         r.slope_running if math.isfinite(r.slope_running) else None, r.nodes_failed, r.feasible)
        for r in study.rows
    ]
    out.table("compare_eps.csv", ["epsilon", "dist_H", "slope_running", "nodes_failed", "feasible"], rows)
    summary = {"N": N, "rows": len(rows)}
    passed = all(r.feasible for r in study.rows)
    if study.slope is not None:
        lo, hi = cfg.study.slope_range
        summary["slope"] = study.slope
        summary["slope_range"] = [lo, hi]
        passed = passed and lo <= study.slope <= hi
    summary["pass"] = passed
    out.json("compare_eps.json", summary)
    return EXIT_OK if passed else EXIT_CHECK


def cmd_expand(cfg: ExperimentConfig, args, out: Writer) -> int:
    mode = args.mode.replace("-", "_")
    problem = cfg.problem()
    base_problem = _base_problem(problem)
    N, sigma = resolve_dimension(cfg, base_problem.model)
    grid = cfg.grid_spec(N)
    lp = cfg.lp_config()
    exp = build_expansion(grid, problem, N, mode, 1, sigma, lp, args.threads)
    phi0, phi1 = exp.base.phi, exp.corrections[0].phi  # node rows, Q_N coefficients
    out.chart("expansion_phi0", exp.base)
    out.chart("expansion_phi1", exp.corrections[0])

    rows, eps_ok, res_ok = [], [], []
    for eps in cfg.study.epsilons:
        try:
            direct = build_chart(grid, cfg.problem(eps), N, None, lp, args.threads)
        except ConfigError:
            rows.append((eps, None, None))
            continue
        r = float(np.nanmax(np.linalg.norm(direct.phi - phi0 - eps * phi1, axis=-1)))
        eps_ok.append(eps)
        res_ok.append(r)
        rows.append((eps, r, fit_slope(eps_ok, res_ok)))
    out.table("expand.csv", ["epsilon", "residual", "order_running"], rows)

    order = fit_slope(eps_ok, res_ok)
    summary = {"mode": mode, "N": N, "sigma": sigma, "phi1_max": float(np.nanmax(np.abs(phi1)))}
    if mode == "paper_literal":
        summary["corrections_zero"] = bool(np.all(phi1 == 0.0))
        passed = summary["corrections_zero"]
    else:
        passed = order is not None and order >= cfg.study.order_min
        summary["order_min"] = cfg.study.order_min
    if order is not None:
        summary["order"] = order
    summary["pass"] = bool(passed)
    out.json("expand.json", summary)
    return EXIT_OK if passed else EXIT_CHECK


COMMANDS = {
    "gap-scan": cmd_gap_scan,
    "solve": cmd_solve,
    "build-manifold": cmd_build_manifold,
    "verify": cmd_verify,
    "compare-eps": cmd_compare_eps,
    "expand": cmd_expand,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="config file (flat section.key = JSON lines)")
        p.add_argument("--out", help="output directory (overrides output.directory)")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--mode", choices=["paper-literal", "corrected"], default="corrected")
        if name == "verify":
            p.add_argument("--chart", help="chart file (default: <out>/chart.bin)")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load(args.config) if args.config else ExperimentConfig.from_flat({})
        overrides = {}
        if args.out is not None:
            overrides["output.directory"] = args.out
        if args.seed is not None:
            overrides["seed"] = args.seed
        if overrides:
            flat = cfg.to_flat()
            flat.update(overrides)
            cfg = ExperimentConfig.from_flat(flat)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
    except ConfigError as exc:
        print(f"fracim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Writer(Path(cfg.output.directory), cfg.output.formats)
    try:
        code = COMMANDS[args.command](cfg, args, out)
        out.pending.append(("config.resolved.txt", serialize(cfg)))
        out.flush()
    except RegimeError as exc:
        print(f"fracim: regime error: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except (ChartMismatchError, chartio.ChartFormatError) as exc:
        print(f"fracim: chart error: {exc}", file=sys.stderr)
        return EXIT_CHART
    except ConfigError as exc:
        print(f"fracim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, OSError, FracimError) as exc:
        print(f"fracim: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for path in out.written:
        print(path)
    if code != EXIT_OK:
        print(f"fracim: {args.command}: a check failed (see the JSON report)", file=sys.stderr)
    return code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()

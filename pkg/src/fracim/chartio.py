"""Chart files: a versioned binary container plus a CSV debug form.

Binary layout (all little-endian)::

    b"FRACIM-CHART 1\\n"
    uint64   header length in bytes
    bytes    UTF-8 JSON header (sorted keys)
    float64  phi, n_nodes x (M - N), row-major node order
    int64    iterations per node
    float64  contraction estimate per node

The header carries alpha, epsilon, M, K1, K2, N, sigma, the grid box, the
nonlinearity descriptor, the forcing coefficients and the LP tolerances.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import FracimError
from .lyapunov_perron import GridSpec, LPConfig, ManifoldChart
from .solver import NonlinearSpec
from .spectral import SpectrumModel

MAGIC = b"FRACIM-CHART 1\n"
SCHEMA = "fracim-chart/1"

_REQUIRED = (
    "schema", "alpha", "epsilon", "M", "K1", "K2", "N", "sigma", "grid",
    "nonlinearity", "g", "lp", "failed", "n_nodes",
)


class ChartFormatError(FracimError, ValueError):
    def __init__(self, field, message):
        super().__init__(f"chart header field {field!r}: {message}")
        self.field = field


def chart_header(chart: ManifoldChart) -> dict:
    m, c = chart.model, chart.config
    return {
        "schema": SCHEMA,
        "alpha": m.alpha,
        "epsilon": m.epsilon,
        "M": m.M,
        "K1": m.K1,
        "K2": m.K2,
        "N": chart.N,
        "sigma": chart.sigma,
        "grid": {
            "lower": list(chart.grid.lower),
            "upper": list(chart.grid.upper),
            "counts": list(chart.grid.counts),
        },
        "nonlinearity": chart.f_descriptor,
        "g": [float(x) for x in chart.g],
        "lp": {"T": c.T, "K": c.K, "tol": c.tol, "max_iter": c.max_iter, "tail_mode": c.tail_mode},
        "failed": list(chart.failed),
        "n_nodes": chart.grid.size,
    }


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def write_chart(chart: ManifoldChart, path) -> Path:
    path = Path(path)
    header = _dumps(chart_header(chart)).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(chart.phi, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(chart.iterations, dtype="<i8").tobytes())
        fh.write(np.ascontiguousarray(chart.contraction, dtype="<f8").tobytes())
    return path


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_chart_csv(chart: ManifoldChart, path) -> Path:
    path = Path(path)
    N, M = chart.N, chart.M
    cols = ["node"] + [f"p{i}" for i in range(1, N + 1)]
    cols += [f"phi{n}" for n in range(N + 1, M + 1)] + ["iterations", "contraction"]
    lines = ["# " + SCHEMA, "# header " + _dumps(chart_header(chart)), ",".join(cols)]
    for i, p in enumerate(chart.grid.nodes()):
        row = [str(i)] + [_fmt(x) for x in p] + [_fmt(x) for x in chart.phi[i]]
        row += [str(int(chart.iterations[i])), _fmt(chart.contraction[i])]
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")
    return path


def nonlinearity_from_descriptor(d: dict) -> NonlinearSpec:
    kind = d.get("kind")
    if kind == "zero":
        return NonlinearSpec.zero()
    if kind == "linear":
        return NonlinearSpec.linear(d["c"])
    if kind == "cubic":
        return NonlinearSpec.cubic(d["a"], d.get("b", 0.0), d.get("radius"))
    raise ChartFormatError("nonlinearity", f"cannot rebuild kind {kind!r} from a file")


def _validate_header(h: dict):
    for key in _REQUIRED:
        if key not in h:
            raise ChartFormatError(key, "missing")
    if h["schema"] != SCHEMA:
        raise ChartFormatError("schema", f"unsupported {h['schema']!r}")
    for key in ("M", "N", "n_nodes"):
        if not isinstance(h[key], int) or h[key] < 1:
            raise ChartFormatError(key, f"must be a positive integer, got {h[key]!r}")
    if not h["N"] < h["M"]:
        raise ChartFormatError("N", "must be smaller than M")
    for key in ("alpha", "epsilon", "sigma", "K1", "K2"):
        if not isinstance(h[key], (int, float)):
            raise ChartFormatError(key, f"must be a number, got {h[key]!r}")
    if len(h["g"]) != h["M"]:
        raise ChartFormatError("g", f"expected {h['M']} coefficients")
    grid = h["grid"]
    if not isinstance(grid, dict) or len(grid.get("counts", ())) != h["N"]:
        raise ChartFormatError("grid", "axis count does not match N")
    if int(np.prod(grid["counts"])) != h["n_nodes"]:
        raise ChartFormatError("n_nodes", "does not match the grid")


def read_chart(path) -> ManifoldChart:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise ChartFormatError("schema", "bad magic line")
    pos = len(MAGIC)
    (hlen,) = struct.unpack_from("<Q", data, pos)
    pos += 8
    try:
        h = json.loads(data[pos : pos + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ChartFormatError("header", f"unreadable JSON ({exc})") from None
    _validate_header(h)
    pos += hlen
    n, D = h["n_nodes"], h["M"] - h["N"]
    need = pos + 8 * (n * D + 2 * n)
    if len(data) != need:
        raise ChartFormatError("n_nodes", f"payload size {len(data) - pos} != {need - pos}")
    phi = np.frombuffer(data, "<f8", n * D, pos).reshape(n, D).astype(float)
    pos += 8 * n * D
    iters = np.frombuffer(data, "<i8", n, pos).astype(int)
    pos += 8 * n
    contr = np.frombuffer(data, "<f8", n, pos).astype(float)
    try:
        model = SpectrumModel(h["alpha"], h["epsilon"], h["M"], h["K1"], h["K2"])
    except ValueError as exc:
        raise ChartFormatError("alpha/epsilon", str(exc)) from None
    grid = GridSpec(tuple(h["grid"]["lower"]), tuple(h["grid"]["upper"]), tuple(h["grid"]["counts"]))
    lp = h["lp"]
    config = LPConfig(lp["T"], lp["K"], lp["tol"], lp["max_iter"], lp["tail_mode"])
    return ManifoldChart(
        N=h["N"],
        grid=grid,
        phi=phi,
        model=model,
        sigma=float(h["sigma"]),
        config=config,
        f_descriptor=h["nonlinearity"],
        g=np.array(h["g"], dtype=float),
        iterations=iters,
        contraction=contr,
        failed=tuple(h["failed"]),
    )

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from fracim import chartio
from fracim.cli import EXIT_CHART, EXIT_CHECK, EXIT_CONFIG, EXIT_OK, EXIT_REGIME, fmt, run
from fracim.spectral import SpectrumModel

CONFIGS = Path(__file__).resolve().parents[1] / "demos" / "configs"

ZERO_F = """\
operator.alpha = 1.5
operator.M = 12
nonlinearity.kind = "zero"
forcing.coeffs = [0.4, -0.3, 0.5, 0.2, 0.0, -0.1]
lp.N = 2
lp.K = 128
lp.tol = 1e-12
grid.nodes = 3
study.samples = 3
study.epsilons = [0.1, 0.01]
"""


def _cfg(tmp_path, text, name="c.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _run(cmd, cfg, out, *extra):
    return run([cmd, "--config", cfg, "--out", str(out), *extra])


def test_fmt():
    assert fmt(None) == "NONE" and fmt(True) == "true" and fmt(np.int64(3)) == "3"
    assert fmt(0.1) == "0.10000000000000001" and float(fmt(1 / 3)) == 1 / 3


def test_gap_scan_rows(tmp_path):
    assert _run("gap-scan", str(CONFIGS / "gap_scan.cfg"), tmp_path) == EXIT_OK
    rows = _csv(tmp_path / "gap_scan.csv")
    pick = {(r["alpha"], r["epsilon"], r["l_f"]): r for r in rows}
    assert pick[("0.5", "0", "0.20000000000000001")]["N"] == "NONE"
    assert pick[("1", "0", "0.20000000000000001")]["N"] == "1"
    assert pick[("1.5", "0", "0.20000000000000001")]["N"] == "1"
    assert all(r["N"] == "1" for r in rows if r["l_f"] == "0")
    report = json.loads((tmp_path / "gap_scan.json").read_text())
    assert len(report["rows"]) == len(rows) == 18


def test_gap_scan_empty_alpha_grid(tmp_path):
    cfg = _cfg(tmp_path, "study.alphas = []\n")
    assert _run("gap-scan", cfg, tmp_path / "o") == EXIT_OK
    lines = (tmp_path / "o" / "gap_scan.csv").read_text().splitlines()
    assert lines == ["alpha,epsilon,l_f,N,gap,sigma_lo,sigma_hi,window_nonempty,regime"]


def test_build_zero_f_chart_is_flat(tmp_path):
    cfg = _cfg(tmp_path, ZERO_F)
    assert _run("build-manifold", cfg, tmp_path) == EXIT_OK
    chart = chartio.read_chart(tmp_path / "chart.bin")
    g = np.zeros(12)
    g[:6] = [0.4, -0.3, 0.5, 0.2, 0.0, -0.1]
    lam = SpectrumModel(1.5, 0.0, 12).eigenvalues
    np.testing.assert_allclose(chart.phi, np.tile(g[2:] / lam[2:], (9, 1)), rtol=1e-12, atol=1e-15)
    summary = json.loads((tmp_path / "build_summary.json").read_text())
    assert summary["N"] == 2 and summary["failed_nodes"] == [] and summary["pass"]


def test_alpha_half_is_regime_error(tmp_path, capsys):
    assert _run("build-manifold", str(CONFIGS / "alpha_half.cfg"), tmp_path) == EXIT_REGIME
    assert "AlphaBelowOne" in capsys.readouterr().err
    assert not (tmp_path / "chart.bin").exists()


def test_config_errors_exit_2(tmp_path, capsys):
    cfg = _cfg(tmp_path, "operator.alpha = 3\n")
    assert _run("solve", cfg, tmp_path) == EXIT_CONFIG
    assert "operator.alpha" in capsys.readouterr().err
    assert _run("solve", str(tmp_path / "missing.cfg"), tmp_path) == EXIT_CONFIG
    assert run(["solve", "--threads", "0"]) == EXIT_CONFIG


def test_rerun_is_byte_identical(tmp_path):
    cfg = _cfg(tmp_path, ZERO_F)
    out = tmp_path / "o"
    snapshots = []
    for _ in range(2):
        assert _run("build-manifold", cfg, out) == EXIT_OK
        assert _run("solve", cfg, out, "--seed", "5") == EXIT_OK
        snapshots.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert snapshots[0] == snapshots[1] and "chart.bin" in snapshots[0]


def test_verify_linear_chart_passes(tmp_path):
    cfg = str(CONFIGS / "linear.cfg")
    assert _run("build-manifold", cfg, tmp_path) == EXIT_OK
    assert _run("verify", cfg, tmp_path) == EXIT_OK
    report = json.loads((tmp_path / "verify.json").read_text())
    assert report["pass"] and {r["test"] for r in report["records"]} == {"invariance", "tracking", "dissipation"}
    for rec in report["records"]:
        assert set(rec) == {"test", "parameters", "values", "pass"}


def test_verify_t_test_zero(tmp_path):
    cfg = _cfg(tmp_path, ZERO_F + "study.t_test = [0.0]\n")
    assert _run("build-manifold", cfg, tmp_path) == EXIT_OK
    _run("verify", cfg, tmp_path)
    report = json.loads((tmp_path / "verify.json").read_text())
    inv = [r for r in report["records"] if r["test"] == "invariance"]
    assert len(inv) == 1 and inv[0]["values"]["max_residual"] == 0.0 and inv[0]["pass"]


def test_verify_corrupted_header(tmp_path, capsys):
    cfg = _cfg(tmp_path, ZERO_F)
    assert _run("build-manifold", cfg, tmp_path) == EXIT_OK
    path = tmp_path / "chart.bin"
    data = path.read_bytes()
    path.write_bytes(data.replace(b'"sigma":', b'"sigmx":', 1))
    assert _run("verify", cfg, tmp_path) == EXIT_CHART
    assert "sigma" in capsys.readouterr().err


def test_verify_mismatch_lists_fields(tmp_path, capsys):
    cfg = _cfg(tmp_path, ZERO_F)
    assert _run("build-manifold", cfg, tmp_path / "a") == EXIT_OK
    other = _cfg(tmp_path, ZERO_F.replace("lp.K = 128", "lp.K = 64") + "operator.K1 = 2.0\n", "other.cfg")
    chart = str(tmp_path / "a" / "chart.bin")
    assert _run("verify", other, tmp_path / "b", "--chart", chart) == EXIT_CHART
    err = capsys.readouterr().err
    assert "lp.K" in err and "K1" in err


def test_compare_eps_single_eps_has_no_slope(tmp_path):
    text = ZERO_F.replace("study.epsilons = [0.1, 0.01]", "study.epsilons = [0.01]")
    cfg = _cfg(tmp_path, text)
    assert _run("compare-eps", cfg, tmp_path) == EXIT_OK
    summary = json.loads((tmp_path / "compare_eps.json").read_text())
    assert "slope" not in summary and summary["rows"] == 1
    assert len(_csv(tmp_path / "compare_eps.csv")) == 1


def test_compare_eps_alpha_below_one(tmp_path):
    cfg = _cfg(tmp_path, ZERO_F.replace("operator.alpha = 1.5", "operator.alpha = 0.8"))
    assert _run("compare-eps", cfg, tmp_path) == EXIT_REGIME


def test_expand_paper_literal_and_corrected(tmp_path):
    cfg = _cfg(tmp_path, ZERO_F.replace("[0.1, 0.01]", "[0.1, 0.01, 0.001]"))
    assert _run("expand", cfg, tmp_path / "lit", "--mode", "paper-literal") == EXIT_OK
    lit = json.loads((tmp_path / "lit" / "expand.json").read_text())
    assert lit["corrections_zero"] and lit["phi1_max"] == 0.0
    phi1 = chartio.read_chart(tmp_path / "lit" / "expansion_phi1.bin")
    assert np.all(phi1.phi == 0.0)
    assert _run("expand", cfg, tmp_path / "cor", "--mode", "corrected") == EXIT_OK
    cor = json.loads((tmp_path / "cor" / "expand.json").read_text())
    assert cor["order"] >= 1.8 and cor["pass"]


def test_failed_check_exits_nonzero(tmp_path):
    # f = 0 distances bend away from slope 1, so a tight slope window fails
    text = ZERO_F.replace("[0.1, 0.01]", "[0.1, 0.01, 0.001]") + "study.slope_range = [0.99, 1.01]\n"
    assert _run("compare-eps", _cfg(tmp_path, text), tmp_path) == EXIT_CHECK
    assert json.loads((tmp_path / "compare_eps.json").read_text())["pass"] is False

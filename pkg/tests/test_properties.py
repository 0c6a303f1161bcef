"""Property-based checks of the structural invariants."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fracim import chartio
from fracim.config import ExperimentConfig, parse, serialize
from fracim.gap import find_gap_index, gap_sequence
from fracim.lyapunov_perron import GridSpec, LPConfig, build_chart
from fracim.solver import NonlinearSpec, SolveProblem, evolve
from fracim.spectral import (
    SpectralField,
    SpectrumModel,
    analyze,
    eigenvalue,
    project,
    semigroup_apply,
    synthesize,
)

alphas = st.floats(0.05, 1.95)
epsilons = st.floats(0.0, 0.5)
coeffs = lambda M: arrays(float, M, elements=st.floats(-10, 10))


@given(alphas, epsilons, st.integers(1, 10**6), st.integers(1, 10**6))
def test_eigenvalues_increase(alpha, eps, n, m):
    if n == m:
        return
    lo, hi = sorted((n, m))
    assert eigenvalue(lo, alpha, eps) < eigenvalue(hi, alpha, eps)


@given(alphas, st.floats(1e-3, 0.5), st.integers(1, 10**4))
def test_epsilon_decomposition(alpha, eps, n):
    diff = eigenvalue(n, alpha, eps) - eigenvalue(n, alpha, 0.0)
    assert np.isclose(diff, eps * n * n, rtol=1e-12, atol=1e-12 * eigenvalue(n, alpha, eps))


@given(st.floats(0.05, 0.95), st.integers(1, 10**4))
def test_sub_one_gaps_decrease(alpha, n):
    assert gap_sequence(n + 1, alpha, 0.0) < gap_sequence(n, alpha, 0.0)


@given(alphas, epsilons, st.floats(0.0, 2.0))
@settings(max_examples=50)
def test_gap_index_stable_under_larger_scan(alpha, eps, l_f):
    model = SpectrumModel(alpha, eps, 10**4 + 1)
    small = find_gap_index(model, l_f, 10**3)
    if small is not None:
        assert find_gap_index(model, l_f, 10**4).N == small.N


@given(alphas, epsilons, coeffs(12), st.floats(0, 5), st.floats(0, 5))
def test_semigroup_law(alpha, eps, a, s, t):
    model = SpectrumModel(alpha, eps, 12)
    u = SpectralField(a)
    two = semigroup_apply(semigroup_apply(u, s, model), t, model).coeffs
    one = semigroup_apply(u, s + t, model).coeffs
    np.testing.assert_allclose(two, one, rtol=1e-12, atol=1e-300)
    assert np.linalg.norm(one) <= np.exp(-model.lam(1) * (s + t)) * u.norm() * (1 + 1e-12)


@given(coeffs(10), st.integers(0, 10))
def test_projection_partition(a, N):
    u = SpectralField(a)
    p, q = project(u, N, "low"), project(u, N, "high")
    assert p + q == u
    assert project(p, N, "low") == p and project(q, N, "high") == q
    assert float(np.dot(p.coeffs, q.coeffs)) == 0.0


@given(coeffs(16), st.integers(32, 80))
def test_synthesis_round_trip(a, J):
    back = analyze(synthesize(SpectralField(a), J), 16).coeffs
    np.testing.assert_allclose(back, a, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max()))


@given(coeffs(8), st.floats(0.1, 3.0))
@settings(max_examples=30, deadline=None)
def test_linear_flow_matches_closed_form(a, t):
    # f = 0: exponential Euler is exact, so any step size reproduces e^{-tA}
    model = SpectrumModel(1.5, 0.0, 8)
    g = SpectralField(np.linspace(1.0, -1.0, 8))
    res = evolve(SpectralField(a), t, t / 7, SolveProblem(model, NonlinearSpec.zero(), g))
    lam = model.eigenvalues
    want = np.exp(-lam * t) * a + (1 - np.exp(-lam * t)) * g.coeffs / lam
    np.testing.assert_allclose(res.final.coeffs, want, rtol=1e-12, atol=1e-12)


@given(
    st.floats(0.1, 1.9),
    st.floats(0.0, 0.9),
    st.integers(2, 40),
    st.sampled_from(["zero", "linear"]),
    st.floats(-1.0, 1.0),
    st.integers(0, 2**31),
)
def test_config_round_trip(alpha, eps, M, kind, c, seed):
    cfg = ExperimentConfig.from_flat(
        {"operator.alpha": alpha, "operator.epsilon": eps, "operator.M": M,
         "nonlinearity.kind": kind, "nonlinearity.c": c, "seed": seed}
    )
    text = serialize(cfg)
    assert parse(text) == cfg and serialize(parse(text)) == text


@given(g=arrays(float, 6, elements=st.floats(-1, 1)))
@settings(max_examples=10, deadline=None)
def test_chart_file_round_trip(tmp_path_factory, g):
    prob = SolveProblem(SpectrumModel(1.5, 0.0, 6), NonlinearSpec.linear(0.1), SpectralField(g))
    chart = build_chart(GridSpec.box(1.0, 1, 3), prob, 1, config=LPConfig(K=64, tol=1e-8))
    path = chartio.write_chart(chart, tmp_path_factory.mktemp("c") / "c.bin")
    back = chartio.read_chart(path)
    assert np.array_equal(back.phi, chart.phi) and chartio.chart_header(back) == chartio.chart_header(chart)

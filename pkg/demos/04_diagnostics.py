"""Checking a computed chart: invariance, exponential tracking, dissipation."""

import numpy as np

from fracim import (
    GridSpec,
    LPConfig,
    NonlinearSpec,
    SolveProblem,
    SpectralField,
    SpectrumModel,
    build_chart,
    energy_monitor,
    evolve,
    invariance_residual,
    tracking_fit,
)

R = 1.5
k = 0.1 / (3 * R * R - 1)
M = 16
g = np.zeros(M)
g[:6] = [0.3, -0.2, 0.25, 0.1, -0.1, 0.05]
prob = SolveProblem(SpectrumModel(1.5, 0.0, M), NonlinearSpec.cubic(k, -k, R), SpectralField(g))
chart = build_chart(GridSpec.box(1.0, 1, 17), prob, 1, config=LPConfig(K=512, tol=1e-12))

samples = np.linspace(-0.8, 0.8, 5)[:, None]
for t in (0.5, 1.0, 2.0):
    rep = invariance_residual(chart, prob, t, samples)
    print(f"invariance t={t}: max residual {rep.max_residual:.2e} (relative {rep.relative:.2e})")

rng = np.random.default_rng(0)
u0 = np.zeros(M)
u0[0] = rng.uniform(-0.8, 0.8)
u0[1:] = 0.5 * rng.normal(size=M - 1) / np.arange(2, M + 1)
rate = prob.model.lam(2) - chart.sigma
rep = tracking_fit(SpectralField(u0), chart, prob, 3.0 * (1 + 1e-6) / rate, 0.01)
print(f"tracking: |u - v| ~ {rep.eta:.3g} exp(-{rep.beta:.3f} t), R^2 = {rep.r2:.4f}")

horizon = 50.0 / prob.model.lam(1)
run = evolve(SpectralField(u0), horizon, 0.01, prob)
dis = energy_monitor(run.energy, run.times, prob.g, prob.model)
tail = np.sqrt(run.energy[dis.window[0]:].max())
print(f"dissipation: c = {dis.c:.3f}, absorbing radius {dis.radius:.6f}, tail max {tail:.6f}")

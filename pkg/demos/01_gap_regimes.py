"""Where an inertial manifold exists: the spectral gap in the three alpha regimes.

For 1 < alpha < 2 the gap lambda_{n+1} - lambda_n grows without bound, at
alpha = 1 it is the constant 1/2 (plus 2 eps n from the viscous term), and for
alpha < 1 it decays to zero unless eps > 0 adds the n^2 part back.
"""

import numpy as np

from fracim import SpectrumModel, classify_regime, find_gap_index, gap_sequence

n = np.array([1, 10, 100, 1000, 10**4, 10**5, 10**6])
print("gap(n) at eps = 0")
print("alpha " + "".join(f"{k:>11d}" for k in n))
for alpha in (0.5, 0.8, 1.0, 1.2, 1.5, 1.9):
    print(f"{alpha:5.2f} " + "".join(f"{x:11.4g}" for x in gap_sequence(n, alpha, 0.0)))

print("\nsmallest N with gap(N) > 2 l_f, searched up to n = 1e6")
n_max = 10**6
for alpha, eps in ((0.5, 0.0), (0.5, 0.05), (1.0, 0.0), (1.5, 0.0)):
    model = SpectrumModel(alpha, eps, n_max + 1)
    regime, why = classify_regime(alpha)
    found = []
    for l_f in (0.1, 0.5, 2.0, 5.0):
        rep = find_gap_index(model, l_f, n_max)
        found.append("none" if rep is None else str(rep.N))
    print(f"alpha={alpha:<4} eps={eps:<5} l_f=0.1,0.5,2,5 -> N = {', '.join(found):<22} ({why})")

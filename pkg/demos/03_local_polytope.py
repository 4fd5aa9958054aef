"""
How far is the singlet from every local model?
==============================================

A local model is a mixture of the 16 deterministic strategies, so its four
correlations lie in a polytope cut out by the box |E| <= 1 and the eight
CHSH facets. The best local fit to a table in the max norm is at distance
(worst facet excess) / 4.
"""
import numpy as np

from bbmv import (
    CorrelationTable,
    LHVMixture,
    as_density,
    best_lhv_fit,
    enumerate_deterministic,
    optimize_settings,
    singlet,
    werner,
)

print("deterministic CHSH values:", sorted({abs(s.table().chsh()) for s in enumerate_deterministic()}))

rng = np.random.default_rng(3)
print("largest |S| over 10^4 random mixtures:",
      max(abs(LHVMixture.random(rng).chsh()) for _ in range(10_000)))

# %%
rho = as_density(singlet())
quad, s_max = optimize_settings(rho)
table = CorrelationTable.from_state(rho, quad)
mix, residual = best_lhv_fit(table)
print(f"\nsinglet at optimal settings: S = {s_max:.6f}")
print("  correlations:", np.round(table.values(), 6))
print("  best local  :", np.round(mix.table().values(), 6), " S =", round(mix.chsh(), 6))
print(f"  residual {residual:.9f}   (2 sqrt2 - 2)/4 = {(2 * np.sqrt(2) - 2) / 4:.9f}")
print("  strategies used:", {k: round(w, 4) for k, w in enumerate(mix.weights) if w > 0})

# %%
# Werner states stop violating at visibility 1/sqrt(2), and the residual
# reaches zero at the same point.
print("\n visibility   S_max     residual")
for v in (1.0, 0.9, 0.8, 1 / np.sqrt(2), 0.6):
    q, s = optimize_settings(werner(v))
    print(f"  {v:.4f}    {s:.5f}   {best_lhv_fit(CorrelationTable.from_state(werner(v), q))[1]:.6f}")

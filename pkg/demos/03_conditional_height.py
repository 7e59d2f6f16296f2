"""
How high does a typical leaf sit above the wall?
================================================

Conditioned on all leaves being positive, the mean leaf height equals
E[X | max phi_tilde <= X]. The ratio estimator below weights each sample
of the max by its hard-wall probability. Comparing with the centering m_n,
the gap grows roughly like log n.
"""

import math

from hardwall import TreeShape, estimate_conditional_mean, m_n, theorem2_sandwich

print("one level, closed form sqrt(2/pi) =", math.sqrt(2 / math.pi))
print(estimate_conditional_mean(TreeShape(2, 1), 200_000, seed=1).to_dict(timing=False))

shapes = [TreeShape(2, n) for n in (4, 6, 8, 10, 12)]
records = []
for shape in shapes:
    rec = estimate_conditional_mean(shape, 20_000, seed=3)
    records.append(rec)
    print(f"n={shape.n:2d}  E = {rec.value:7.3f} +- {rec.stderr:.3f}   "
          f"m_n - E = {m_n(shape) - rec.value:6.3f}   ESS {rec.ess:8.1f}")

fit = theorem2_sandwich(shapes, records)
print(f"gap ~ {fit.intercept:.2f} + {fit.slope:.2f} log n, 95% CI for the slope "
      f"[{fit.slope_ci[0]:.2f}, {fit.slope_ci[1]:.2f}]")

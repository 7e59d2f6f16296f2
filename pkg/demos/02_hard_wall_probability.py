"""
Probability that every leaf is positive
=======================================

Because xi = phi_tilde + X with X independent, all leaves are nonnegative
exactly when max phi_tilde <= X. Given the max M that happens with
probability Q(M / sigma), so averaging Q over samples of M estimates the
hard-wall probability with less variance than counting positive samples.
"""

from hardwall import TreeShape, estimate_positivity, orthant_reference

for d, n in [(2, 1), (2, 2), (3, 1), (2, 3), (3, 2)]:
    shape = TreeShape(d, n)
    naive = estimate_positivity(shape, 200_000, seed=1, method="naive")
    cond = estimate_positivity(shape, 200_000, seed=2, method="conditional")
    exact = orthant_reference(shape)
    print(f"d={d} n={n}  naive {naive.value:.5f} +- {naive.stderr:.5f}   "
          f"conditional {cond.value:.5f} +- {cond.stderr:.5f}   exact {exact}")

# deeper trees: the probability underflows quickly, so work with its log
for n in (6, 8, 10, 12):
    rec = estimate_positivity(TreeShape(2, n), 20_000, seed=n)
    print(f"n={n:2d}  log P = {rec.log_value:9.3f} +- {rec.log_stderr:.3f}")

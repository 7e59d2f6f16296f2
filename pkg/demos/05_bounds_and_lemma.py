"""
Shift lambda', bound formulas and a log-sum lemma
=================================================

lambda' balances the Gaussian cost of lifting the whole field against the
double-exponential cost of squeezing the maximum, and d**(c lambda') grows
in proportion to n. The bound formulas take user-supplied constants, since
none are known numerically.
"""

import math

from hardwall import (BoundParams, Centering, TreeShape, eval_lefttail_bounds,
                      eval_positivity_bounds, log_sum_lemma, solve_lambda_prime)

c = Centering.for_d(2).c
for n in (16, 64, 256, 1024):
    lam = solve_lambda_prime(TreeShape(2, n), Cpp=1.0)
    print(f"n={n:5d}  lambda'={lam:7.4f}  2**(c lambda')/n = {2 ** (c * lam) / n:.3f}")

shape = TreeShape(2, 16)
params = BoundParams(K1=1.0, K2=1.0, K3=2.0, Kp=1.0, Kpp=0.5)
lo, hi = eval_positivity_bounds(shape, params, solve_lambda_prime(shape, 1.0))
print(f"log positivity bounds at n=16: [{lo:.3f}, {hi:.3f}]")
print("left-tail bounds at lambda=2:", eval_lefttail_bounds(shape, 2.0, params))

for n in (1, 3, 10, 40, 60):
    r = log_sum_lemma(n, 2)
    print(f"n={n:2d}  sum={r.sum:.6g}  ratio={r.ratio:.5f}  bound={r.paper_upper:.6g}")
print("huge tree, log space:", log_sum_lemma(5000, 3).log_sum, "<=",
      log_sum_lemma(5000, 3).log_upper)
print("limit of the ratio for d=2:", sum(math.log(k) * 2.0 ** (1 - k) for k in range(1, 200)))

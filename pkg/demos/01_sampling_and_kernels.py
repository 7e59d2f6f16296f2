"""
Two ways to build the same field
================================

A branching random walk puts one unit Gaussian on every edge of a d-ary tree
and reads off sums at the leaves. The switching-sign construction instead
gives each vertex zero-sum child increments and adds one shared Gaussian X
at the end. The two fields have the same covariance, hence the same law.
"""

import numpy as np

from hardwall import RngStream, TreeShape, brw, oracle, ssbrw

shape = TreeShape(d=3, n=2)

# exact kernels, leaves in flat-index order
k_brw = oracle.exact_cov_matrix(shape, "brw_kernel").matrix
k_phi = oracle.exact_cov_matrix(shape, "phi_tilde_kernel").matrix
print("BRW covariance:\n", k_brw)
print("difference to the zero-sum kernel:", np.unique(k_brw - k_phi), "=",
      ssbrw.sigma2_dn(shape))

# sample both fields and compare empirical covariances with the kernels
count = 50_000
x_brw = brw.brw_leaves(shape, RngStream(1, 0), count)
phi, x = ssbrw.phi_tilde_leaves(shape, RngStream(1, 1), count)
xi = phi + x[:, None]
print("max |emp - exact|, BRW          :", np.abs(oracle.empirical_cov(x_brw) - k_brw).max())
print("max |emp - exact|, phi_tilde + X:", np.abs(oracle.empirical_cov(xi) - k_brw).max())

# every vertex's children sum to zero, so the leaves of phi_tilde do too
print("largest |sum of leaves| of phi_tilde:", np.abs(phi.sum(axis=1)).max())

# a single draw in full mode, and the same stream in max-only mode
full = ssbrw.sample_phi_tilde(TreeShape(2, 10), RngStream(7), mode="full")
fast = ssbrw.sample_phi_tilde(TreeShape(2, 10), RngStream(7), mode="max_only")
print("full vs max-only max:", full.max, fast.max, "argmax", full.argmax.digits)

"""Branching random walks on d-ary trees under a hard wall.

The switching-sign decomposition writes the BRW as a zero-sum field plus one
shared Gaussian, which turns the all-positive event into a statement about
the maximum of the zero-sum field.
"""
__version__ = "0.1.0"

from .brw import (BrwSample, Centering, ComparisonSample, brw_cov, brw_cov_matrix, brw_leaves,
                  brw_maxima, comparison_maxima, m_n, sample_brw, sample_comparison_max)
from .estimators import (BoundParams, EstimateRecord, NoInteriorRoot, TailCurve,
                         estimate_conditional_mean, estimate_max_cdf, estimate_positivity,
                         eval_lefttail_bounds, eval_positivity_bounds, log_sum_lemma,
                         solve_lambda_prime, theorem2_sandwich, tilted_left_tail)
from .gaussian import RngStream, cholesky_small, next_gaussian, normal_tail_q
from .oracle import DenseCov, empirical_cov, exact_cov_matrix, mc_orthant, orthant_reference
from .ssbrw import (SsbrwSample, build_switch_matrix, level_variance, phi_tilde_cov,
                    phi_tilde_cov_matrix, sample_phi_tilde, sigma2_dn)
from .tree import LeafId, ShapeError, TreeShape, leaf_count, split_depth, tree_distance

__all__ = [name for name in dir() if not name.startswith("_")]

"""Oracle cross-checks behind ``hardwall validate`` and the acceptance tests.

Each check returns a :class:`Check` holding its verdict and the numbers it
was judged on. ``TIERS`` sets the sample sizes: ``full`` uses the sizes the
checks are specified at, ``quick`` shrinks them to finish in about a minute.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List

import numpy as np

from . import brw, estimators, oracle, ssbrw
from .brw import Centering, m_n
from .gaussian import RngStream
from .tree import TreeShape


@dataclass
class Check:
    name: str
    passed: bool
    detail: str
    values: dict = field(default_factory=dict)
    seconds: float = 0.0

    def payload(self) -> dict:
        return {"check": self.name, "passed": self.passed, "detail": self.detail,
                "values": self.values}


TIERS = {
    "quick": dict(cov_samples=20_000, orthant_samples=100_000, mean_samples=100_000,
                  gap_heights=(4, 5, 6, 7, 8), gap_samples=20_000, tail_samples=100_000,
                  slepian_samples=10_000),
    "full": dict(cov_samples=100_000, orthant_samples=1_000_000, mean_samples=1_000_000,
                 gap_heights=(8, 10, 12, 14, 16), gap_samples=1_000_000,
                 tail_samples=1_000_000, slepian_samples=100_000),
}


def _kernel_shapes():
    for d in (2, 3, 4, 5):
        n = 1
        while d**n <= 1024:
            yield TreeShape(d, n)
            n += 1


def check_kernel_equality(tier: str = "full", seed: int = 0) -> Check:
    worst = 0.0
    for shape in _kernel_shapes():
        a = oracle.exact_cov_matrix(shape, "brw_kernel").matrix
        b = oracle.exact_cov_matrix(shape, "phi_tilde_kernel").matrix + ssbrw.sigma2_dn(shape)
        worst = max(worst, float(np.max(np.abs(a - b))))
    return Check("kernel_equality", worst <= 1e-10, f"max |diff| = {worst:.3e} <= 1e-10",
                 {"max_abs_diff": worst})


def _cov_zscore(leaves: np.ndarray, exact: np.ndarray) -> float:
    emp = oracle.empirical_cov(leaves)
    return float(np.max(np.abs(emp - exact) / oracle.cov_stderr(exact, leaves.shape[0])))


def node_sums(edges: np.ndarray, d: int) -> np.ndarray:
    """Sum of the ``d`` child increments of every internal vertex, per sample."""
    return edges.reshape(edges.shape[0], -1, d).sum(axis=2)


def check_construction(tier: str = "full", seed: int = 0) -> Check:
    count = TIERS[tier]["cov_samples"]
    values = {}
    ok = True
    for d, n in ((2, 3), (3, 2)):
        shape = TreeShape(d, n)
        z_brw = _cov_zscore(brw.brw_leaves(shape, RngStream(seed, 0), count),
                            brw.brw_cov_matrix(shape))
        leaves, edges = ssbrw.phi_tilde_edges(shape, RngStream(seed, 1), count)
        z_phi = _cov_zscore(leaves, ssbrw.phi_tilde_cov_matrix(shape))
        zero_sum = float(np.max(np.abs(node_sums(edges, d))))
        leaf_sum = float(np.max(np.abs(leaves.sum(axis=1))))
        tol = 1e-8 * shape.leaf_count
        ok &= z_brw <= 5 and z_phi <= 5 and zero_sum <= tol and leaf_sum <= tol
        values[f"{d},{n}"] = {"brw_max_z": z_brw, "phi_tilde_max_z": z_phi,
                              "max_node_sum": zero_sum, "max_leaf_sum": leaf_sum}
    return Check("construction_fidelity", bool(ok),
                 "empirical covariances within 5 stderr; node sums within 1e-8 d^n", values)


def check_orthant(tier: str = "full", seed: int = 0) -> Check:
    count = TIERS[tier]["orthant_samples"]
    values = {}
    ok = True
    for d, n in ((2, 1), (2, 2), (3, 1)):
        shape = TreeShape(d, n)
        ref = oracle.orthant_reference(shape)
        cond = estimators.estimate_positivity(shape, count, seed, method="conditional")
        naive = estimators.estimate_positivity(shape, count, seed + 1, method="naive")
        z_ref = abs(cond.value - ref) / cond.stderr
        z_pair = abs(cond.value - naive.value) / math.hypot(cond.stderr, naive.stderr)
        ok &= z_ref <= 3 and z_pair <= 3 and cond.stderr < naive.stderr
        values[f"{d},{n}"] = {"reference": ref, "conditional": cond.value,
                              "conditional_stderr": cond.stderr, "naive": naive.value,
                              "naive_stderr": naive.stderr, "z_reference": z_ref,
                              "z_pair": z_pair}
    return Check("hard_wall_oracles", bool(ok),
                 "conditional within 3 stderr of exact; agrees with naive; smaller stderr",
                 values)


def check_conditional_mean(tier: str = "full", seed: int = 0) -> Check:
    count = TIERS[tier]["mean_samples"]
    one = estimators.estimate_conditional_mean(TreeShape(2, 1), count, seed)
    exact = math.sqrt(2.0 / math.pi)
    z1 = abs(one.value - exact) / one.stderr
    two = estimators.estimate_conditional_mean(TreeShape(2, 2), count, seed)
    rej = oracle.rejection_conditional_mean(TreeShape(2, 2), count, seed + 1)
    z2 = abs(two.value - rej.value) / math.hypot(two.stderr, rej.stderr)
    return Check("conditional_mean", bool(z1 <= 3 and z2 <= 3),
                 "closed form at (2,1) and rejection oracle at (2,2) within 3 stderr",
                 {"d2n1": one.value, "d2n1_exact": exact, "z_exact": z1,
                  "d2n2": two.value, "d2n2_rejection": rej.value, "z_rejection": z2})


def check_log_gap(tier: str = "full", seed: int = 0) -> Check:
    cfg = TIERS[tier]
    shapes = [TreeShape(2, n) for n in cfg["gap_heights"]]
    records = [estimators.estimate_conditional_mean(s, cfg["gap_samples"], seed) for s in shapes]
    fit = estimators.theorem2_sandwich(shapes, records)
    return Check("log_gap_slope", fit.slope_positive, "95% CI of the gap slope on log n is > 0",
                 {"heights": list(cfg["gap_heights"]), "gaps": fit.gaps.tolist(),
                  "stderrs": [r.stderr for r in records], "ess": [r.ess for r in records],
                  "slope": fit.slope, "slope_ci": list(fit.slope_ci)})


def check_left_tail(tier: str = "full", seed: int = 0) -> Check:
    count = TIERS[tier]["tail_samples"]
    shape = TreeShape(2, 12)
    prof = estimators.left_tail_profile(shape, [0.5, 1.0, 1.5, 2.0, 2.5], 0.25, count, seed)
    p = np.array([r.value for r in prof.records])
    ess = [r.ess for r in prof.records]
    d2, se = prof.second_differences()
    decreasing = bool(np.all(np.diff(p) < 0))
    concave = bool(np.all(d2 + 3 * se < 0))
    c = Centering.for_d(2).c
    heights = range(16, 1025)
    band = [2.0 ** (c * estimators.solve_lambda_prime(TreeShape(2, n), 1.0)) / n for n in heights]
    in_band = 0.05 <= min(band) and max(band) <= 20
    ok = decreasing and concave and min(ess) >= 100 and in_band
    return Check("left_tail_shape", bool(ok),
                 "P decreasing, second differences of log P below -3 stderr, ESS >= 100, "
                 "d^(c lambda')/n in [0.05, 20]",
                 {"probabilities": p.tolist(), "second_differences": d2.tolist(),
                  "second_difference_stderr": se.tolist(), "ess": ess,
                  "band_min": min(band), "band_max": max(band)})


def check_slepian(tier: str = "full", seed: int = 0) -> Check:
    count = TIERS[tier]["slepian_samples"]
    shape = TreeShape(2, 10)
    grid = m_n(shape) + np.arange(-4.0, 4.01, 0.25)
    low = estimators.estimate_max_cdf(shape, "brw", grid, count, seed)
    high = estimators.estimate_max_cdf(shape, "comparison", grid, count, seed + 1, n_prime=7)
    margin = high.values - low.values + 3 * np.hypot(high.stderrs, low.stderrs)
    return Check("slepian_dominance", bool(np.all(margin >= 0)),
                 "comparison CDF >= BRW CDF - 3 joint stderr on every threshold",
                 {"min_margin": float(margin.min()),
                  "max_cdf_gap": float(np.max(high.values - low.values))})


def check_lemma_sum(tier: str = "full", seed: int = 0) -> Check:
    bound_ok = all(
        estimators.log_sum_lemma(n, d).log_sum <= estimators.log_sum_lemma(n, d).log_upper + 1e-12
        for d in (2, 3) for n in range(2, 61)
    ) and estimators.log_sum_lemma(1, 2).sum == 0.0
    small = estimators.log_sum_lemma(3, 2)
    ratios = [estimators.log_sum_lemma(n, 2).ratio for n in (10, 20, 40, 60)]
    steps = np.abs(np.diff(ratios))
    ok = (bound_ok and abs(small.sum - 4.96981) < 1e-5 and abs(small.ratio - 0.62123) < 1e-5
          and small.paper_upper == 22.0 and all(0.5 <= r <= 1.2 for r in ratios)
          and bool(np.all(np.diff(steps) <= 1e-15)))
    return Check("lemma_sum", bool(ok),
                 "sum below the closed-form bound; reference values at (3,2); d=2 ratios "
                 "in [0.5, 1.2] and converging",
                 {"ratios_d2": ratios, "sum_n3": small.sum, "ratio_n3": small.ratio})


CHECKS: Dict[str, Callable[..., Check]] = {
    "kernel_equality": check_kernel_equality,
    "construction_fidelity": check_construction,
    "hard_wall_oracles": check_orthant,
    "conditional_mean": check_conditional_mean,
    "log_gap_slope": check_log_gap,
    "left_tail_shape": check_left_tail,
    "slepian_dominance": check_slepian,
    "lemma_sum": check_lemma_sum,
}


def run_suite(tier: str = "quick", seed: int = 0, only=None) -> List[Check]:
    if tier not in TIERS:
        raise ValueError(f"tier must be one of {sorted(TIERS)}")
    out = []
    for name, fn in CHECKS.items():
        if only and name not in only:
            continue
        t0 = time.perf_counter()
        check = fn(tier, seed)
        check.seconds = time.perf_counter() - t0
        out.append(check)
    return out

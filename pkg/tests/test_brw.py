import math

import mpmath
import numpy as np
import pytest

from hardwall import brw
from hardwall._kernels import BudgetExceeded
from hardwall.brw import Centering, brw_cov, brw_cov_matrix, m_n, sample_brw
from hardwall.gaussian import RngStream
from hardwall.oracle import cov_stderr, empirical_cov
from hardwall.tree import LeafId, TreeShape, split_depth


def test_cov_examples():
    s = TreeShape(2, 3)
    assert brw_cov([0, 1, 1], [0, 1, 1], s) == 3
    assert brw_cov([0, 0, 0], [0, 0, 1], s) == 2
    assert brw_cov([0, 0, 0], [1, 0, 0], s) == 0


@pytest.mark.parametrize("d,n", [(2, 9), (3, 5), (8, 3)])
def test_kernel_is_split_depth(d, n):
    s = TreeShape(d, n)
    m = brw_cov_matrix(s)
    rng = np.random.default_rng(0)
    for i, j in rng.integers(0, s.leaf_count, size=(200, 2)):
        u, v = LeafId.from_index(int(i), s), LeafId.from_index(int(j), s)
        assert m[i, j] == brw_cov(u, v, s) == split_depth(u, v, s)


def _m_n_reference(d, n):
    c1 = mpmath.sqrt(2 * mpmath.log(d))
    return float(c1 * n - 3 / (2 * c1) * mpmath.log(n))


@pytest.mark.parametrize("d,n", [(2, 1), (2, 16), (4, 10), (5, 7)])
def test_m_n(d, n):
    assert abs(m_n(TreeShape(d, n)) - _m_n_reference(d, n)) < 1e-12


@pytest.mark.parametrize("d,n,value,tol", [(2, 1, 1.1774100, 1e-6), (2, 16, 15.306354, 5e-5),
                                           (4, 10, 14.576315, 1e-3)])
def test_m_n_reference_values(d, n, value, tol):
    # the last two reference values were rounded upstream; see the tolerance
    assert abs(m_n(TreeShape(d, n)) - value) < tol


def test_centering_constants():
    c = Centering.for_d(4)
    assert abs(c.c1 - 1.6651092) < 1e-7
    assert abs(c.c2 - 0.9008418) < 1e-6
    assert abs(c.c * c.c1 - 1) < 1e-15


def test_single_level_leaves_are_the_draws():
    s = TreeShape(2, 1)
    sample = sample_brw(s, RngStream(5))
    assert np.array_equal(sample.values, RngStream(5).gaussians(2))
    assert sample.max == sample.values.max() and sample.min == sample.values.min()


def test_full_and_max_only_agree():
    s = TreeShape(3, 6)
    for seed in range(5):
        full = sample_brw(s, RngStream(seed, 2), "full")
        fast = sample_brw(s, RngStream(seed, 2), "max_only")
        assert full.max == fast.max and full.argmax == fast.argmax and full.min == fast.min
        assert full.values[full.argmax.to_index(s)] == full.max
        assert fast.values is None


def test_stream_advances_by_stride():
    s = TreeShape(2, 4)
    st = RngStream(1)
    brw.brw_maxima(s, st, 3)
    assert st.position == 3 * brw.brw_stride(s)
    # batch of three equals three single draws in sequence
    st2 = RngStream(1)
    single = [sample_brw(s, st2, "max_only").max for _ in range(3)]
    assert np.array_equal(brw.brw_maxima(s, RngStream(1), 3), single)


def test_budget():
    with pytest.raises(BudgetExceeded):
        brw.brw_leaves(TreeShape(2, 12), RngStream(1), 10, budget=1000)
    with pytest.raises(ValueError):
        sample_brw(TreeShape(2, 3), RngStream(1), mode="partial")


def test_empirical_cov_within_five_stderr():
    for d, n in [(2, 3), (3, 2)]:
        s = TreeShape(d, n)
        x = brw.brw_leaves(s, RngStream(9), 100_000)
        exact = brw_cov_matrix(s)
        assert np.all(np.abs(empirical_cov(x) - exact) <= 5 * cov_stderr(exact, 100_000))
    cov01 = empirical_cov(brw.brw_leaves(TreeShape(2, 3), RngStream(10), 100_000))[0, 1]
    assert abs(cov01 - 2) < 0.05


def test_mean_max_single_level():
    x = brw.brw_maxima(TreeShape(2, 1), RngStream(11), 10**6)
    assert abs(x.mean() - 1 / math.sqrt(math.pi)) < 3 * x.std() / 1000


def test_mean_max_grows_by_c1():
    a = brw.brw_maxima(TreeShape(2, 12), RngStream(12), 100_000).mean()
    b = brw.brw_maxima(TreeShape(2, 11), RngStream(13), 100_000).mean()
    c1 = Centering.for_d(2).c1
    assert c1 - 0.15 <= a - b <= c1 + 0.15


def test_left_tail_decay_shape():
    s = TreeShape(2, 12)
    x = brw.brw_maxima(s, RngStream(14), 100_000)
    lam = np.array([0.5, 1.0, 1.5, 2.0])
    logp = np.log([np.mean(x <= m_n(s) - l) for l in lam])
    assert np.all(np.diff(logp) < 0)
    slopes = -np.diff(logp) / 0.5
    counts = np.array([np.sum(x <= m_n(s) - l) for l in lam])
    tol = 3 * np.sqrt(1 / counts[1:] + 1 / counts[:-1]) / 0.5
    assert np.all(np.diff(slopes) >= -tol[1:] - tol[:-1])


def test_comparison_field():
    s = TreeShape(2, 10)
    st = RngStream(3)
    same = brw.comparison_maxima(s, 10, st, 50)
    assert st.position == 50 * brw.comparison_stride(s)
    # n' = n keeps the BRW law: the shared Gaussian has zero variance
    leaves = brw.comparison_leaf_values(TreeShape(2, 4), 4, RngStream(4), 2)
    assert leaves.shape == (2, 16)
    var = brw.comparison_leaf_values(s, 7, RngStream(5), 100_000, budget=2**27)[:, 123].var()
    assert abs(var - 10) < 0.15
    one = brw.sample_comparison_max(s, 7, RngStream(6))
    assert one.subtree_height == 7
    with pytest.raises(ValueError):
        brw.comparison_maxima(s, 11, RngStream(1), 1)
    with pytest.raises(ValueError):
        brw.comparison_maxima(s, 0, RngStream(1), 1)


def test_comparison_full_height_matches_brw_law():
    s = TreeShape(2, 6)
    a = np.sort(brw.comparison_maxima(s, 6, RngStream(7), 20_000))
    b = np.sort(brw.brw_maxima(s, RngStream(8), 20_000))
    from scipy.stats import ks_2samp
    assert ks_2samp(a, b).pvalue > 1e-3

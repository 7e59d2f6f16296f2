import numpy as np
import pytest

from hardwall import estimators, oracle, ssbrw
from hardwall.gaussian import NotPositiveSemidefinite, RngStream
from hardwall.tree import TreeShape


def test_exact_matrices():
    s = TreeShape(2, 2)
    brw = oracle.exact_cov_matrix(s, "brw_kernel")
    expect = np.array([[2, 1, 0, 0], [1, 2, 0, 0], [0, 0, 2, 1], [0, 0, 1, 2]], dtype=float)
    assert np.array_equal(brw.matrix, expect)
    phi = oracle.exact_cov_matrix(s, "phi_tilde_kernel")
    assert np.allclose(phi.matrix, expect - 0.75, atol=1e-15)
    assert brw.dim == 4 and phi.source == "phi_tilde_kernel"


@pytest.mark.parametrize("d,n", [(2, 10), (3, 6), (4, 5), (5, 4), (32, 2)])
def test_rank_one_gap_and_psd(d, n):
    s = TreeShape(d, n)
    a = oracle.exact_cov_matrix(s, "brw_kernel")
    b = oracle.exact_cov_matrix(s, "phi_tilde_kernel")
    assert np.allclose(a.matrix - b.matrix, ssbrw.sigma2_dn(s), atol=1e-12, rtol=0)
    if s.leaf_count <= 256:
        a.factor()
        b.factor()


def test_limits_and_sources():
    with pytest.raises(ValueError):
        oracle.exact_cov_matrix(TreeShape(2, 11))
    with pytest.raises(ValueError):
        oracle.exact_cov_matrix(TreeShape(2, 2), "gff")
    with pytest.raises(NotPositiveSemidefinite):
        oracle.DenseCov(np.array([[1.0, 2.0], [2.0, 1.0]]), "brw_kernel").factor()


def test_orthant_reference():
    assert oracle.orthant_reference(TreeShape(2, 1)) == 0.25
    assert oracle.orthant_reference(TreeShape(3, 1)) == 0.125
    assert abs(oracle.orthant_reference(TreeShape(2, 2)) - 1 / 9) < 1e-15
    assert oracle.orthant_reference(TreeShape(2, 3)) is None


def test_mc_orthant_identity():
    r = oracle.mc_orthant(oracle.DenseCov(np.eye(4), "brw_kernel"), 10**6, seed=3, shards=4)
    assert abs(r.value - 0.0625) < 3 * r.stderr


def test_mc_orthant_matches_closed_form_and_sampler():
    r = oracle.mc_orthant(oracle.exact_cov_matrix(TreeShape(2, 2)), 10**6, seed=4)
    assert abs(r.value - 1 / 9) < 3 * r.stderr
    s = TreeShape(2, 3)
    a = oracle.mc_orthant(oracle.exact_cov_matrix(s), 10**6, seed=5)
    b = estimators.estimate_positivity(s, 10**6, seed=6, method="naive")
    assert abs(a.value - b.value) < 3 * np.hypot(a.stderr, b.stderr)


def test_empirical_cov():
    assert np.array_equal(oracle.empirical_cov(np.ones((10, 3))), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        oracle.empirical_cov(np.ones((1, 3)))
    with pytest.raises(ValueError):
        oracle.empirical_cov(np.ones(5))
    from hardwall import brw
    x = brw.brw_leaves(TreeShape(2, 3), RngStream(7), 100_000)
    assert np.max(np.abs(oracle.empirical_cov(x) - brw.brw_cov_matrix(TreeShape(2, 3)))) <= 0.07
    y, _ = ssbrw.phi_tilde_leaves(TreeShape(2, 3), RngStream(8), 100_000)
    assert np.max(np.abs(oracle.empirical_cov(y) - ssbrw.phi_tilde_cov_matrix(TreeShape(2, 3)))) <= 0.07


def test_csv_export(tmp_path):
    cov = oracle.exact_cov_matrix(TreeShape(3, 2), "phi_tilde_kernel")
    cov.to_csv(tmp_path / "m.csv")
    assert np.array_equal(np.loadtxt(tmp_path / "m.csv", delimiter=","), cov.matrix)


def test_rejection_oracle():
    r = oracle.rejection_conditional_mean(TreeShape(2, 1), 400_000, seed=9)
    assert abs(r.value - np.sqrt(2 / np.pi)) < 3 * r.stderr

import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hardwall.tree import (LeafId, ShapeError, TreeShape, leaf_count, split_depth,
                           split_depth_matrix, tree_distance)


@pytest.mark.parametrize("d,n,count", [(2, 1, 2), (2, 3, 8), (3, 4, 81)])
def test_leaf_count(d, n, count):
    assert leaf_count(TreeShape(d, n)) == count


@pytest.mark.parametrize("d,n", [(1, 3), (0, 1), (2, 0), (2, -1), (2.5, 3)])
def test_invalid_shape_rejected(d, n):
    with pytest.raises(ShapeError):
        TreeShape(d, n)


def test_unsamplable_shape_is_flagged():
    assert TreeShape(2, 62).require_indexable().leaf_count == 2**62
    with pytest.raises(ShapeError):
        TreeShape(2, 63).require_indexable()
    # closed-form helpers still accept the shape itself
    assert TreeShape(2, 1024).leaf_count == 2**1024


def test_split_depth_examples():
    s = TreeShape(2, 3)
    assert split_depth([0, 0, 0], [0, 0, 1], s) == 2
    assert split_depth([0, 0, 0], [1, 0, 0], s) == 0
    assert split_depth([0, 1, 0], [0, 1, 0], s) == 3


def test_tree_distance_examples():
    s = TreeShape(2, 3)
    assert tree_distance([0, 0, 0], [0, 0, 1], s) == 2
    assert tree_distance([0, 0, 0], [1, 0, 0], s) == 6
    assert tree_distance([1, 1, 0], [1, 1, 0], s) == 0


def test_mismatched_leaf_rejected():
    s = TreeShape(2, 3)
    with pytest.raises(ShapeError):
        split_depth([0, 0], [0, 0, 1], s)
    with pytest.raises(ShapeError):
        split_depth([0, 0, 2], [0, 0, 1], s)


def _leaves(shape):
    return [LeafId(t) for t in itertools.product(range(shape.d), repeat=shape.n)]


@pytest.mark.parametrize("d,n", [(2, 4), (3, 3), (8, 2)])
def test_distance_is_a_metric(d, n):
    shape = TreeShape(d, n)
    leaves = _leaves(shape)
    dist = np.array([[tree_distance(u, v, shape) for v in leaves] for u in leaves])
    assert np.array_equal(dist, dist.T)
    assert np.all((dist == 0) == np.eye(len(leaves), dtype=bool))
    assert np.all(dist[:, :, None] <= dist[:, None, :] + dist.T[None, :, :])


@pytest.mark.parametrize("d,n", [(2, 5), (3, 3), (5, 2)])
def test_split_matrix_matches_pairwise(d, n):
    shape = TreeShape(d, n)
    leaves = _leaves(shape)
    expect = np.array([[split_depth(u, v, shape) for v in leaves] for u in leaves])
    assert np.array_equal(split_depth_matrix(shape), expect)
    half = np.array([[tree_distance(u, v, shape) // 2 for v in leaves] for u in leaves])
    assert np.all(expect + half == n)


@given(st.integers(2, 6), st.integers(1, 8), st.data())
def test_flat_index_roundtrip(d, n, data):
    shape = TreeShape(d, n)
    i = data.draw(st.integers(0, shape.leaf_count - 1))
    leaf = LeafId.from_index(i, shape)
    assert leaf.to_index(shape) == i
    assert len(leaf.digits) == n


def test_counts():
    s = TreeShape(3, 4)
    assert s.internal_count == 1 + 3 + 9 + 27
    assert s.edge_count == 3 * 40

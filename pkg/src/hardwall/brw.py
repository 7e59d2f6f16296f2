"""Branching random walk on the leaves of a d-ary tree.

Each edge carries an independent unit-variance Gaussian increment and a leaf
value is the sum along its root path, so ``Var = n`` and the covariance of
two leaves is the depth of their deepest common ancestor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .gaussian import RngStream
from .tree import LeafId, LeafLike, TreeShape, split_depth_matrix, tree_distance


@dataclass(frozen=True)
class Centering:
    """Constants of the expected-maximum centering ``m_n = c1 n - c2 log n``."""

    c1: float
    c2: float
    c: float

    @classmethod
    def for_d(cls, d: int) -> "Centering":
        c1 = math.sqrt(2.0 * math.log(d))
        return cls(c1=c1, c2=3.0 / (2.0 * c1), c=1.0 / c1)


def m_n(shape: TreeShape, centering: Optional[Centering] = None) -> float:
    cen = centering or Centering.for_d(shape.d)
    return cen.c1 * shape.n - cen.c2 * math.log(shape.n)


def brw_cov(u: LeafLike, v: LeafLike, shape: TreeShape) -> float:
    return shape.n - tree_distance(u, v, shape) / 2


def brw_cov_matrix(shape: TreeShape) -> np.ndarray:
    return split_depth_matrix(shape).astype(float)


def brw_stride(shape: TreeShape) -> int:
    """Stream positions consumed by one BRW sample."""
    return shape.edge_count


@dataclass
class BrwSample:
    shape: TreeShape
    values: Optional[np.ndarray]
    max: float
    argmax: LeafId
    min: float


def _brw_traverse(shape, stream, count, leaves=False, edges=False, budget=_kernels.DEFAULT_BUDGET):
    return _kernels.traverse(
        stream, count, shape, brw_stride(shape), _kernels.BRW, np.ones(shape.n),
        leaves=leaves, edges=edges, budget=budget,
    )


def sample_brw(shape: TreeShape, stream: RngStream, mode: str = "full",
               budget: int = _kernels.DEFAULT_BUDGET) -> BrwSample:
    """Draw one BRW realization; ``mode`` is ``"full"`` or ``"max_only"``."""
    if mode not in ("full", "max_only"):
        raise ValueError(f"mode must be 'full' or 'max_only', got {mode!r}")
    t = _brw_traverse(shape, stream, 1, leaves=mode == "full", budget=budget)
    return BrwSample(
        shape=shape,
        values=t.leaves[0] if mode == "full" else None,
        max=float(t.max[0]),
        argmax=LeafId.from_index(int(t.argmax[0]), shape),
        min=float(t.min[0]),
    )


def brw_maxima(shape: TreeShape, stream: RngStream, count: int) -> np.ndarray:
    return _brw_traverse(shape, stream, count).max


def brw_leaves(shape: TreeShape, stream: RngStream, count: int,
               budget: int = _kernels.DEFAULT_BUDGET) -> np.ndarray:
    """``(count, d**n)`` array of leaf values in flat-index order."""
    return _brw_traverse(shape, stream, count, leaves=True, budget=budget).leaves


# ---------------------------------------------------------------- comparison field


@dataclass
class ComparisonSample:
    shape: TreeShape
    subtree_height: int
    max: float


def _check_n_prime(shape: TreeShape, n_prime: int) -> int:
    if int(n_prime) != n_prime or not 1 <= n_prime <= shape.n:
        raise ValueError(f"subtree height n' must be an integer in [1, {shape.n}], got {n_prime}")
    return int(n_prime)


def comparison_stride(shape: TreeShape) -> int:
    # BRW layout with the top levels reserved but unused, then the shared draw
    return shape.edge_count + 1


def _comparison_traverse(shape, n_prime, stream, count):
    n_prime = _check_n_prime(shape, n_prime)
    return _kernels.traverse(
        stream, count, shape, comparison_stride(shape), _kernels.BRW, np.ones(shape.n),
        frozen=shape.n - n_prime, shared_offset=shape.edge_count,
        shared_scale=math.sqrt(shape.n - n_prime),
    )


def comparison_maxima(shape: TreeShape, n_prime: int, stream: RngStream, count: int) -> np.ndarray:
    """Maxima of the field made of independent height-``n'`` BRWs plus one shared Gaussian.

    The shared Gaussian has variance ``n - n'`` so every leaf keeps variance
    ``n`` while leaves in different subtrees become more correlated than in
    the BRW.
    """
    t = _comparison_traverse(shape, n_prime, stream, count)
    return t.max + t.shared


def sample_comparison_max(shape: TreeShape, n_prime: int, stream: RngStream) -> ComparisonSample:
    return ComparisonSample(shape, _check_n_prime(shape, n_prime),
                            float(comparison_maxima(shape, n_prime, stream, 1)[0]))


def comparison_leaf_values(shape: TreeShape, n_prime: int, stream: RngStream, count: int,
                           budget: int = _kernels.DEFAULT_BUDGET) -> np.ndarray:
    """Full leaf vectors of the comparison field; used for variance checks only."""
    n_prime = _check_n_prime(shape, n_prime)
    t = _kernels.traverse(
        stream, count, shape, comparison_stride(shape), _kernels.BRW, np.ones(shape.n),
        frozen=shape.n - n_prime, shared_offset=shape.edge_count,
        shared_scale=math.sqrt(shape.n - n_prime), leaves=True, budget=budget,
    )
    return t.leaves + t.shared[:, None]

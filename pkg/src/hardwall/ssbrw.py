"""Switching-sign branching random walk.

At every internal vertex the ``d`` child increments are exchangeable, have
variance ``sigma^2`` and sum to exactly zero: ``d - 1`` of them are ``A z``
for a standard normal vector ``z`` and the last is minus their sum. Edges at
level ``l`` (root edges are level 1) use ``sigma^2 = 1 - d**-(n - l + 1)``.
Adding one independent Gaussian ``X`` with variance ``(1 - d**-n)/(d - 1)``
to every leaf of this zero-sum field reproduces the BRW in law.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from . import _kernels
from .gaussian import RngStream, cholesky_small
from .tree import LeafId, LeafLike, ShapeError, TreeShape, split_depth, split_depth_matrix


def sigma2_dn(shape: TreeShape) -> float:
    d, n = shape.d, shape.n
    return (1.0 - float(d) ** -n) / (d - 1)


def level_variance(level: int, shape: TreeShape) -> float:
    if not 1 <= level <= shape.n:
        raise ShapeError(f"level must be in [1, {shape.n}], got {level}")
    return 1.0 - float(shape.d) ** -(shape.n - level + 1)


def switch_pattern(d: int, sigma2: float = 1.0) -> np.ndarray:
    """Covariance of the first ``d - 1`` child increments of one vertex."""
    m = np.full((d - 1, d - 1), -1.0 / (d - 1))
    np.fill_diagonal(m, 1.0)
    return sigma2 * m


@dataclass(frozen=True)
class SwitchMatrix:
    d: int
    sigma2: float
    a: np.ndarray

    def increments(self, z) -> np.ndarray:
        """All ``d`` child increments for one vertex from ``d - 1`` standard normals."""
        y = self.a @ np.asarray(z, dtype=float)
        return np.append(y, -y.sum())


@lru_cache(maxsize=64)
def _unit_switch(d: int) -> np.ndarray:
    a = cholesky_small(switch_pattern(d))
    a.setflags(write=False)
    return a


def build_switch_matrix(d: int, sigma2: float) -> SwitchMatrix:
    if d < 2:
        raise ValueError(f"d must be >= 2, got {d}")
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be > 0, got {sigma2}")
    return SwitchMatrix(d=d, sigma2=float(sigma2), a=math.sqrt(sigma2) * _unit_switch(d))


def phi_tilde_cov(u: LeafLike, v: LeafLike, shape: TreeShape) -> float:
    """Covariance of the zero-sum field, summed edge by edge along the two paths."""
    k = split_depth(u, v, shape)
    shared = sum(level_variance(level, shape) for level in range(1, k + 1))
    if k == shape.n:
        return shared
    return shared - level_variance(k + 1, shape) / (shape.d - 1)


def phi_tilde_cov_matrix(shape: TreeShape) -> np.ndarray:
    k = split_depth_matrix(shape)
    levels = np.array([level_variance(level, shape) for level in range(1, shape.n + 1)])
    shared = np.concatenate([[0.0], np.cumsum(levels)])
    split = np.concatenate([-levels / (shape.d - 1), [0.0]])
    return shared[k] + split[k]


def phi_tilde_stride(shape: TreeShape) -> int:
    # d - 1 draws per internal vertex, then the shared X
    return shape.leaf_count


@dataclass
class SsbrwSample:
    shape: TreeShape
    phi_tilde: Optional[np.ndarray]
    max: float
    argmax: LeafId
    x_shared: float

    @property
    def xi(self) -> Optional[np.ndarray]:
        return None if self.phi_tilde is None else self.phi_tilde + self.x_shared


def _level_scales(shape: TreeShape) -> np.ndarray:
    return np.sqrt([level_variance(k + 1, shape) for k in range(shape.n)])


def _phi_traverse(shape, stream, count, *, tilt=0.0, tilt_depth=0, leaves=False, edges=False,
                  budget=_kernels.DEFAULT_BUDGET):
    return _kernels.traverse(
        stream, count, shape, phi_tilde_stride(shape), _kernels.SWITCH, _level_scales(shape),
        _unit_switch(shape.d), tilt=tilt, tilt_depth=tilt_depth,
        shared_offset=shape.leaf_count - 1, shared_scale=math.sqrt(sigma2_dn(shape)),
        leaves=leaves, edges=edges, budget=budget,
    )


def sample_phi_tilde(shape: TreeShape, stream: RngStream, mode: str = "full",
                     budget: int = _kernels.DEFAULT_BUDGET) -> SsbrwSample:
    if mode not in ("full", "max_only"):
        raise ValueError(f"mode must be 'full' or 'max_only', got {mode!r}")
    t = _phi_traverse(shape, stream, 1, leaves=mode == "full", budget=budget)
    return SsbrwSample(
        shape=shape,
        phi_tilde=t.leaves[0] if mode == "full" else None,
        max=float(t.max[0]),
        argmax=LeafId.from_index(int(t.argmax[0]), shape),
        x_shared=float(t.shared[0]),
    )


def phi_tilde_maxima(shape: TreeShape, stream: RngStream, count: int):
    """Return ``(max phi_tilde, X)`` arrays for ``count`` samples."""
    t = _phi_traverse(shape, stream, count)
    return t.max, t.shared


def phi_tilde_leaves(shape: TreeShape, stream: RngStream, count: int,
                     budget: int = _kernels.DEFAULT_BUDGET):
    """Return ``(leaf values, X)``; leaves are ``(count, d**n)`` in flat-index order."""
    t = _phi_traverse(shape, stream, count, leaves=True, budget=budget)
    return t.leaves, t.shared


def phi_tilde_edges(shape: TreeShape, stream: RngStream, count: int,
                    budget: int = _kernels.DEFAULT_BUDGET):
    """Return ``(leaf values, edge increments)``.

    Edge increments are ``(count, edge_count)`` in level order: depth by
    depth, vertices in flat-index order, children in digit order.
    """
    t = _phi_traverse(shape, stream, count, leaves=True, edges=True, budget=budget)
    return t.leaves, t.edges


def tilted_phi_tilde_maxima(shape: TreeShape, stream: RngStream, count: int, tilt: float,
                            tilt_levels: int):
    """Maxima under a proposal shifting the driving normals of the top levels by ``-tilt``.

    Returns ``(max, log likelihood ratio)`` per sample.
    """
    if not 0 <= tilt_levels <= shape.n:
        raise ValueError(f"tilt_levels must be in [0, {shape.n}]")
    t = _phi_traverse(shape, stream, count, tilt=tilt, tilt_depth=tilt_levels)
    return t.max, t.logw

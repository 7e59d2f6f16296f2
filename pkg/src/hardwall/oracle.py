"""Small-scale ground truth: dense covariance matrices and orthant probabilities.

Everything here works on explicit ``d**n x d**n`` matrices and avoids the
tree samplers, so it can check them independently.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import brw, ssbrw
from .estimators import EstimateRecord, shard_counts
from .gaussian import RngStream, cholesky_small
from .tree import TreeShape

MAX_DIM = 1024
SOURCES = ("brw_kernel", "phi_tilde_kernel")
PSD_TOL = 1e-9


@dataclass
class DenseCov:
    matrix: np.ndarray
    source: str
    shape: Optional[TreeShape] = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"covariance must be square, got {m.shape}")
        if m.shape[0] > MAX_DIM:
            raise ValueError(f"dimension {m.shape[0]} exceeds {MAX_DIM}")
        self.matrix = m

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def factor(self) -> np.ndarray:
        return cholesky_small(self.matrix, tol=PSD_TOL)

    def to_csv(self, path) -> None:
        np.savetxt(path, self.matrix, delimiter=",", fmt="%.17g")


def exact_cov_matrix(shape: TreeShape, source: str = "brw_kernel") -> DenseCov:
    if shape.leaf_count > MAX_DIM:
        raise ValueError(f"d**n = {shape.leaf_count} exceeds the oracle limit {MAX_DIM}")
    if source == "brw_kernel":
        m = brw.brw_cov_matrix(shape)
    elif source == "phi_tilde_kernel":
        m = ssbrw.phi_tilde_cov_matrix(shape)
    else:
        raise ValueError(f"source must be one of {SOURCES}, got {source!r}")
    return DenseCov(m, source, shape)


def orthant_reference(shape: TreeShape) -> Optional[float]:
    """Exact probability that every leaf of the BRW is nonnegative, or ``None``.

    Known for one level (independent leaves) and for the binary tree of
    height two, where the two sibling pairs are independent bivariate normals
    with correlation 1/2 and each pair is nonnegative with probability
    ``1/4 + asin(1/2) / (2 pi) = 1/3``.
    """
    if shape.n == 1:
        return 2.0 ** -shape.d
    if (shape.d, shape.n) == (2, 2):
        pair = 0.25 + math.asin(0.5) / (2.0 * math.pi)
        return pair * pair
    return None


def mc_orthant(cov: DenseCov, samples: int, seed: int = 0, shards: int = 1,
               batch: int = 65536) -> EstimateRecord:
    """Plain Monte Carlo ``P(G >= 0)`` for ``G ~ N(0, cov)`` via a dense Cholesky factor."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    t0 = time.perf_counter()
    low = cov.factor()
    hits = 0
    for s, count in enumerate(shard_counts(samples, shards)):
        stream = RngStream(seed, s)
        left = count
        while left > 0:
            m = min(batch, left)
            z = stream.gaussians(m * cov.dim).reshape(m, cov.dim)
            hits += int(np.count_nonzero(np.all(z @ low.T >= 0.0, axis=1)))
            left -= m
    p = hits / samples
    shape = cov.shape if cov.shape is not None else TreeShape(2, 1)
    return EstimateRecord("orthant", p, math.sqrt(p * (1.0 - p) / samples), samples, "naive",
                          shape, seed, shards, time.perf_counter() - t0,
                          params={"source": cov.source, "dim": cov.dim})


def empirical_cov(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2:
        raise ValueError("expected a 2-D array of leaf vectors")
    if x.shape[0] < 2:
        raise ValueError("need at least 2 samples")
    return np.atleast_2d(np.cov(x, rowvar=False, ddof=1))


def cov_stderr(exact: np.ndarray, count: int) -> np.ndarray:
    """Standard error of each sample-covariance entry for Gaussian data."""
    diag = np.diag(exact)
    return np.sqrt((np.outer(diag, diag) + exact**2) / count)


def rejection_conditional_mean(shape: TreeShape, samples: int, seed: int = 0, shards: int = 1,
                               batch: int = 65536) -> EstimateRecord:
    """``E[mean leaf | all leaves >= 0]`` by keeping only nonnegative dense BRW draws."""
    cov = exact_cov_matrix(shape, "brw_kernel")
    t0 = time.perf_counter()
    low = cov.factor()
    kept = []
    for s, count in enumerate(shard_counts(samples, shards)):
        stream = RngStream(seed, s)
        left = count
        while left > 0:
            m = min(batch, left)
            g = stream.gaussians(m * cov.dim).reshape(m, cov.dim) @ low.T
            kept.append(g[np.all(g >= 0.0, axis=1)].mean(axis=1))
            left -= m
    means = np.concatenate(kept)
    if means.size < 2:
        raise ValueError("fewer than two accepted samples")
    return EstimateRecord("conditional_mean", float(means.mean()),
                          float(means.std(ddof=1) / math.sqrt(means.size)), samples, "naive",
                          shape, seed, shards, time.perf_counter() - t0,
                          params={"accepted": int(means.size)})

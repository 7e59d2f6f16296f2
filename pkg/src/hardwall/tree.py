"""Leaf addressing and tree metric on the complete d-ary tree of height n.

Field sites are the ``d**n`` leaves. A leaf is addressed by its digit path
from the root; digit ``k`` selects the child taken below the depth-``k``
vertex. The flat index of a leaf is the base-``d`` number formed by its
digits, most significant digit first.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

# Samplers index leaves with signed 64-bit integers; closed-form helpers take any height.
MAX_LEAVES = 2**62


class ShapeError(ValueError):
    """Invalid tree shape or leaf address."""


@dataclass(frozen=True)
class TreeShape:
    d: int
    n: int

    def __post_init__(self):
        if int(self.d) != self.d or int(self.n) != self.n:
            raise ShapeError(f"d and n must be integers, got d={self.d!r}, n={self.n!r}")
        if self.d < 2:
            raise ShapeError(f"branching factor d must be >= 2, got {self.d}")
        if self.n < 1:
            raise ShapeError(f"height n must be >= 1, got {self.n}")

    def require_indexable(self) -> "TreeShape":
        if self.d**self.n > MAX_LEAVES:
            raise ShapeError(f"d**n = {self.d}**{self.n} exceeds the samplable leaf count 2**62")
        return self

    @property
    def leaf_count(self) -> int:
        return self.d**self.n

    @property
    def internal_count(self) -> int:
        """Number of non-leaf vertices, root included."""
        return (self.d**self.n - 1) // (self.d - 1)

    @property
    def edge_count(self) -> int:
        return self.d * self.internal_count

    def to_dict(self) -> dict:
        return {"d": self.d, "n": self.n}


@dataclass(frozen=True)
class LeafId:
    digits: tuple

    def __post_init__(self):
        object.__setattr__(self, "digits", tuple(int(x) for x in self.digits))

    def validate(self, shape: TreeShape) -> "LeafId":
        if len(self.digits) != shape.n:
            raise ShapeError(f"leaf has {len(self.digits)} digits, shape needs {shape.n}")
        if any(x < 0 or x >= shape.d for x in self.digits):
            raise ShapeError(f"leaf digits {self.digits} not all in [0, {shape.d})")
        return self

    @classmethod
    def from_index(cls, index: int, shape: TreeShape) -> "LeafId":
        if not 0 <= index < shape.leaf_count:
            raise ShapeError(f"flat index {index} outside [0, {shape.leaf_count})")
        digits = []
        for _ in range(shape.n):
            index, r = divmod(index, shape.d)
            digits.append(r)
        return cls(tuple(reversed(digits)))

    def to_index(self, shape: TreeShape) -> int:
        self.validate(shape)
        index = 0
        for x in self.digits:
            index = index * shape.d + x
        return index


LeafLike = Union[LeafId, Sequence[int]]


def _as_leaf(u: LeafLike, shape: TreeShape) -> LeafId:
    leaf = u if isinstance(u, LeafId) else LeafId(tuple(u))
    return leaf.validate(shape)


def leaf_count(shape: TreeShape) -> int:
    return shape.leaf_count


def split_depth(u: LeafLike, v: LeafLike, shape: TreeShape) -> int:
    """Depth of the deepest common ancestor of two leaves (``n`` iff ``u == v``)."""
    a, b = _as_leaf(u, shape).digits, _as_leaf(v, shape).digits
    k = 0
    while k < shape.n and a[k] == b[k]:
        k += 1
    return k


def tree_distance(u: LeafLike, v: LeafLike, shape: TreeShape) -> int:
    return 2 * (shape.n - split_depth(u, v, shape))


def split_depth_matrix(shape: TreeShape) -> np.ndarray:
    """All-pairs common-prefix length over leaves in flat-index order."""
    idx = np.arange(shape.leaf_count, dtype=np.int64)
    out = np.zeros((idx.size, idx.size), dtype=np.int64)
    for k in range(1, shape.n + 1):
        prefix = idx // shape.d ** (shape.n - k)
        out += prefix[:, None] == prefix[None, :]
    return out

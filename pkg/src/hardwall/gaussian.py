"""Scalar Gaussian numerics, small Cholesky, and counter-based random streams.

Random streams
--------------
Every variate is a pure function of ``(master_seed, shard_index, position)``.
The stream key is derived from the seed and shard once; position ``p`` is
hashed with SplitMix64 and the resulting 64 bits drive a 256-layer ziggurat.
The rare ziggurat rejections draw further bits from a chain hashed off the
same position, so one logical position always yields exactly one variate and
sampler layouts never depend on how many rejections occurred.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit
from scipy import special

_M64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

_U_GOLDEN = np.uint64(_GOLDEN)
_U_CHAIN = np.uint64(0xD1B54A32D192ED03)
_U_ONE = np.uint64(1)
_U_255 = np.uint64(255)
_U_11 = np.uint64(11)
_U_27 = np.uint64(27)
_U_30 = np.uint64(30)
_U_31 = np.uint64(31)
_U_C1 = np.uint64(0xBF58476D1CE4E5B9)
_U_C2 = np.uint64(0x94D049BB133111EB)
_TWO_M53 = 1.0 / 9007199254740992.0
_TWO_M52 = 2.0 * _TWO_M53

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class NotPositiveSemidefinite(np.linalg.LinAlgError):
    pass


# ---------------------------------------------------------------- scalar tails


def normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return INV_SQRT_2PI * np.exp(-0.5 * x * x)


def normal_tail_q(x):
    """Upper tail ``P(Z >= x)``; accurate in relative terms far into the tail."""
    return special.ndtr(-np.asarray(x, dtype=float))


def log_normal_tail_q(x):
    return special.log_ndtr(-np.asarray(x, dtype=float))


def log_normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return -0.5 * x * x - 0.5 * math.log(2.0 * math.pi)


def truncated_first_moment(x):
    """``E[Z; Z >= x]`` for standard normal ``Z``, which equals the density at ``x``."""
    return normal_pdf(x)


# ---------------------------------------------------------------- cholesky


def cholesky_small(m, tol: float = 1e-12) -> np.ndarray:
    """Lower Cholesky factor of a symmetric PSD matrix, clamping tiny negative pivots.

    Pivots in ``[-tol, 0]`` are set to zero together with the column below
    them; a pivot below ``-tol`` raises :class:`NotPositiveSemidefinite`.
    """
    a = np.array(m, dtype=float, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-12 * scale):
        raise ValueError("matrix is not symmetric")
    dim = a.shape[0]
    low = np.zeros_like(a)
    for j in range(dim):
        pivot = a[j, j] - low[j, :j] @ low[j, :j]
        if pivot < -tol:
            raise NotPositiveSemidefinite(f"pivot {pivot:.3e} at column {j}")
        if pivot <= 0.0:
            continue
        root = math.sqrt(pivot)
        low[j, j] = root
        low[j + 1 :, j] = (a[j + 1 :, j] - low[j + 1 :, :j] @ low[j, :j]) / root
    return low


# ---------------------------------------------------------------- ziggurat tables


def _ziggurat_tables(layers: int = 256):
    r = 3.6541528853610088
    f = lambda x: math.exp(-0.5 * x * x)  # noqa: E731
    v = r * f(r) + math.sqrt(math.pi / 2.0) * math.erfc(r / math.sqrt(2.0))
    x = np.empty(layers + 1)
    x[0] = v / f(r)
    x[1] = r
    for i in range(1, layers - 1):
        x[i + 1] = math.sqrt(-2.0 * math.log(v / x[i] + f(x[i])))
    x[layers] = 0.0
    fx = np.exp(-0.5 * x * x)
    ratio = x[1:] / x[:-1]
    return r, x, fx, ratio


ZIG_R, ZIG_X, ZIG_F, ZIG_RATIO = _ziggurat_tables()


@njit(inline="always")
def _mix64(z):
    z = (z ^ (z >> _U_30)) * _U_C1
    z = (z ^ (z >> _U_27)) * _U_C2
    return z ^ (z >> _U_31)


@njit(inline="always")
def _unit(h):
    # open interval (0, 1) from the top 53 bits
    return (np.float64(np.int64(h >> _U_11)) + 0.5) * _TWO_M53


@njit(inline="always")
def _gauss(key, pos):
    h = _mix64(key + (pos + _U_ONE) * _U_GOLDEN)
    while True:
        i = np.int64(h & _U_255)
        u = (np.float64(np.int64(h >> _U_11)) + 0.5) * _TWO_M52 - 1.0
        if abs(u) < ZIG_RATIO[i]:
            return u * ZIG_X[i]
        h = _mix64(h + _U_CHAIN)
        if i == 0:
            while True:
                a = -math.log(_unit(h)) / ZIG_R
                h = _mix64(h + _U_CHAIN)
                b = -math.log(_unit(h))
                h = _mix64(h + _U_CHAIN)
                if b + b > a * a:
                    return -(ZIG_R + a) if u < 0.0 else ZIG_R + a
        xx = u * ZIG_X[i]
        y = ZIG_F[i] + _unit(h) * (ZIG_F[i + 1] - ZIG_F[i])
        if y < math.exp(-0.5 * xx * xx):
            return xx
        h = _mix64(h + _U_CHAIN)


@njit(cache=True, nogil=True)
def gauss_at(key, pos):
    """Standard normal variate at ``pos`` of the stream with ``key`` (both uint64)."""
    return _gauss(key, pos)


@njit(cache=True, nogil=True)
def _fill_gauss(key, pos, out):
    """Fill ``out`` with the variates at ``pos, pos + 1, ...``."""
    # the first pass takes the ziggurat fast path only; rejections are redone exactly
    for j in range(out.shape[0]):
        h = _mix64(key + (pos + np.uint64(j) + _U_ONE) * _U_GOLDEN)
        i = np.int64(h & _U_255)
        u = (np.float64(np.int64(h >> _U_11)) + 0.5) * _TWO_M52 - 1.0
        out[j] = u * ZIG_X[i] if abs(u) < ZIG_RATIO[i] else np.nan
    for j in range(out.shape[0]):
        if out[j] != out[j]:
            out[j] = _gauss(key, pos + np.uint64(j))


# ---------------------------------------------------------------- streams


def _mix64_int(z: int) -> int:
    z &= _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


def stream_key(master_seed: int, shard_index: int) -> int:
    if not 0 <= master_seed <= _M64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {master_seed}")
    if shard_index < 0:
        raise ValueError(f"shard index must be >= 0, got {shard_index}")
    return _mix64_int(_mix64_int(master_seed) + (shard_index + 1) * 0xA0761D6478BD642F)


class RngStream:
    """Position-addressed Gaussian stream for one shard.

    Copies are independent cursors over the same values; two workers must
    never advance the same instance.
    """

    __slots__ = ("master_seed", "shard_index", "position", "_key")

    def __init__(self, master_seed: int, shard_index: int = 0, position: int = 0):
        if position < 0:
            raise ValueError("position must be >= 0")
        self.master_seed = int(master_seed)
        self.shard_index = int(shard_index)
        self.position = int(position)
        self._key = np.uint64(stream_key(self.master_seed, self.shard_index))

    @property
    def key(self) -> np.uint64:
        return self._key

    def clone(self) -> "RngStream":
        return RngStream(self.master_seed, self.shard_index, self.position)

    def advance(self, count: int) -> int:
        """Reserve ``count`` positions and return the first one."""
        start = self.position
        self.position += int(count)
        return start

    def next_gaussian(self) -> float:
        return float(gauss_at(self._key, np.uint64(self.advance(1))))

    def gaussians(self, count: int) -> np.ndarray:
        out = np.empty(int(count))
        _fill_gauss(self._key, np.uint64(self.advance(count)), out)
        return out

    def __repr__(self):
        return f"RngStream(seed={self.master_seed}, shard={self.shard_index}, position={self.position})"


def next_gaussian(stream: RngStream) -> float:
    return stream.next_gaussian()

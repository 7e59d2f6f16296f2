"""Compiled depth-first traversal shared by every tree sampler.

Stream layout of one sample (positions relative to the sample start):
vertices are visited in depth-first preorder and each vertex consumes its
increment draws consecutively (``d`` for the BRW, ``d - 1`` for the
switching field), followed by at most one shared draw at ``shared_offset``.
Sample ``s`` of a batch starts at ``pos0 + s * stride``.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from .gaussian import ZIG_RATIO, ZIG_X, _TWO_M52, _U_11, _U_255, _U_GOLDEN, _gauss, _mix64

BRW = 0
SWITCH = 1

_U1 = np.uint64(1)


@njit(cache=True, nogil=True)
def run_batch(key, pos0, stride, d, n, model, scale, chol, frozen, tilt, tilt_depth,
              shared_offset, shared_scale,
              out_max, out_min, out_arg, out_logw, out_shared, leaves, edges):
    count = out_max.shape[0]
    want_leaves = leaves.shape[0] > 0
    want_edges = edges.shape[0] > 0
    half_tilt2 = 0.5 * tilt * tilt

    node_y = np.zeros((n, d))
    partial = np.zeros(n)
    digits = np.zeros(n, dtype=np.int64)
    idx = np.zeros(n, dtype=np.int64)
    zbuf = np.zeros(d)
    off = np.zeros(n, dtype=np.int64)
    width = 1
    for k in range(1, n):
        off[k] = off[k - 1] + width
        width *= d
    for k in range(n):
        off[k] *= d  # edges below depth k start after all shallower edges

    draws = d if model == BRW else d - 1
    udraws = np.uint64(draws)
    fast_switch = model == SWITCH and d == 2
    c00 = chol[0, 0]

    ustride = np.uint64(stride)
    for s in range(count):
        start = pos0 + np.uint64(s) * ustride
        pos = start
        logw = 0.0
        best = -np.inf
        worst = np.inf
        arg = 0
        for k in range(n):
            digits[k] = 0
        partial[0] = 0.0
        j = 0
        while True:
            for k in range(j, n):
                if k > 0:
                    idx[k] = idx[k - 1] * d + digits[k - 1]
                if fast_switch:
                    z = _gauss(key, pos)
                    pos += _U1
                    if k < tilt_depth:
                        z -= tilt
                        logw += tilt * z + half_tilt2
                    # same rounding as the general branch below
                    y = (c00 * z) * scale[k]
                    node_y[k, 0] = y
                    node_y[k, 1] = -y
                elif model == BRW:
                    if k < frozen:
                        for c in range(d):
                            node_y[k, c] = 0.0
                        pos += udraws
                    else:
                        for c in range(d):
                            z = _gauss(key, pos)
                            pos += _U1
                            if k < tilt_depth:
                                z -= tilt
                                logw += tilt * z + half_tilt2
                            node_y[k, c] = z * scale[k]
                else:
                    for m in range(d - 1):
                        z = _gauss(key, pos)
                        pos += _U1
                        if k < tilt_depth:
                            z -= tilt
                            logw += tilt * z + half_tilt2
                        zbuf[m] = z
                    tot = 0.0
                    for c in range(d - 1):
                        y = 0.0
                        for m in range(c + 1):
                            y += chol[c, m] * zbuf[m]
                        y *= scale[k]
                        node_y[k, c] = y
                        tot += y
                    node_y[k, d - 1] = -tot
                if want_edges:
                    e0 = off[k] + idx[k] * d
                    for c in range(d):
                        edges[s, e0 + c] = node_y[k, c]
                if k < n - 1:
                    partial[k + 1] = partial[k] + node_y[k, 0]
            # children of the current bottom vertex are leaves
            first = idx[n - 1] * d
            for c in range(d):
                v = partial[n - 1] + node_y[n - 1, c]
                if want_leaves:
                    leaves[s, first + c] = v
                if v > best:
                    best = v
                    arg = first + c
                if v < worst:
                    worst = v
            k = n - 2
            while k >= 0 and digits[k] == d - 1:
                digits[k] = 0
                k -= 1
            if k < 0:
                break
            digits[k] += 1
            partial[k + 1] = partial[k] + node_y[k, digits[k]]
            j = k + 1
        out_max[s] = best
        out_min[s] = worst
        out_arg[s] = arg
        out_logw[s] = logw
        if shared_offset >= 0:
            out_shared[s] = shared_scale * _gauss(key, start + np.uint64(shared_offset))
        else:
            out_shared[s] = 0.0


@njit(cache=True, nogil=True)
def run_switch2_max(key, pos0, stride, n, scale, c00, tilt, tilt_depth, shared_offset,
                    shared_scale, out_max, out_min, out_arg, out_logw, out_shared):
    """Max-only binary switching field; same draws and rounding as :func:`run_batch`."""
    half_tilt2 = 0.5 * tilt * tilt
    partial = np.zeros(n)
    ys = np.zeros(n)
    digits = np.zeros(n, dtype=np.int64)
    ustride = np.uint64(stride)
    for s in range(out_max.shape[0]):
        start = pos0 + np.uint64(s) * ustride
        pos = start
        logw = 0.0
        best = -np.inf
        worst = np.inf
        arg = 0
        bottom = 0
        for k in range(n):
            digits[k] = 0
        partial[0] = 0.0
        j = 0
        while True:
            for k in range(j, n):
                z = _gauss(key, pos)
                pos += _U1
                if k < tilt_depth:
                    z -= tilt
                    logw += tilt * z + half_tilt2
                y = (c00 * z) * scale[k]
                ys[k] = y
                if k < n - 1:
                    partial[k + 1] = partial[k] + y
            p = partial[n - 1]
            y = ys[n - 1]
            v = p + y
            if v > best:
                best = v
                arg = 2 * bottom
            if v < worst:
                worst = v
            v = p + (-y)
            if v > best:
                best = v
                arg = 2 * bottom + 1
            if v < worst:
                worst = v
            bottom += 1
            k = n - 2
            while k >= 0 and digits[k] == 1:
                digits[k] = 0
                k -= 1
            if k < 0:
                break
            digits[k] = 1
            partial[k + 1] = partial[k] + (-ys[k])
            j = k + 1
        out_max[s] = best
        out_min[s] = worst
        out_arg[s] = arg
        out_logw[s] = logw
        if shared_offset >= 0:
            out_shared[s] = shared_scale * _gauss(key, start + np.uint64(shared_offset))
        else:
            out_shared[s] = 0.0


@njit(cache=True, nogil=True)
def _block_order(b):
    # preorder offset of each vertex of a binary subtree of height b, in level order
    tab = np.zeros(2**b - 1, dtype=np.int64)
    for lev in range(b - 1):
        half = 2 ** (b - lev - 1)
        for i in range(2**lev):
            o = tab[2**lev - 1 + i]
            tab[2 ** (lev + 1) - 1 + 2 * i] = o + 1
            tab[2 ** (lev + 1) - 1 + 2 * i + 1] = o + half
    return tab


@njit(cache=True, nogil=True)
def run_switch2_block(key, pos0, stride, n, b, scale, c00, tilt, tilt_depth, shared_offset,
                      shared_scale, out_max, out_min, out_arg, out_logw, out_shared):
    """Max-only binary switching field, bottom ``b`` levels at a time.

    A height-``b`` subtree owns a contiguous run of ``2**b - 1`` preorder
    positions, so its draws are generated in one batch and its leaves are
    built level by level. Additions happen in the same order as in
    :func:`run_batch`; requires ``tilt_depth <= n - b``.
    """
    top = n - b
    size = 2**b - 1
    usize = np.uint64(size)
    tab = _block_order(b)
    hb = np.empty(size, dtype=np.uint64)
    zb = np.empty(size)
    vals = np.empty(2 ** (b - 1))
    nxt = np.empty(2 ** (b - 1))
    half_tilt2 = 0.5 * tilt * tilt
    partial = np.zeros(top + 1)
    ys = np.zeros(max(top, 1))
    digits = np.zeros(max(top, 1), dtype=np.int64)
    ustride = np.uint64(stride)
    for s in range(out_max.shape[0]):
        start = pos0 + np.uint64(s) * ustride
        pos = start
        logw = 0.0
        best = -np.inf
        worst = np.inf
        arg = 0
        block = 0
        for k in range(top):
            digits[k] = 0
        partial[0] = 0.0
        j = 0
        while True:
            for k in range(j, top):
                z = _gauss(key, pos)
                pos += _U1
                if k < tilt_depth:
                    z -= tilt
                    logw += tilt * z + half_tilt2
                y = (c00 * z) * scale[k]
                ys[k] = y
                partial[k + 1] = partial[k] + y
            # batch of draws for the subtree below, fast path first
            base = key + (pos + _U1) * _U_GOLDEN
            for q in range(size):
                hb[q] = _mix64(base + np.uint64(q) * _U_GOLDEN)
            for q in range(size):
                h = hb[q]
                i = np.int64(h & _U_255)
                u = (np.float64(np.int64(h >> _U_11)) + 0.5) * _TWO_M52 - 1.0
                zb[q] = u * ZIG_X[i] if abs(u) < ZIG_RATIO[i] else np.nan
            for q in range(size):
                if zb[q] != zb[q]:
                    zb[q] = _gauss(key, pos + np.uint64(q))
            pos += usize
            vals[0] = partial[top]
            width = 1
            for lev in range(b - 1):
                sc = scale[top + lev]
                row = width - 1
                for i in range(width):
                    y = (c00 * zb[tab[row + i]]) * sc
                    p = vals[i]
                    nxt[2 * i] = p + y
                    nxt[2 * i + 1] = p + (-y)
                width *= 2
                vals, nxt = nxt, vals
            sc = scale[n - 1]
            row = width - 1
            first = block * 2 * width
            for i in range(width):
                y = (c00 * zb[tab[row + i]]) * sc
                p = vals[i]
                v = p + y
                if v > best:
                    best = v
                    arg = first + 2 * i
                if v < worst:
                    worst = v
                v = p + (-y)
                if v > best:
                    best = v
                    arg = first + 2 * i + 1
                if v < worst:
                    worst = v
            block += 1
            k = top - 1
            while k >= 0 and digits[k] == 1:
                digits[k] = 0
                k -= 1
            if k < 0:
                break
            digits[k] = 1
            partial[k + 1] = partial[k] + (-ys[k])
            j = k + 1
        out_max[s] = best
        out_min[s] = worst
        out_arg[s] = arg
        out_logw[s] = logw
        if shared_offset >= 0:
            out_shared[s] = shared_scale * _gauss(key, start + np.uint64(shared_offset))
        else:
            out_shared[s] = 0.0


BLOCK_LEVELS = 10


class BudgetExceeded(MemoryError):
    """Requested full-leaf output does not fit the configured value budget."""


# Default cap on stored leaf/edge values per call (256 MiB of float64).
DEFAULT_BUDGET = 2**25


class Traversal:
    """Per-sample outputs of one batch; ``leaves``/``edges`` only when requested."""

    __slots__ = ("max", "min", "argmax", "logw", "shared", "leaves", "edges")

    def __init__(self, **kw):
        for name in self.__slots__:
            setattr(self, name, kw.get(name))


def traverse(stream, count, shape, stride, model, scale, chol=None, *, frozen=0,
             tilt=0.0, tilt_depth=0, shared_offset=-1, shared_scale=0.0,
             leaves=False, edges=False, budget=DEFAULT_BUDGET):
    shape.require_indexable()
    count = int(count)
    if count < 0:
        raise ValueError("count must be >= 0")
    stored = count * ((shape.leaf_count if leaves else 0) + (shape.edge_count if edges else 0))
    if stored > budget:
        raise BudgetExceeded(
            f"{stored} stored values exceed the budget of {budget}; use max-only mode or fewer samples"
        )
    pos0 = stream.advance(count * stride)
    out = Traversal(
        max=np.empty(count), min=np.empty(count), argmax=np.empty(count, dtype=np.int64),
        logw=np.empty(count), shared=np.empty(count),
        leaves=np.empty((count, shape.leaf_count)) if leaves else None,
        edges=np.empty((count, shape.edge_count)) if edges else None,
    )
    if model == SWITCH and shape.d == 2 and not (leaves or edges):
        b = min(BLOCK_LEVELS, shape.n - int(tilt_depth))
        if b >= 1:
            run_switch2_block(
                stream.key, np.uint64(pos0), np.int64(stride), shape.n, b,
                np.ascontiguousarray(scale, dtype=float), float(chol[0, 0]), float(tilt),
                int(tilt_depth), int(shared_offset), float(shared_scale),
                out.max, out.min, out.argmax, out.logw, out.shared,
            )
            return out
        run_switch2_max(
            stream.key, np.uint64(pos0), np.int64(stride), shape.n,
            np.ascontiguousarray(scale, dtype=float), float(chol[0, 0]), float(tilt),
            int(tilt_depth), int(shared_offset), float(shared_scale),
            out.max, out.min, out.argmax, out.logw, out.shared,
        )
        return out
    run_batch(
        stream.key, np.uint64(pos0), np.int64(stride), shape.d, shape.n, model,
        np.ascontiguousarray(scale, dtype=float),
        np.zeros((1, 1)) if chol is None else np.ascontiguousarray(chol, dtype=float),
        int(frozen), float(tilt), int(tilt_depth), int(shared_offset), float(shared_scale),
        out.max, out.min, out.argmax, out.logw, out.shared,
        out.leaves if leaves else np.empty((0, 0)),
        out.edges if edges else np.empty((0, 0)),
    )
    return out

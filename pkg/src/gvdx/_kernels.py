"""Compiled inner loops: lidar grid traversal, segment tests and disc flood counts."""
from __future__ import annotations

import math

import numpy as np
from numba import njit

_FREE = np.int8(0)
_OCC = np.int8(100)
_UNK = np.int8(-1)


@njit(cache=True)
def cast_scan(truth, known, gx, gy, heading, fov, rays, rmax):
    """Cast ``rays`` bearings from grid coordinates (gx, gy), in cell units.

    Cells a ray enters before distance ``rmax`` become Free in ``known``
    until it meets an occupied truth cell, which becomes Occupied. Returns
    the number of cells whose known state changed.
    """
    h, w = truth.shape
    changed = 0
    full = fov >= 2.0 * math.pi - 1e-12
    for k in range(rays):
        if rays == 1:
            a = heading
        elif full:
            a = heading - math.pi + fov * k / rays
        else:
            a = heading - 0.5 * fov + fov * k / (rays - 1)
        dx = math.cos(a)
        dy = math.sin(a)
        c = int(math.floor(gx))
        r = int(math.floor(gy))
        if dx > 0.0:
            sc = 1
            tdx = 1.0 / dx
            tx = (c + 1 - gx) * tdx
        elif dx < 0.0:
            sc = -1
            tdx = -1.0 / dx
            tx = (gx - c) * tdx
        else:
            sc = 0
            tdx = np.inf
            tx = np.inf
        if dy > 0.0:
            sr = 1
            tdy = 1.0 / dy
            ty = (r + 1 - gy) * tdy
        elif dy < 0.0:
            sr = -1
            tdy = -1.0 / dy
            ty = (gy - r) * tdy
        else:
            sr = 0
            tdy = np.inf
            ty = np.inf
        while 0 <= r < h and 0 <= c < w:
            if truth[r, c] == _OCC:
                if known[r, c] != _OCC:
                    known[r, c] = _OCC
                    changed += 1
                break
            if known[r, c] == _UNK:
                known[r, c] = _FREE
                changed += 1
            if tx < ty:
                t = tx
                tx += tdx
                c += sc
            else:
                t = ty
                ty += tdy
                r += sr
            if t >= rmax:
                break
    return changed


@njit(cache=True)
def segments_free(cells, a_cols, a_rows, b_cols, b_rows, step):
    """For each segment between cell centers, whether every sampled cell is Free."""
    h, w = cells.shape
    out = np.zeros(a_cols.size, dtype=np.bool_)
    for k in range(a_cols.size):
        ac, ar = a_cols[k] + 0.5, a_rows[k] + 0.5
        dc, dr = b_cols[k] - a_cols[k], b_rows[k] - a_rows[k]
        n = max(1, int(math.ceil(math.hypot(dc, dr) / step)))
        ok = True
        for i in range(n + 1):
            t = i / n
            c = int(math.floor(ac + t * dc))
            r = int(math.floor(ar + t * dr))
            if c < 0 or r < 0 or c >= w or r >= h or cells[r, c] != _FREE:
                ok = False
                break
        out[k] = ok
    return out


@njit(cache=True)
def open_unknown_count(window, disc, lr, lc):
    """Unknown disc cells 4-connected to (lr, lc) through non-occupied disc cells."""
    h, w = window.shape
    if not disc[lr, lc] or window[lr, lc] == _OCC:
        return 0
    seen = np.zeros((h, w), dtype=np.bool_)
    stack = np.empty(h * w, dtype=np.int64)
    top = 0
    stack[top] = lr * w + lc
    top += 1
    seen[lr, lc] = True
    count = 0
    while top > 0:
        top -= 1
        r = stack[top] // w
        c = stack[top] % w
        if window[r, c] == _UNK:
            count += 1
        for k in range(4):
            nr = r + (k == 0) - (k == 1)
            nc = c + (k == 2) - (k == 3)
            if 0 <= nr < h and 0 <= nc < w and not seen[nr, nc] and disc[nr, nc] \
                    and window[nr, nc] != _OCC:
                seen[nr, nc] = True
                stack[top] = nr * w + nc
                top += 1
    return count

"""Numba inner loops for warping and correlation scoring.

These kernels release the GIL so row-chunked tasks scale across a thread
pool. Every task writes a disjoint row range and reductions run in a fixed
order afterwards, so results are bit-identical for any thread count.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# Pixel (i, j) has continuous coordinates (j + 0.5, i + 0.5); sampling
# positions convert back to index space by subtracting 0.5.


@njit(cache=True, nogil=True, inline="always")
def _sample_bilinear(src, mask, x, y, feat_out):
    """Sample all channels of ``src`` at index coordinates (x, y).

    Returns (inbounds, mask_on); feat_out is filled only when inbounds.
    """
    hs, ws = src.shape[0], src.shape[1]
    if not (0.0 <= x <= ws - 1.0 and 0.0 <= y <= hs - 1.0):
        return False, False
    x0 = int(x)
    if x0 > ws - 2:
        x0 = ws - 2
    if x0 < 0:
        x0 = 0
    y0 = int(y)
    if y0 > hs - 2:
        y0 = hs - 2
    if y0 < 0:
        y0 = 0
    x1 = x0 + 1 if x0 + 1 <= ws - 1 else ws - 1
    y1 = y0 + 1 if y0 + 1 <= hs - 1 else hs - 1
    fx = x - x0
    fy = y - y0
    w00 = (1.0 - fy) * (1.0 - fx)
    w01 = (1.0 - fy) * fx
    w10 = fy * (1.0 - fx)
    w11 = fy * fx
    for c in range(src.shape[2]):
        feat_out[c] = np.float32(
            w00 * src[y0, x0, c]
            + w01 * src[y0, x1, c]
            + w10 * src[y1, x0, c]
            + w11 * src[y1, x1, c]
        )
    mi = int(y + 0.5)
    if mi > hs - 1:
        mi = hs - 1
    mj = int(x + 0.5)
    if mj > ws - 1:
        mj = ws - 1
    return True, mask[mi, mj] != 0


@njit(cache=True, nogil=True)
def warp_rows(src, mask, amat, bvec, depth, feat, valid, mwarp, inb, row0, row1):
    """Warp rows [row0, row1) of the target through a per-pixel depth plane.

    Source homogeneous coordinates are A @ (u, v, 1) + b / depth, so a
    constant-depth homography H is the special case (A=H, b=0, depth=1).

    Args:
        src: (Hs, Ws, C) float32 source features.
        mask: (Hs, Ws) uint8 source foreground mask.
        amat: (3, 3) float64.
        bvec: (3,) float64.
        depth: (Ht, Wt) float64; NaN or <= 0 marks the pixel invalid.
        feat: (Ht, Wt, C) float32 output.
        valid: (Ht, Wt) uint8 output, in-bounds AND source-mask-on.
        mwarp: (Ht, Wt) uint8 output, nearest-neighbor mask sample (0 outside).
        inb: (Ht, Wt) uint8 output, all bilinear taps in bounds.
    """
    wt = depth.shape[1]
    c = src.shape[2]
    feat_px = np.empty(c, dtype=np.float32)
    for i in range(row0, row1):
        v_t = i + 0.5
        for j in range(wt):
            u_t = j + 0.5
            d = depth[i, j]
            valid[i, j] = 0
            mwarp[i, j] = 0
            inb[i, j] = 0
            for ch in range(c):
                feat[i, j, ch] = 0.0
            if not (d > 0.0):
                continue
            inv_d = 1.0 / d
            qx = amat[0, 0] * u_t + amat[0, 1] * v_t + amat[0, 2] + bvec[0] * inv_d
            qy = amat[1, 0] * u_t + amat[1, 1] * v_t + amat[1, 2] + bvec[1] * inv_d
            qw = amat[2, 0] * u_t + amat[2, 1] * v_t + amat[2, 2] + bvec[2] * inv_d
            if qw <= 1e-12:
                continue
            x = qx / qw - 0.5
            y = qy / qw - 0.5
            ok, mask_on = _sample_bilinear(src, mask, x, y, feat_px)
            if not ok:
                continue
            inb[i, j] = 1
            if mask_on:
                mwarp[i, j] = 1
                valid[i, j] = 1
                for ch in range(c):
                    feat[i, j, ch] = feat_px[ch]


@njit(cache=True, nogil=True)
def sweep_score_rows(srcs, masks, amats, bvecs, depth, groups, score, vweight, row0, row1):
    """Warp all three views at one depth hypothesis and score rows in place.

    The score is the grouped correlation averaged over channel groups and
    over the unordered view pairs whose members are both valid; the validity
    weight is (valid pairs) / 3.

    Args:
        srcs: (3, Hs, Ws, C) float32.
        masks: (3, Hs, Ws) uint8.
        amats: (3, 3, 3) float64; bvecs: (3, 3) float64.
        depth: (Ht, Wt) float64 hypothesis depth per pixel.
        groups: Channel group count (C divisible by groups).
        score: (Ht, Wt) float32 output.
        vweight: (Ht, Wt) float32 output.
    """
    wt = depth.shape[1]
    c = srcs.shape[3]
    cpg = c // groups
    feats = np.empty((3, c), dtype=np.float32)
    ok = np.empty(3, dtype=np.uint8)
    for i in range(row0, row1):
        v_t = i + 0.5
        for j in range(wt):
            u_t = j + 0.5
            score[i, j] = 0.0
            vweight[i, j] = 0.0
            d = depth[i, j]
            if not (d > 0.0):
                continue
            inv_d = 1.0 / d
            for v in range(3):
                ok[v] = 0
                qx = amats[v, 0, 0] * u_t + amats[v, 0, 1] * v_t + amats[v, 0, 2] + bvecs[v, 0] * inv_d
                qy = amats[v, 1, 0] * u_t + amats[v, 1, 1] * v_t + amats[v, 1, 2] + bvecs[v, 1] * inv_d
                qw = amats[v, 2, 0] * u_t + amats[v, 2, 1] * v_t + amats[v, 2, 2] + bvecs[v, 2] * inv_d
                if qw <= 1e-12:
                    continue
                x = qx / qw - 0.5
                y = qy / qw - 0.5
                inb, mask_on = _sample_bilinear(srcs[v], masks[v], x, y, feats[v])
                if inb and mask_on:
                    ok[v] = 1
            pairs = 0
            acc = 0.0
            for a in range(3):
                for b in range(a + 1, 3):
                    if ok[a] == 0 or ok[b] == 0:
                        continue
                    pairs += 1
                    pair_acc = 0.0
                    for g in range(groups):
                        gacc = 0.0
                        for cc in range(g * cpg, (g + 1) * cpg):
                            gacc += feats[a, cc] * feats[b, cc]
                        pair_acc += gacc / cpg
                    acc += pair_acc / groups
            if pairs > 0:
                score[i, j] = np.float32(acc / pairs)
                vweight[i, j] = np.float32(pairs / 3.0)


def warm_up():
    """Force JIT compilation of both kernels on tiny inputs."""
    src = np.zeros((3, 2, 2, 8), dtype=np.float32)
    mask = np.ones((3, 2, 2), dtype=np.uint8)
    amat = np.tile(np.eye(3), (3, 1, 1))
    bvec = np.zeros((3, 3))
    depth = np.ones((2, 2))
    feat = np.zeros((2, 2, 8), dtype=np.float32)
    flags = np.zeros((2, 2), dtype=np.uint8)
    warp_rows(src[0], mask[0], amat[0], bvec[0], depth, feat, flags, flags.copy(), flags.copy(), 0, 2)
    score = np.zeros((2, 2), dtype=np.float32)
    vweight = np.zeros((2, 2), dtype=np.float32)
    sweep_score_rows(src, mask, amat, bvec, depth, 4, score, vweight, 0, 2)

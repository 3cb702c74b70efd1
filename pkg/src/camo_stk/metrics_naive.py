"""Loop-based reference implementations of the segmentation metrics.

These twins follow the exact conventions documented in ``metrics`` but
are written as direct per-pixel loops with scalar arithmetic, so the two
modules share no computational path. They are meant for small masks
(cross-checking the vectorized kernels); expect quadratic cost.
"""

from __future__ import annotations

import math

import numpy as np

from .metrics import (F_BETA_SQ, S_ALPHA, WF_DECAY, WF_SIGMA, WF_WINDOW)
from .tensor import round_half_up


def _to_lists(arr) -> list[list[float]]:
    return [[float(v) for v in row] for row in np.asarray(arr)]


def naive_mae(pred, gt) -> float:
    p, g = _to_lists(pred), _to_lists(gt)
    total = 0.0
    count = 0
    for pr, gr in zip(p, g):
        for pv, gv in zip(pr, gr):
            total += abs(pv - gv)
            count += 1
    return total / count


def _binarize(p: float, threshold: float) -> bool:
    if threshold > 0.0:
        return p >= threshold
    return p > 0.0


def naive_dice_iou(pred, gt, threshold: float) -> tuple[float, float]:
    p, g = _to_lists(pred), _to_lists(gt)
    inter = psum = gsum = 0
    for pr, gr in zip(p, g):
        for pv, gv in zip(pr, gr):
            pb = _binarize(pv, threshold)
            gb = gv > 0.5
            inter += pb and gb
            psum += pb
            gsum += gb
    if psum == 0 and gsum == 0:
        return 1.0, 1.0
    dice = 2.0 * inter / (psum + gsum)
    union = psum + gsum - inter
    return dice, (inter / union if union else 1.0)


def naive_f_measure_max(pred, gt) -> float:
    p, g = _to_lists(pred), _to_lists(gt)
    g_count = sum(1 for gr in g for gv in gr if gv > 0.5)
    if g_count == 0:
        return 0.0
    best = 0.0
    for k in range(256):
        t = k / 255.0
        tp = fp = 0
        for pr, gr in zip(p, g):
            for pv, gv in zip(pr, gr):
                if pv > t:
                    if gv > 0.5:
                        tp += 1
                    else:
                        fp += 1
        if tp + fp == 0:
            continue
        prec = tp / (tp + fp)
        rec = tp / g_count
        denom = F_BETA_SQ * prec + rec
        if denom > 0.0:
            best = max(best, (1.0 + F_BETA_SQ) * prec * rec / denom)
    return best


def naive_f_measure_weighted(pred, gt) -> float:
    p, g = _to_lists(pred), _to_lists(gt)
    h, w = len(p), len(p[0])
    fg = [(y, x) for y in range(h) for x in range(w) if g[y][x] > 0.5]
    if not fg:
        return 0.0
    err = [[abs(p[y][x] - g[y][x]) for x in range(w)] for y in range(h)]

    # Nearest foreground pixel per background pixel, ties to smallest (row, col).
    dist = [[0.0] * w for _ in range(h)]
    err_dep = [row[:] for row in err]
    for y in range(h):
        for x in range(w):
            if g[y][x] > 0.5:
                continue
            best = None
            for fy, fx in fg:
                d2 = (fy - y) ** 2 + (fx - x) ** 2
                cand = (d2, fy, fx)
                if best is None or cand < best:
                    best = cand
            dist[y][x] = math.sqrt(best[0])
            err_dep[y][x] = err[best[1]][best[2]]

    half = WF_WINDOW // 2
    kernel = [[math.exp(-(dy * dy + dx * dx) / (2.0 * WF_SIGMA ** 2))
               for dx in range(-half, half + 1)] for dy in range(-half, half + 1)]
    ksum = sum(sum(row) for row in kernel)
    kernel = [[v / ksum for v in row] for row in kernel]

    weighted_fg_err = 0.0
    weighted_bg_err = 0.0
    for y in range(h):
        for x in range(w):
            if g[y][x] > 0.5:
                blurred = 0.0
                support = 0.0
                for dy in range(-half, half + 1):
                    for dx in range(-half, half + 1):
                        yy, xx = y + dy, x + dx
                        if 0 <= yy < h and 0 <= xx < w:
                            blurred += kernel[dy + half][dx + half] * err_dep[yy][xx]
                            support += kernel[dy + half][dx + half]
                blurred /= support
                weighted_fg_err += blurred if blurred < err[y][x] else err[y][x]
            else:
                decay = 2.0 - math.exp(WF_DECAY * dist[y][x])
                weighted_bg_err += err[y][x] * decay

    fg_count = len(fg)
    tp_w = fg_count - weighted_fg_err
    recall = 1.0 - weighted_fg_err / fg_count
    denom = tp_w + weighted_bg_err
    precision = tp_w / denom if denom > 0.0 else 0.0
    if precision + recall <= 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _naive_mean(values: list[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def _naive_sample_var(values: list[float]) -> float:
    n = len(values)
    if n <= 1:
        return 0.0
    m = _naive_mean(values)
    return sum((v - m) ** 2 for v in values) / (n - 1)


def _naive_ssim(pb: list[float], gb: list[float]) -> float:
    n = len(pb)
    mx, my = _naive_mean(pb), _naive_mean(gb)
    vx, vy = _naive_sample_var(pb), _naive_sample_var(gb)
    cov = (sum((a - mx) * (b - my) for a, b in zip(pb, gb)) / (n - 1)) if n > 1 else 0.0
    alpha = 4.0 * mx * my * cov
    beta = (mx * mx + my * my) * (vx + vy)
    if alpha != 0.0:
        return alpha / beta
    return 1.0 if beta == 0.0 else 0.0


def naive_s_measure(pred, gt) -> float:
    p, g = _to_lists(pred), _to_lists(gt)
    h, w = len(p), len(p[0])
    flat_g = [v for row in g for v in row]
    gt_mean = _naive_mean(flat_g)
    if gt_mean == 0.0:
        return 1.0 - _naive_mean([v for row in p for v in row])
    if gt_mean == 1.0:
        return _naive_mean([v for row in p for v in row])

    fg_vals = [p[y][x] for y in range(h) for x in range(w) if g[y][x] > 0.5]
    bg_vals = [1.0 - p[y][x] for y in range(h) for x in range(w) if g[y][x] <= 0.5]

    def obj(vals: list[float]) -> float:
        if not vals:
            return 0.0
        m = _naive_mean(vals)
        s = math.sqrt(_naive_sample_var(vals))
        return 2.0 * m / (m * m + 1.0 + s)

    s_object = gt_mean * obj(fg_vals) + (1.0 - gt_mean) * obj(bg_vals)

    if h < 2 or w < 2:
        s_region = _naive_ssim([v for row in p for v in row], flat_g)
    else:
        ys = [y for y in range(h) for x in range(w) if g[y][x] > 0.5]
        xs = [x for y in range(h) for x in range(w) if g[y][x] > 0.5]
        cy = round_half_up(_naive_mean(ys)) if ys else h // 2
        cx = round_half_up(_naive_mean(xs)) if xs else w // 2
        cut_y = min(max(cy + 1, 1), h - 1)
        cut_x = min(max(cx + 1, 1), w - 1)
        s_region = 0.0
        for y0, y1, x0, x1 in ((0, cut_y, 0, cut_x), (0, cut_y, cut_x, w),
                               (cut_y, h, 0, cut_x), (cut_y, h, cut_x, w)):
            pb = [p[y][x] for y in range(y0, y1) for x in range(x0, x1)]
            gb = [g[y][x] for y in range(y0, y1) for x in range(x0, x1)]
            s_region += (len(pb) / (h * w)) * _naive_ssim(pb, gb)

    return max(0.0, S_ALPHA * s_object + (1.0 - S_ALPHA) * s_region)


def _naive_alignment(fm: list[list[bool]], g: list[list[float]]) -> float:
    h, w = len(g), len(g[0])
    hw = h * w
    g_count = sum(1 for row in g for v in row if v > 0.5)
    p_count = sum(1 for row in fm for v in row if v)
    if g_count == 0:
        return (hw - p_count) / hw
    if g_count == hw:
        return p_count / hw
    mu_f = p_count / hw
    mu_g = g_count / hw
    total = 0.0
    for y in range(h):
        for x in range(w):
            a = (1.0 if fm[y][x] else 0.0) - mu_f
            b = (1.0 if g[y][x] > 0.5 else 0.0) - mu_g
            d = a * a + b * b
            xi = 0.0 if d == 0.0 else 2.0 * a * b / d
            total += (1.0 + xi) ** 2 / 4.0
    return total / hw


def naive_e_measure(pred, gt) -> float:
    p, g = _to_lists(pred), _to_lists(gt)
    best = 0.0
    for k in range(256):
        t = k / 255.0
        fm = [[pv > t for pv in row] for row in p]
        best = max(best, _naive_alignment(fm, g))
    return best


def naive_e_measure_adaptive(pred, gt) -> float:
    p, g = _to_lists(pred), _to_lists(gt)
    flat = [v for row in p for v in row]
    t = min(2.0 * _naive_mean(flat), 1.0)
    fm = [[_binarize(pv, t) for pv in row] for row in p]
    return _naive_alignment(fm, g)

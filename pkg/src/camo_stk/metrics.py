"""Segmentation quality metrics for camouflaged-object masks.

Seven per-frame measures: S-measure, max F-measure, weighted F-measure,
E-measure, MAE, Dice and IoU. Formulas follow the standard published
definitions; every degenerate case is handled by an explicit branch
rather than an epsilon guard, so a perfect prediction scores exactly 1.0
(0.0 for MAE). The documented conventions:

* Threshold sweeps use the 256 cuts k/255 with the strict comparator
  ``pred > t`` (an all-zero prediction is negative at every cut).
* Adaptive binarization uses t = min(2 * mean(pred), 1), comparator
  ``pred >= t`` when t > 0 and ``pred > 0`` when t = 0.
* Empty-ground-truth frames: Dice/IoU of two empty masks are 1; the
  F-measures return 0 with a degeneracy warning; S and E fall back to
  background-accuracy forms (all-empty prediction scores 1).
* The reported E-measure is the maximum over the threshold sweep.
* Sequence aggregation is the arithmetic mean of per-frame values
  (exactly rounded via fsum, so frame order cannot matter).

A loop-based twin of every kernel lives in ``metrics_naive`` for
cross-checking on small masks.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from PIL import Image
from scipy import ndimage

from .tensor import ShapeError, round_half_up

F_BETA_SQ = 0.3           # beta^2 for the max F-measure
WF_SIGMA = 5.0            # Gaussian spread of the error-dependency window
WF_WINDOW = 7             # truncation of that window (7x7)
WF_DECAY = math.log(0.5) / 5.0   # exponential distance decay over background
S_ALPHA = 0.5             # object/region balance of the S-measure
GT_BINARIZE_LEVEL = 128   # 8-bit level at which ground truth becomes 1

METRIC_FIELDS = ("s_alpha", "f_max", "f_beta_w", "e_m", "mae", "m_dice", "m_iou")


class DegenerateMaskWarning(UserWarning):
    """A metric hit a degenerate convention (e.g. empty ground truth)."""


@dataclass(frozen=True)
class MaskPair:
    """One prediction/ground-truth frame; pred in [0,1], gt strictly binary."""

    pred: np.ndarray
    gt: np.ndarray

    def __post_init__(self) -> None:
        pred = np.asarray(self.pred, dtype=np.float64)
        gt = np.asarray(self.gt, dtype=np.float64)
        if pred.ndim != 2 or pred.shape != gt.shape:
            raise ShapeError(f"pred {pred.shape} and gt {gt.shape} must be equal 2-D maps")
        if pred.size == 0:
            raise ShapeError("empty masks carry no pixels to score")
        if not np.isin(gt, (0.0, 1.0)).all():
            raise ValueError("ground truth must be strictly binary")
        object.__setattr__(self, "pred", np.clip(pred, 0.0, 1.0))
        object.__setattr__(self, "gt", gt)


@dataclass(frozen=True)
class MetricReport:
    s_alpha: float
    f_max: float
    f_beta_w: float
    e_m: float
    mae: float
    m_dice: float
    m_iou: float
    frame_count: int

    def as_row(self) -> list[float]:
        return [getattr(self, f) for f in METRIC_FIELDS]


def mae(pair: MaskPair) -> float:
    return float(np.abs(pair.pred - pair.gt).mean())


def adaptive_threshold(pred: np.ndarray) -> float:
    return min(2.0 * float(pred.mean()), 1.0)


def binarize_at(pred: np.ndarray, threshold: float) -> np.ndarray:
    """Adaptive-style cut: >= t for positive t, strictly > 0 otherwise."""
    if threshold > 0.0:
        return pred >= threshold
    return pred > 0.0


def dice_iou(pair: MaskPair, threshold: float) -> tuple[float, float]:
    """Overlap scores of the binarized prediction; (1, 1) when both empty."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    p = binarize_at(pair.pred, threshold)
    g = pair.gt > 0.5
    inter = int(np.count_nonzero(p & g))
    psum = int(np.count_nonzero(p))
    gsum = int(np.count_nonzero(g))
    if psum == 0 and gsum == 0:
        return 1.0, 1.0
    dice = 2.0 * inter / (psum + gsum)
    union = psum + gsum - inter
    iou = inter / union if union else 1.0
    return dice, iou


def _sweep_counts(pair: MaskPair) -> tuple[np.ndarray, np.ndarray, int]:
    """Positives and true positives at each of the 256 strict cuts."""
    thresholds = np.arange(256, dtype=np.float64) / 255.0
    flat = np.sort(pair.pred, axis=None)
    fg = np.sort(pair.pred[pair.gt > 0.5], axis=None)
    positives = flat.size - np.searchsorted(flat, thresholds, side="right")
    true_pos = fg.size - np.searchsorted(fg, thresholds, side="right")
    return positives, true_pos, fg.size


def f_measure_max(pair: MaskPair) -> float:
    """Maximum F over the 256-threshold sweep, beta^2 = 0.3."""
    positives, true_pos, g = _sweep_counts(pair)
    if g == 0:
        warnings.warn("F-measure of an empty ground truth is 0 by convention",
                      DegenerateMaskWarning, stacklevel=2)
        return 0.0
    best = 0.0
    for p_cnt, tp in zip(positives, true_pos):
        if p_cnt == 0:
            continue
        prec = tp / p_cnt
        rec = tp / g
        denom = F_BETA_SQ * prec + rec
        if denom > 0.0:
            best = max(best, (1.0 + F_BETA_SQ) * prec * rec / denom)
    return best


def _gaussian_window() -> np.ndarray:
    half = WF_WINDOW // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * WF_SIGMA ** 2))
    return k / k.sum()


def _nearest_fg_errors(err: np.ndarray, gt_bool: np.ndarray,
                       band: np.ndarray) -> np.ndarray:
    """err value at the nearest foreground pixel, for each band pixel.

    Ties in Euclidean distance break to the smallest (row, col). Band
    pixels sit within Chebyshev distance 3 of some foreground pixel, so
    their nearest foreground lies within the +-5 search window.
    """
    h, w = err.shape
    ys, xs = np.nonzero(band)
    sentinel = np.iinfo(np.int64).max
    best = np.full(len(ys), sentinel, dtype=np.int64)
    for dy in range(-5, 6):
        cy = ys + dy
        oky = (cy >= 0) & (cy < h)
        cyc = np.clip(cy, 0, h - 1)
        for dx in range(-5, 6):
            cx = xs + dx
            ok = oky & (cx >= 0) & (cx < w)
            cxc = np.clip(cx, 0, w - 1)
            hit = ok & gt_bool[cyc, cxc]
            key = (dy * dy + dx * dx) * (h * w) + (cyc * w + cxc)
            key = np.where(hit, key, sentinel)
            best = np.minimum(best, key)
    lin = best % (h * w)
    return err.ravel()[lin]


def f_measure_weighted(pair: MaskPair) -> float:
    """Weighted F with error dependency and distance decay, beta^2 = 1."""
    gt_bool = pair.gt > 0.5
    fg_count = int(np.count_nonzero(gt_bool))
    if fg_count == 0:
        warnings.warn("weighted F of an empty ground truth is 0 by convention",
                      DegenerateMaskWarning, stacklevel=2)
        return 0.0
    err = np.abs(pair.pred - pair.gt)
    dist = ndimage.distance_transform_edt(~gt_bool)

    # Background errors inherit the error of their nearest foreground
    # pixel before the dependency blur; only pixels within the blur
    # window of some foreground pixel can influence the result.
    band = ndimage.maximum_filter(gt_bool, size=WF_WINDOW, mode="constant") & ~gt_bool
    err_dep = err.copy()
    if band.any():
        err_dep[band] = _nearest_fg_errors(err, gt_bool, band)
    # The spread is an average over the window's in-frame support, so a
    # uniform error field stays uniform up to the frame edge.
    window = _gaussian_window()
    blurred = ndimage.convolve(err_dep, window, mode="constant", cval=0.0)
    support = ndimage.convolve(np.ones_like(err_dep), window, mode="constant", cval=0.0)
    blurred /= support
    dep_err = np.where(gt_bool & (blurred < err), blurred, err)

    decay = np.where(gt_bool, 1.0, 2.0 - np.exp(WF_DECAY * dist))
    weighted = dep_err * decay

    fg_err = float(weighted[gt_bool].sum())
    tp_w = fg_count - fg_err
    fp_w = float(weighted[~gt_bool].sum())
    recall = 1.0 - fg_err / fg_count
    denom = tp_w + fp_w
    precision = tp_w / denom if denom > 0.0 else 0.0
    if precision + recall <= 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _sample_var(x: np.ndarray) -> float:
    return float(x.var(ddof=1)) if x.size > 1 else 0.0


def _ssim_block(pred: np.ndarray, gt: np.ndarray) -> float:
    n = pred.size
    mx = float(pred.mean())
    my = float(gt.mean())
    vx = _sample_var(pred)
    vy = _sample_var(gt)
    cov = float(((pred - mx) * (gt - my)).sum() / (n - 1)) if n > 1 else 0.0
    alpha = 4.0 * mx * my * cov
    beta = (mx * mx + my * my) * (vx + vy)
    if alpha != 0.0:
        return alpha / beta
    return 1.0 if beta == 0.0 else 0.0


def _object_score(values: np.ndarray) -> float:
    if values.size == 0:
        return 0.0
    mean = float(values.mean())
    std = math.sqrt(_sample_var(values))
    return 2.0 * mean / (mean * mean + 1.0 + std)


def _centroid_cuts(gt_bool: np.ndarray) -> tuple[int, int]:
    h, w = gt_bool.shape
    ys, xs = np.nonzero(gt_bool)
    if len(ys) == 0:
        cy, cx = h // 2, w // 2
    else:
        cy = round_half_up(float(ys.mean()))
        cx = round_half_up(float(xs.mean()))
    cut_y = min(max(cy + 1, 1), h - 1)
    cut_x = min(max(cx + 1, 1), w - 1)
    return cut_y, cut_x


def s_measure(pair: MaskPair) -> float:
    """Structure measure: object/region balance at alpha = 0.5.

    Degenerate ground truths score the prediction's background (all-zero
    gt) or foreground (all-one gt) mean. The region term splits at the
    foreground centroid (half-up rounding, clamped so all four blocks
    are non-empty); 1-pixel-wide masks fall back to a whole-frame block.
    """
    gt_mean = float(pair.gt.mean())
    if gt_mean == 0.0:
        return 1.0 - float(pair.pred.mean())
    if gt_mean == 1.0:
        return float(pair.pred.mean())
    gt_bool = pair.gt > 0.5

    fg_score = _object_score(pair.pred[gt_bool])
    bg_score = _object_score(1.0 - pair.pred[~gt_bool])
    s_object = gt_mean * fg_score + (1.0 - gt_mean) * bg_score

    h, w = pair.gt.shape
    if h < 2 or w < 2:
        s_region = _ssim_block(pair.pred, pair.gt)
    else:
        cut_y, cut_x = _centroid_cuts(gt_bool)
        s_region = 0.0
        for rows, cols in (((0, cut_y), (0, cut_x)), ((0, cut_y), (cut_x, w)),
                           ((cut_y, h), (0, cut_x)), ((cut_y, h), (cut_x, w))):
            pb = pair.pred[rows[0]:rows[1], cols[0]:cols[1]]
            gb = pair.gt[rows[0]:rows[1], cols[0]:cols[1]]
            s_region += (pb.size / pair.gt.size) * _ssim_block(pb, gb)

    return max(0.0, S_ALPHA * s_object + (1.0 - S_ALPHA) * s_region)


def _alignment_mean(n11: int, n10: int, n01: int, n00: int, hw: int) -> float:
    """Mean enhanced-alignment of a binarized prediction via class counts."""
    g = n11 + n01
    p = n11 + n10
    if g == 0:
        return (hw - p) / hw
    if g == hw:
        return p / hw
    mu_f = p / hw
    mu_g = g / hw
    a_pos, a_neg = 1.0 - mu_f, -mu_f
    b_pos, b_neg = 1.0 - mu_g, -mu_g

    def phi(a: float, b: float) -> float:
        d = a * a + b * b
        xi = 0.0 if d == 0.0 else 2.0 * a * b / d
        return (1.0 + xi) ** 2 / 4.0

    total = (n11 * phi(a_pos, b_pos) + n10 * phi(a_pos, b_neg)
             + n01 * phi(a_neg, b_pos) + n00 * phi(a_neg, b_neg))
    return total / hw


def e_measure(pair: MaskPair) -> float:
    """Enhanced-alignment measure, maximum over the 256-threshold sweep."""
    positives, true_pos, g = _sweep_counts(pair)
    hw = pair.gt.size
    best = 0.0
    for p_cnt, tp in zip(positives, true_pos):
        n11 = int(tp)
        n10 = int(p_cnt) - n11
        n01 = g - n11
        n00 = hw - n11 - n10 - n01
        best = max(best, _alignment_mean(n11, n10, n01, n00, hw))
    return best


def e_measure_adaptive(pair: MaskPair) -> float:
    """Enhanced alignment at the adaptive 2x-mean binarization."""
    p = binarize_at(pair.pred, adaptive_threshold(pair.pred))
    g = pair.gt > 0.5
    n11 = int(np.count_nonzero(p & g))
    n10 = int(np.count_nonzero(p & ~g))
    n01 = int(np.count_nonzero(~p & g))
    n00 = pair.gt.size - n11 - n10 - n01
    return _alignment_mean(n11, n10, n01, n00, pair.gt.size)


def frame_metrics(pair: MaskPair) -> MetricReport:
    t = adaptive_threshold(pair.pred)
    dice, iou = dice_iou(pair, t)
    return MetricReport(
        s_alpha=s_measure(pair),
        f_max=f_measure_max(pair),
        f_beta_w=f_measure_weighted(pair),
        e_m=e_measure(pair),
        mae=mae(pair),
        m_dice=dice,
        m_iou=iou,
        frame_count=1,
    )


def mean_reports(reports: Sequence[MetricReport],
                 frame_count: int | None = None) -> MetricReport:
    """Arithmetic mean of reports; exactly rounded, so order-independent."""
    if not reports:
        raise ValueError("cannot average an empty report list")
    values = {f: math.fsum(getattr(r, f) for r in reports) / len(reports)
              for f in METRIC_FIELDS}
    if frame_count is None:
        frame_count = sum(r.frame_count for r in reports)
    return MetricReport(frame_count=frame_count, **values)


def evaluate_sequence(frames: Iterable[MaskPair]) -> MetricReport:
    """Per-frame metrics averaged arithmetically over the clip."""
    reports = [frame_metrics(p) for p in frames]
    if not reports:
        raise ValueError("cannot evaluate an empty frame list")
    return mean_reports(reports, frame_count=len(reports))


def load_pred_mask(path: str) -> np.ndarray:
    """8-bit grayscale prediction mapped onto [0, 1]."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"), dtype=np.float64)
    return arr / 255.0


def load_gt_mask(path: str) -> np.ndarray:
    """8-bit grayscale ground truth binarized at level 128."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"), dtype=np.float64)
    return (arr >= GT_BINARIZE_LEVEL).astype(np.float64)

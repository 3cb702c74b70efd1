"""Trajectory-aware alignment of spatial features against temporal features.

A lightweight 3-D convolution regresses per-pixel sampling offsets and a
confidence mask from the temporal stream; the spatial stream is then
gathered along the offset grid with bilinear interpolation, scaled by the
mask, projected, and added back residually:

    out = f_t + Linear(sample(f_s, grid + offsets) * mask)

Offsets are spatial-only (dy, dx) within each frame; cross-frame context
enters through the regressor's 3-D receptive field. Samples that fall
outside the frame read zero. The base grid is a square stencil of k_pts
points (k_pts = 1 degenerates to the pixel itself) and the k_pts samples
are averaged per channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .cdc3d import ConvSpec3D, conv3d_plain, random_conv_spec
from .tensor import ShapeError, Tensor5
from . import rng

DEFAULT_SAMPLE_POINTS = 9


@dataclass(frozen=True)
class OffsetField:
    """(N, 2*k_pts, T, H, W) regression output; channel 2j is dy of point j,
    channel 2j+1 is dx, both in pixel units."""

    values: Tensor5

    def __post_init__(self) -> None:
        if self.values.shape.c % 2 != 0:
            raise ShapeError("offset channel extent must be even (dy, dx pairs)")
        if not np.isfinite(self.values.data).all():
            raise ValueError("offsets must be finite")

    @property
    def k_pts(self) -> int:
        return self.values.shape.c // 2


@dataclass(frozen=True)
class ModulationMask:
    """(N, 1, T, H, W) confidence map with every element in [0, 1]."""

    values: Tensor5

    def __post_init__(self) -> None:
        if self.values.shape.c != 1:
            raise ShapeError("modulation mask must have a single channel")
        d = self.values.data
        if d.size and (d.min() < 0.0 or d.max() > 1.0):
            raise ValueError("mask values must lie in [0, 1]")


@dataclass(frozen=True)
class TaaSpec:
    """Regressors and fusion projection for the alignment block.

    phi_off/phi_mod must be plain convolutions (theta = 0) that preserve
    the (T, H, W) extents; fuse_weights acts as y = W v + b on the
    channel vector at each location.
    """

    phi_off: ConvSpec3D
    phi_mod: ConvSpec3D
    fuse_weights: np.ndarray
    fuse_bias: np.ndarray
    k_pts: int = DEFAULT_SAMPLE_POINTS

    def __post_init__(self) -> None:
        if self.phi_off.theta != 0.0 or self.phi_mod.theta != 0.0:
            raise ValueError("regression convolutions must use theta = 0")
        if self.phi_off.c_out != 2 * self.k_pts:
            raise ShapeError(
                f"offset head emits {self.phi_off.c_out} channels, "
                f"need {2 * self.k_pts} for {self.k_pts} sampling points")
        if self.phi_mod.c_out != 1:
            raise ShapeError("modulation head must emit one channel")
        w = np.asarray(self.fuse_weights, dtype=np.float64)
        b = np.asarray(self.fuse_bias, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or b.shape != (w.shape[0],):
            raise ShapeError("fusion projection must be square with matching bias")
        object.__setattr__(self, "fuse_weights", w)
        object.__setattr__(self, "fuse_bias", b)


def base_grid(k_pts: int) -> list[tuple[int, int]]:
    """Unit-spacing square stencil centered on the output pixel.

    k_pts must be the square of an odd integer (1, 9, 25, ...).
    """
    r = math.isqrt(k_pts)
    if r * r != k_pts or r % 2 == 0:
        raise ValueError(f"k_pts must be an odd square, got {k_pts}")
    half = r // 2
    return [(dy, dx) for dy in range(-half, half + 1) for dx in range(-half, half + 1)]


def random_taa_spec(channels: int, seed: int, k_pts: int = DEFAULT_SAMPLE_POINTS,
                    kernel: tuple[int, int, int] = (3, 3, 3),
                    offset_scale: float = 0.1) -> TaaSpec:
    """Gaussian-initialized alignment block for demos and tests."""
    phi_off = random_conv_spec(2 * k_pts, channels, kernel, seed, theta=0.0,
                               scale=offset_scale, label="taa.phi_off")
    phi_mod = random_conv_spec(1, channels, kernel, seed, theta=0.0,
                               scale=offset_scale, label="taa.phi_mod")
    key = rng.stream_key(seed, "taa.fuse")
    fuse_w = rng.standard_normal(key, channels * channels).reshape(channels, channels)
    fuse_w /= math.sqrt(channels)
    fuse_b = rng.standard_normal(rng.stream_key(seed, "taa.fuse_bias"), channels)
    return TaaSpec(phi_off=phi_off, phi_mod=phi_mod,
                   fuse_weights=fuse_w, fuse_bias=fuse_b, k_pts=k_pts)


def predict_trajectory(f_t: Tensor5, spec: TaaSpec) -> tuple[OffsetField, ModulationMask]:
    """Regress raw offsets and a sigmoid-activated confidence mask."""
    off = conv3d_plain(f_t, spec.phi_off)
    mod = conv3d_plain(f_t, spec.phi_mod)
    want = (f_t.shape.t, f_t.shape.h, f_t.shape.w)
    if (off.shape.t, off.shape.h, off.shape.w) != want:
        raise ShapeError("offset head must preserve (T, H, W) extents")
    return OffsetField(off), ModulationMask(Tensor5(expit(mod.data)))


def _gather_bilinear(fs_last: np.ndarray, sy: np.ndarray, sx: np.ndarray,
                     idx_n: np.ndarray, idx_t: np.ndarray) -> np.ndarray:
    """Zero-padded bilinear read of (N,T,H,W,C) features at real coords."""
    h, w = fs_last.shape[2], fs_last.shape[3]
    y0 = np.floor(sy).astype(np.int64)
    x0 = np.floor(sx).astype(np.int64)
    fy = sy - y0
    fx = sx - x0
    out = np.zeros(sy.shape + (fs_last.shape[-1],), dtype=np.float64)
    for ay, wy in ((0, 1.0 - fy), (1, fy)):
        yi = y0 + ay
        yv = (yi >= 0) & (yi < h)
        yc = np.clip(yi, 0, h - 1)
        for ax, wx in ((0, 1.0 - fx), (1, fx)):
            xi = x0 + ax
            valid = yv & (xi >= 0) & (xi < w)
            xc = np.clip(xi, 0, w - 1)
            wgt = np.where(valid, wy * wx, 0.0)
            out += wgt[..., None] * fs_last[idx_n, idx_t, yc, xc]
    return out


def _coords(offsets: OffsetField, j: int, grid_pt: tuple[int, int]):
    n, _, t, h, w = offsets.values.shape
    dy = offsets.values.data[:, 2 * j]
    dx = offsets.values.data[:, 2 * j + 1]
    yy = np.arange(h, dtype=np.float64)[None, None, :, None]
    xx = np.arange(w, dtype=np.float64)[None, None, None, :]
    sy = yy + grid_pt[0] + dy
    sx = xx + grid_pt[1] + dx
    idx_n = np.arange(n)[:, None, None, None]
    idx_t = np.arange(t)[None, :, None, None]
    return sy, sx, idx_n, idx_t


def _check_sample_shapes(f_s: Tensor5, offsets: OffsetField, k_pts: int) -> None:
    if offsets.k_pts != k_pts:
        raise ShapeError(f"offset field holds {offsets.k_pts} points, caller says {k_pts}")
    fs, os_ = f_s.shape, offsets.values.shape
    if (fs.n, fs.t, fs.h, fs.w) != (os_.n, os_.t, os_.h, os_.w):
        raise ShapeError(f"feature extents {tuple(fs)} do not match offset "
                         f"geometry {tuple(os_)}")


def deform_sample(f_s: Tensor5, offsets: OffsetField, k_pts: int) -> Tensor5:
    """Average of k_pts bilinear gathers at (pixel + stencil + offset)."""
    _check_sample_shapes(f_s, offsets, k_pts)
    grid = base_grid(k_pts)
    fs_last = np.ascontiguousarray(np.moveaxis(f_s.data, 1, -1))
    acc = None
    for j, pt in enumerate(grid):
        sy, sx, idx_n, idx_t = _coords(offsets, j, pt)
        v = _gather_bilinear(fs_last, sy, sx, idx_n, idx_t)
        acc = v if acc is None else acc + v
    out = acc / float(k_pts)
    return Tensor5(np.ascontiguousarray(np.moveaxis(out, -1, 1)))


def deform_sample_backward(f_s: Tensor5, offsets: OffsetField,
                           grad_out: Tensor5) -> tuple[Tensor5, Tensor5]:
    """Adjoints of deform_sample for the features and the offsets.

    The offset gradient differentiates the bilinear weights; at integer
    coordinates the right-continuous one-sided derivative is used (the
    floor cell), matching the forward's floor-based weighting.
    """
    k_pts = offsets.k_pts
    _check_sample_shapes(f_s, offsets, k_pts)
    if grad_out.shape != f_s.shape:
        raise ShapeError(f"grad_out extents {tuple(grad_out.shape)} do not match "
                         f"features {tuple(f_s.shape)}")
    grid = base_grid(k_pts)
    n, c, t, h, w = f_s.shape
    fs_last = np.ascontiguousarray(np.moveaxis(f_s.data, 1, -1))
    g_last = np.moveaxis(grad_out.data, 1, -1) / float(k_pts)

    grad_fs = np.zeros_like(fs_last)
    grad_off = np.zeros_like(offsets.values.data)

    for j, pt in enumerate(grid):
        sy, sx, idx_n, idx_t = _coords(offsets, j, pt)
        y0 = np.floor(sy).astype(np.int64)
        x0 = np.floor(sx).astype(np.int64)
        fy = sy - y0
        fx = sx - x0
        nn = np.broadcast_to(idx_n, sy.shape)
        tt = np.broadcast_to(idx_t, sy.shape)
        g_dy = np.zeros_like(sy)
        g_dx = np.zeros_like(sx)
        for ay in (0, 1):
            yi = y0 + ay
            yv = (yi >= 0) & (yi < h)
            yc = np.clip(yi, 0, h - 1)
            wy = fy if ay == 1 else 1.0 - fy
            dwy = 1.0 if ay == 1 else -1.0
            for ax in (0, 1):
                xi = x0 + ax
                valid = yv & (xi >= 0) & (xi < w)
                xc = np.clip(xi, 0, w - 1)
                wx = fx if ax == 1 else 1.0 - fx
                dwx = 1.0 if ax == 1 else -1.0
                vals = fs_last[nn, tt, yc, xc]          # (N,T,H,W,C)
                gdot = (g_last * vals).sum(axis=-1)     # (N,T,H,W)
                gdot = np.where(valid, gdot, 0.0)
                g_dy += dwy * wx * gdot
                g_dx += wy * dwx * gdot
                wgt = np.where(valid, wy * wx, 0.0)
                np.add.at(grad_fs, (nn, tt, yc, xc), wgt[..., None] * g_last)
        grad_off[:, 2 * j] = g_dy
        grad_off[:, 2 * j + 1] = g_dx

    grad_fs_t = Tensor5(np.ascontiguousarray(np.moveaxis(grad_fs, -1, 1)))
    return grad_fs_t, Tensor5(grad_off)


def taa_fuse(f_t: Tensor5, f_s: Tensor5, spec: TaaSpec) -> Tensor5:
    """Full alignment block: regress, sample, modulate, project, add."""
    if f_t.shape != f_s.shape:
        raise ShapeError(f"temporal {tuple(f_t.shape)} and spatial "
                         f"{tuple(f_s.shape)} extents differ")
    offsets, mask = predict_trajectory(f_t, spec)
    sampled = deform_sample(f_s, offsets, spec.k_pts)
    modulated = sampled.data * mask.values.data  # scalar mask broadcast over C
    proj = np.tensordot(np.moveaxis(modulated, 1, -1), spec.fuse_weights,
                        axes=([4], [1])) + spec.fuse_bias
    return Tensor5(f_t.data + np.ascontiguousarray(np.moveaxis(proj, -1, 1)))

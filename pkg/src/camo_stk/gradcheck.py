"""Finite-difference verification of the analytic adjoints.

The check is the usual cotangent trick: for a fixed random cotangent g,
loss(x) = <g, forward(x)> has gradient equal to the analytic backward's
output, and central differences approximate it independently. Both
operators under test are (piecewise) linear in every argument, so the
central difference is exact up to round-off away from bilinear kinks;
offset perturbations are kept at least 0.25 away from integer sampling
coordinates for that reason.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import rng
from .align import OffsetField, deform_sample, deform_sample_backward
from .cdc3d import ConvSpec3D, cdc3d_backward, cdc3d_forward_unified, random_conv_spec
from .tensor import Shape5, Tensor5, gaussian_init

FD_EPSILON = 1e-5
FD_TOLERANCE = 1e-4


@dataclass(frozen=True)
class GradCheckResult:
    op: str
    argument: str
    seed: int
    max_rel_error: float
    worst_coord: tuple[int, ...]

    @property
    def passed(self) -> bool:
        return self.max_rel_error < FD_TOLERANCE


def fd_gradient(loss: Callable[[np.ndarray], float], x: np.ndarray,
                eps: float = FD_EPSILON) -> np.ndarray:
    """Central-difference gradient of a scalar loss, element by element."""
    grad = np.zeros_like(x)
    flat = x.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + eps
        f_plus = loss(x)
        flat[i] = keep - eps
        f_minus = loss(x)
        flat[i] = keep
        gflat[i] = (f_plus - f_minus) / (2.0 * eps)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> tuple[float, tuple[int, ...]]:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1.0)
    rel = np.abs(analytic - numeric) / denom
    flat_idx = int(rel.argmax())
    return float(rel.ravel()[flat_idx]), np.unravel_index(flat_idx, rel.shape)


def _offsets_away_from_integers(shape: Shape5, seed: int, spread: float = 2.0) -> Tensor5:
    """Offsets whose fractional part lies in [0.25, 0.75]."""
    key = rng.stream_key(seed, "gradcheck.offsets")
    u = rng.uniform(key, Shape5(*shape).size())
    whole = np.floor((u - 0.5) * 2.0 * spread)
    frac = rng.uniform(rng.stream_key(seed, "gradcheck.offsets.frac"),
                       Shape5(*shape).size())
    vals = whole + 0.25 + 0.5 * frac
    return Tensor5(vals.reshape(tuple(shape)))


def check_cdc3d(seed: int, theta: float = 0.458,
                corrupt: bool = False) -> list[GradCheckResult]:
    x = gaussian_init(Shape5(1, 2, 3, 5, 5), seed, "gradcheck.cdc.x")
    spec = random_conv_spec(2, 2, (3, 3, 3), seed, theta=theta,
                            label="gradcheck.cdc.w")
    out_shape = Shape5(1, 2, *spec.out_extents(x.shape))
    cot = gaussian_init(out_shape, seed, "gradcheck.cdc.cot")

    grad_x, grad_w = cdc3d_backward(x, spec, cot)
    gx = grad_x.data.copy()
    gw = grad_w.data.copy()
    if corrupt:
        gx.ravel()[0] += 0.01 * (1.0 + np.abs(gx).max())

    def loss_x(arr: np.ndarray) -> float:
        return float((cdc3d_forward_unified(Tensor5(arr), spec).data * cot.data).sum())

    def loss_w(arr: np.ndarray) -> float:
        s = ConvSpec3D(weights=Tensor5(arr), theta=spec.theta, stride=spec.stride,
                       padding=spec.padding, dilation=spec.dilation)
        return float((cdc3d_forward_unified(x, s).data * cot.data).sum())

    fd_x = fd_gradient(loss_x, x.data.copy())
    fd_w = fd_gradient(loss_w, spec.weights.data.copy())
    ex, cx = max_relative_error(gx, fd_x)
    ew, cw = max_relative_error(gw, fd_w)
    return [GradCheckResult("cdc3d_backward", "grad_x", seed, ex, cx),
            GradCheckResult("cdc3d_backward", "grad_w", seed, ew, cw)]


def check_deform(seed: int, k_pts: int = 9,
                 corrupt: bool = False) -> list[GradCheckResult]:
    f_s = gaussian_init(Shape5(1, 2, 2, 5, 5), seed, "gradcheck.deform.fs")
    off = OffsetField(_offsets_away_from_integers(
        Shape5(1, 2 * k_pts, 2, 5, 5), seed))
    cot = gaussian_init(f_s.shape, seed, "gradcheck.deform.cot")

    grad_fs, grad_off = deform_sample_backward(f_s, off, cot)
    gfs = grad_fs.data.copy()
    goff = grad_off.data.copy()
    if corrupt:
        goff.ravel()[0] += 0.01 * (1.0 + np.abs(goff).max())

    def loss_fs(arr: np.ndarray) -> float:
        return float((deform_sample(Tensor5(arr), off, k_pts).data * cot.data).sum())

    def loss_off(arr: np.ndarray) -> float:
        return float((deform_sample(f_s, OffsetField(Tensor5(arr)), k_pts).data
                      * cot.data).sum())

    fd_fs = fd_gradient(loss_fs, f_s.data.copy())
    fd_off = fd_gradient(loss_off, off.values.data.copy())
    efs, cfs = max_relative_error(gfs, fd_fs)
    eoff, coff = max_relative_error(goff, fd_off)
    return [GradCheckResult("deform_sample_backward", "grad_fs", seed, efs, cfs),
            GradCheckResult("deform_sample_backward", "grad_off", seed, eoff, coff)]


def run_suite(seeds: list[int], corrupt: bool = False) -> list[GradCheckResult]:
    results: list[GradCheckResult] = []
    for seed in seeds:
        results.extend(check_cdc3d(seed, corrupt=corrupt))
        results.extend(check_cdc3d(seed + 1000, theta=0.0))
        results.extend(check_deform(seed, k_pts=9, corrupt=corrupt))
        results.extend(check_deform(seed + 2000, k_pts=1))
    return results

"""Micro-benchmark timings for the convolution forms and the sampler."""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass
from typing import Callable

from .align import deform_sample, random_taa_spec
from .cdc3d import ConvSpec3D, cdc3d_forward_fusion, cdc3d_forward_unified, \
    conv3d_plain, random_conv_spec
from .tensor import Shape5, gaussian_init

BENCH_REPS = 11

# (input extents, (c_out, c_in), kernel) cases the bench command reports.
DEFAULT_CASES = (
    (Shape5(1, 8, 5, 64, 64), (8, 8), (3, 3, 3)),
)


@dataclass(frozen=True)
class BenchRow:
    shape: Shape5
    form: str
    theta: float
    ns_per_elem: float
    median_s: float


def median_time(fn: Callable[[], object], reps: int = BENCH_REPS) -> float:
    times = []
    fn()  # warm caches before timing
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def bench_case(shape: Shape5, channels: tuple[int, int], kernel: tuple[int, int, int],
               theta: float, seed: int) -> list[BenchRow]:
    c_out, c_in = channels
    x = gaussian_init(shape, seed, "bench.input")
    spec = random_conv_spec(c_out, c_in, kernel, seed, theta=theta, label="bench.w")
    plain_spec = ConvSpec3D(weights=spec.weights, theta=0.0, stride=spec.stride,
                            padding=spec.padding, dilation=spec.dilation)
    out_elems = shape.n * c_out
    for e in spec.out_extents(shape):
        out_elems *= e

    taa = random_taa_spec(c_in, seed, k_pts=9)
    from .align import predict_trajectory
    offsets, _ = predict_trajectory(x, taa)

    runs = [
        ("plain_conv", lambda: conv3d_plain(x, plain_spec), 0.0),
        ("cdc3d_unified", lambda: cdc3d_forward_unified(x, spec), theta),
        ("cdc3d_fusion", lambda: cdc3d_forward_fusion(x, spec), theta),
        ("deform_sample", lambda: deform_sample(x, offsets, 9), theta),
    ]
    rows = []
    for name, fn, th in runs:
        med = median_time(fn)
        elems = shape.size() if name == "deform_sample" else out_elems
        rows.append(BenchRow(shape=shape, form=name, theta=th,
                             ns_per_elem=med * 1e9 / elems, median_s=med))
    return rows

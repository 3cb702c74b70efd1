"""Dense rank-5 tensors (batch, channel, time, height, width).

All feature maps in this package live in one fixed layout: contiguous
row-major float64 with the batch axis outermost. Keeping a single layout
makes every kernel's index arithmetic auditable; performance-sensitive
paths operate on the wrapped numpy array directly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, NamedTuple

import numpy as np

from . import rng

TENSOR_MAGIC = b"CST5TENS"

# Refuse allocations whose element count cannot be addressed safely.
_CAPACITY_LIMIT = 1 << 48


class ShapeError(ValueError):
    """Operands disagree on extents or an extent is inadmissible."""


class Shape5(NamedTuple):
    n: int
    c: int
    t: int
    h: int
    w: int

    def size(self) -> int:
        return self.n * self.c * self.t * self.h * self.w


@dataclass
class Tensor5:
    """A rank-5 array of float64 in contiguous (N, C, T, H, W) order.

    Read-only use is thread-safe; mutation happens only through explicit
    writes to ``data``. Reductions on the contiguous buffer are
    deterministic for a fixed shape.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim != 5:
            raise ShapeError(f"expected rank 5, got rank {arr.ndim}")
        if arr.dtype != np.float64 or not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr, dtype=np.float64)
        self.data = arr

    @property
    def shape(self) -> Shape5:
        return Shape5(*self.data.shape)

    @property
    def size(self) -> int:
        return self.data.size

    def copy(self) -> "Tensor5":
        return Tensor5(self.data.copy())

    def linear_index(self, coords: tuple[int, int, int, int, int]) -> int:
        """Row-major flat position of a 5-coordinate."""
        for x, ext in zip(coords, self.data.shape):
            if not 0 <= x < ext:
                raise IndexError(f"coordinate {coords} outside extents {self.data.shape}")
        return int(np.ravel_multi_index(coords, self.data.shape))

    def coords_of(self, k: int) -> tuple[int, ...]:
        """Inverse of linear_index."""
        if not 0 <= k < self.size:
            raise IndexError(f"flat index {k} outside buffer of {self.size}")
        return tuple(int(v) for v in np.unravel_index(k, self.data.shape))

    def _binary(self, other, op) -> "Tensor5":
        if isinstance(other, Tensor5):
            if other.data.shape != self.data.shape:
                raise ShapeError(f"extent mismatch {self.data.shape} vs {other.data.shape}")
            return Tensor5(op(self.data, other.data))
        return Tensor5(op(self.data, float(other)))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __radd__ = __add__
    __rmul__ = __mul__

    def sum(self) -> float:
        return float(self.data.sum())

    def min(self) -> float:
        return float(self.data.min())

    def max(self) -> float:
        return float(self.data.max())


def _check_capacity(shape: Shape5) -> None:
    if any(e < 0 for e in shape):
        raise ShapeError(f"negative extent in {shape}")
    if shape.size() > _CAPACITY_LIMIT:
        raise OverflowError(f"{shape} exceeds the {_CAPACITY_LIMIT}-element capacity limit")


def zeros(shape: Shape5) -> Tensor5:
    shape = Shape5(*shape)
    _check_capacity(shape)
    return Tensor5(np.zeros(tuple(shape), dtype=np.float64))


def from_array(arr: np.ndarray) -> Tensor5:
    return Tensor5(np.asarray(arr, dtype=np.float64))


def gaussian_init(shape: Shape5, seed: int, label: str = "gaussian_init") -> Tensor5:
    """i.i.d. standard-normal fill from the named counter stream.

    Identical (shape, seed, label) triples produce bit-identical tensors.
    """
    shape = Shape5(*shape)
    _check_capacity(shape)
    key = rng.stream_key(seed, label)
    flat = rng.standard_normal(key, shape.size())
    return Tensor5(flat.reshape(tuple(shape)))


def _resize_plane_batch(planes: np.ndarray, out_h: int, out_w: int,
                        scale_h: float, scale_w: float) -> np.ndarray:
    """Bilinear resample of (..., H, W) planes onto an out_h x out_w grid.

    Convention: source coordinate = (dst + 0.5) / scale - 0.5, neighbor
    indices clamped to the source rectangle (edge replication), weights
    from the unclamped fractional part.
    """
    h, w = planes.shape[-2], planes.shape[-1]
    sy = (np.arange(out_h, dtype=np.float64) + 0.5) / scale_h - 0.5
    sx = (np.arange(out_w, dtype=np.float64) + 0.5) / scale_w - 0.5
    y0 = np.floor(sy).astype(np.int64)
    x0 = np.floor(sx).astype(np.int64)
    fy = sy - y0
    fx = sx - x0
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)

    top = planes[..., y0c, :]
    bot = planes[..., y1c, :]
    rows = top * (1.0 - fy)[:, None] + bot * fy[:, None]
    left = rows[..., x0c]
    right = rows[..., x1c]
    return left * (1.0 - fx) + right * fx


def round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def resize_bilinear_spatial(x: Tensor5, scale: float) -> Tensor5:
    """Rescale H and W by ``scale``; N, C, T are untouched.

    Output extents are round-half-up(scale * extent). The coordinate map
    uses the requested scale, not the realized extent ratio.
    """
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    n, c, t, h, w = x.shape
    if h < 1 or w < 1:
        raise ShapeError("resize needs H, W >= 1")
    out_h = round_half_up(scale * h)
    out_w = round_half_up(scale * w)
    out = _resize_plane_batch(x.data, out_h, out_w, scale, scale)
    return Tensor5(np.ascontiguousarray(out))


def resize_plane_to(plane: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample of one (H, W) plane to explicit target extents."""
    h, w = plane.shape
    return _resize_plane_batch(plane[None, ...], out_h, out_w,
                               out_h / h, out_w / w)[0]


def write_tensor(dst: str | BinaryIO, x: Tensor5) -> None:
    """Dump format: magic "CST5TENS", five LE u64 extents, LE f64 payload."""
    header = TENSOR_MAGIC + struct.pack("<5Q", *x.data.shape)
    payload = x.data.astype("<f8", copy=False).tobytes()
    if isinstance(dst, (str, bytes)):
        with open(dst, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    else:
        dst.write(header)
        dst.write(payload)


def read_tensor(src: str | BinaryIO) -> Tensor5:
    if isinstance(src, (str, bytes)):
        with open(src, "rb") as fh:
            return read_tensor(fh)
    magic = src.read(8)
    if magic != TENSOR_MAGIC:
        raise ValueError(f"bad tensor magic {magic!r}")
    dims = struct.unpack("<5Q", src.read(40))
    count = int(np.prod(dims, dtype=np.int64)) if all(d > 0 for d in dims) else 0
    raw = src.read(8 * count)
    if len(raw) != 8 * count:
        raise ValueError("truncated tensor payload")
    data = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(dims)
    return Tensor5(data)

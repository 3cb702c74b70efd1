"""Central-difference spatiotemporal convolution.

The operator blends a plain intensity convolution with a central
difference term under a trade-off coefficient theta in [0, 1]:

    y(p0) = theta * sum_n w(p_n) * (x(p0 + p_n) - x(p0))
          + (1 - theta) * sum_n w(p_n) * x(p0 + p_n)
          = Conv3D(x; w) - theta * x(p0) * sum_n w(p_n)

Both algebraic forms are implemented: the fusion form evaluates the two
terms literally in two passes, the unified form runs one convolution and
subtracts the center-weighted correction using precomputed tap sums per
(out-channel, in-channel) pair. They agree to round-off and the unified
form is the cheap one.

Conventions: zero padding; the center tap sits at index floor((k-1)/2)
along each axis, so the central read x(p0) is the padded-input value at
that tap (zero when the tap lands in the pad region).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Shape5, ShapeError, Tensor5, gaussian_init

# Trade-off presets: the default suits ordinary wildlife footage, the
# alternative is tuned for erratic, large-displacement motion.
DEFAULT_THETA = 0.458
THETA_ERRATIC_MOTION = 0.158

Triple = tuple[int, int, int]


@dataclass(frozen=True)
class ConvSpec3D:
    """Weights plus geometry for a 3-D convolution.

    weights are (C_out, C_in, k_t, k_h, k_w) stored as a Tensor5.
    padding defaults to floor(k/2) per axis (extent-preserving for
    stride 1 and odd kernels).
    """

    weights: Tensor5
    theta: float = DEFAULT_THETA
    stride: Triple = (1, 1, 1)
    padding: Triple | None = None
    dilation: Triple = (1, 1, 1)

    def __post_init__(self) -> None:
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if any(s < 1 for s in self.stride) or any(d < 1 for d in self.dilation):
            raise ValueError("stride and dilation must be positive")
        pad = self.padding
        if pad is None:
            pad = tuple(k // 2 for k in self.kernel)
        if any(p < 0 for p in pad):
            raise ValueError("padding must be non-negative")
        object.__setattr__(self, "padding", tuple(pad))

    @property
    def c_out(self) -> int:
        return self.weights.shape.n

    @property
    def c_in(self) -> int:
        return self.weights.shape.c

    @property
    def kernel(self) -> Triple:
        s = self.weights.shape
        return (s.t, s.h, s.w)

    @property
    def center(self) -> Triple:
        """Tap index of the output-anchored center along each axis."""
        return tuple((k - 1) // 2 for k in self.kernel)

    def out_extents(self, x_shape: Shape5) -> Triple:
        outs = []
        for ext, k, s, p, d in zip((x_shape.t, x_shape.h, x_shape.w),
                                   self.kernel, self.stride, self.padding, self.dilation):
            span = ext + 2 * p - d * (k - 1) - 1
            if span < 0:
                raise ShapeError(
                    f"extent {ext} too small for kernel {k} (pad {p}, dilation {d})")
            outs.append(span // s + 1)
        return tuple(outs)

    def tap_sums(self) -> np.ndarray:
        """Kernel-tap sums per (out-channel, in-channel) pair."""
        return self.weights.data.sum(axis=(2, 3, 4))


def random_conv_spec(c_out: int, c_in: int, kernel: Triple, seed: int,
                     theta: float = DEFAULT_THETA, stride: Triple = (1, 1, 1),
                     padding: Triple | None = None, dilation: Triple = (1, 1, 1),
                     scale: float = 1.0, label: str = "conv.weights") -> ConvSpec3D:
    w = gaussian_init(Shape5(c_out, c_in, *kernel), seed, label)
    if scale != 1.0:
        w = w * scale
    return ConvSpec3D(weights=w, theta=theta, stride=stride,
                      padding=padding, dilation=dilation)


def _padded(x: Tensor5, spec: ConvSpec3D) -> np.ndarray:
    n, c, t, h, w = x.shape
    pt, ph, pw = spec.padding
    xp = np.zeros((n, c, t + 2 * pt, h + 2 * ph, w + 2 * pw), dtype=np.float64)
    xp[:, :, pt:pt + t, ph:ph + h, pw:pw + w] = x.data
    return xp


def _tap_slice(xp: np.ndarray, spec: ConvSpec3D, tap: Triple, outs: Triple) -> np.ndarray:
    """Strided (N, C, T_out, H_out, W_out) view of one kernel tap."""
    sl = [slice(None), slice(None)]
    for axis in range(3):
        start = tap[axis] * spec.dilation[axis]
        stop = start + (outs[axis] - 1) * spec.stride[axis] + 1
        sl.append(slice(start, stop, spec.stride[axis]))
    return xp[tuple(sl)]


def _check_input(x: Tensor5, spec: ConvSpec3D) -> Triple:
    if x.shape.c != spec.c_in:
        raise ShapeError(f"input has {x.shape.c} channels, spec expects {spec.c_in}")
    return spec.out_extents(x.shape)


def _taps(spec: ConvSpec3D):
    kt, kh, kw = spec.kernel
    return [(a, b, c) for a in range(kt) for b in range(kh) for c in range(kw)]


def _accumulate(xp, spec, outs, transform=None) -> np.ndarray:
    """Sum of tap contributions in (N, To, Ho, Wo, C_out) layout."""
    n = xp.shape[0]
    acc = np.zeros((n, *outs, spec.c_out), dtype=np.float64)
    w = spec.weights.data
    for tap in _taps(spec):
        sl = _tap_slice(xp, spec, tap, outs)
        if transform is not None:
            sl = transform(sl)
        acc += np.tensordot(sl, w[:, :, tap[0], tap[1], tap[2]], axes=([1], [1]))
    return acc


def _to_nchw(acc: np.ndarray) -> Tensor5:
    return Tensor5(np.ascontiguousarray(np.moveaxis(acc, -1, 1)))


def conv3d_plain(x: Tensor5, spec: ConvSpec3D) -> Tensor5:
    """Standard zero-padded 3-D convolution (theta plays no role)."""
    outs = _check_input(x, spec)
    xp = _padded(x, spec)
    return _to_nchw(_accumulate(xp, spec, outs))


def cdc3d_forward_fusion(x: Tensor5, spec: ConvSpec3D) -> Tensor5:
    """Literal two-pass evaluation: gradient term, then intensity term."""
    outs = _check_input(x, spec)
    xp = _padded(x, spec)
    center = _tap_slice(xp, spec, spec.center, outs)
    grad_term = _accumulate(xp, spec, outs, transform=lambda sl: sl - center)
    vanilla_term = _accumulate(xp, spec, outs)
    return _to_nchw(spec.theta * grad_term + (1.0 - spec.theta) * vanilla_term)


def cdc3d_forward_unified(x: Tensor5, spec: ConvSpec3D) -> Tensor5:
    """One convolution pass plus a center-weighted correction pass."""
    outs = _check_input(x, spec)
    xp = _padded(x, spec)
    acc = _accumulate(xp, spec, outs)
    if spec.theta != 0.0:
        center = _tap_slice(xp, spec, spec.center, outs)
        acc -= spec.theta * np.tensordot(center, spec.tap_sums(), axes=([1], [1]))
    return _to_nchw(acc)


def cdc3d_backward(x: Tensor5, spec: ConvSpec3D,
                   grad_out: Tensor5) -> tuple[Tensor5, Tensor5]:
    """Exact adjoints of the unified form w.r.t. input and weights."""
    outs = _check_input(x, spec)
    n, c, t, h, w = x.shape
    if grad_out.shape != Shape5(n, spec.c_out, *outs):
        raise ShapeError(
            f"grad_out extents {tuple(grad_out.shape)} do not match forward "
            f"output {(n, spec.c_out, *outs)}")

    xp = _padded(x, spec)
    pt, ph, pw = spec.padding
    g = np.moveaxis(grad_out.data, 1, -1)  # (N, To, Ho, Wo, C_out)
    wts = spec.weights.data
    theta = spec.theta

    grad_xp = np.zeros_like(xp)
    grad_w = np.zeros_like(wts)
    center_sl = _tap_slice(xp, spec, spec.center, outs)

    for tap in _taps(spec):
        sl = _tap_slice(xp, spec, tap, outs)
        # d y / d w at this tap: correlate grad_out with the tap slice.
        grad_w[:, :, tap[0], tap[1], tap[2]] = np.tensordot(
            g, sl, axes=([0, 1, 2, 3], [0, 2, 3, 4]))
        # d y / d x through this tap: scatter grad_out against the weights.
        contrib = np.tensordot(g, wts[:, :, tap[0], tap[1], tap[2]], axes=([4], [0]))
        _tap_slice(grad_xp, spec, tap, outs)[...] += np.moveaxis(contrib, -1, 1)

    if theta != 0.0:
        sums = spec.tap_sums()  # (C_out, C_in)
        # Center correction, input side: -theta * sum_o g_o * S_oc at p0.
        corr = np.tensordot(g, sums, axes=([4], [0]))  # (N, To, Ho, Wo, C_in)
        _tap_slice(grad_xp, spec, spec.center, outs)[...] -= \
            theta * np.moveaxis(corr, -1, 1)
        # Weight side: every tap of (o, c) sees -theta * <g_o, x_c(p0)>.
        gc = np.tensordot(g, center_sl, axes=([0, 1, 2, 3], [0, 2, 3, 4]))
        grad_w -= theta * gc[:, :, None, None, None]

    grad_x = grad_xp[:, :, pt:pt + t, ph:ph + h, pw:pw + w]
    return Tensor5(np.ascontiguousarray(grad_x)), Tensor5(grad_w)

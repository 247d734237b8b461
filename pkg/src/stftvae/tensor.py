"""Dense real/complex arrays and the numeric primitives built on them.

Tensors are plain row-major ``numpy.ndarray`` objects. The functions here
add what numpy does not enforce: exact shape agreement (no implicit
broadcasting), a domain check on ``log`` and a 2D convolution pair with
explicit ``same``/``valid`` padding rules.

Convolution layouts follow the channels-first convention. ``conv2d`` takes
a kernel of shape ``(C_out, C_in, k, k)``; ``conv2d_transpose`` takes the
kernel of the convolution it is the adjoint of, so a kernel of shape
``(C_x, C_y, k, k)`` maps ``C_x`` input channels to ``C_y`` output channels.
Both accept a single image ``(C, H, W)`` or a batch ``(N, C, H, W)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DomainError, ShapeError

_DTYPE = np.float64
PADDINGS = ("same", "valid")


def set_default_dtype(dtype):
    """Select float64 (default) or float32 for newly created tensors."""
    global _DTYPE
    dtype = np.dtype(dtype).type
    if dtype not in (np.float32, np.float64):
        raise ValueError(f"unsupported dtype {dtype!r}")
    _DTYPE = dtype


def get_default_dtype():
    return _DTYPE


def asarray(x, dtype=None):
    return np.asarray(x, dtype=dtype or _DTYPE)


@dataclass(frozen=True)
class ComplexTensor:
    """Real and imaginary parts held as two real arrays of one shape."""

    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        if np.shape(self.re) != np.shape(self.im):
            raise ShapeError(f"re/im shapes differ: {np.shape(self.re)} vs {np.shape(self.im)}")

    @property
    def shape(self):
        return np.shape(self.re)

    @classmethod
    def from_complex(cls, z):
        z = np.asarray(z)
        return cls(np.ascontiguousarray(z.real), np.ascontiguousarray(z.imag))

    def to_complex(self):
        return self.re + 1j * self.im


def check_same_shape(*arrays, what="operands"):
    shapes = [np.shape(a) for a in arrays]
    if any(s != shapes[0] for s in shapes[1:]):
        raise ShapeError(f"{what} have mismatched shapes {shapes}")


def _is_scalar(x):
    return np.ndim(x) == 0


def _binary(x, y, fn, name):
    if not (_is_scalar(x) or _is_scalar(y)):
        check_same_shape(x, y, what=f"{name} operands")
    return fn(x, y)


def add(x, y):
    return _binary(x, y, np.add, "add")


def sub(x, y):
    return _binary(x, y, np.subtract, "sub")


def mul(x, y):
    return _binary(x, y, np.multiply, "mul")


def div(x, y):
    return _binary(x, y, np.divide, "div")


def matmul(a, b):
    a, b = np.asarray(a), np.asarray(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2] or a.shape[:-2] != b.shape[:-2]:
        raise ShapeError(f"matmul shapes {a.shape} and {b.shape} are incompatible")
    return a @ b


def tsum(x, axis=None):
    return np.sum(x, axis=axis)


def mean(x, axis=None):
    return np.mean(x, axis=axis)


def exp(x):
    return np.exp(x)


def log(x):
    x = np.asarray(x)
    if np.any(~(x > 0)):
        raise DomainError("log requires strictly positive input")
    return np.log(x)


def sigmoid(x):
    x = np.asarray(x)
    # split by sign so exp never overflows
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def tanh(x):
    return np.tanh(x)


def relu(x):
    return np.maximum(x, 0)


# -- convolution --------------------------------------------------------------


def _padding_1d(size, k, stride, padding):
    """Return (pad_before, pad_after, output_size) along one axis."""
    if padding == "valid":
        if size < k:
            raise ShapeError(f"kernel {k} larger than input {size} with valid padding")
        return 0, 0, (size - k) // stride + 1
    if padding == "same":
        out = -(-size // stride)
        total = max((out - 1) * stride + k - size, 0)
        return total // 2, total - total // 2, out
    raise ValueError(f"padding must be one of {PADDINGS}, got {padding!r}")


def conv_output_size(size, k, stride, padding):
    return _padding_1d(size, k, stride, padding)[2]


def conv_transpose_output_size(size, k, stride, padding):
    if padding == "same":
        return size * stride
    if padding == "valid":
        return (size - 1) * stride + k
    raise ValueError(f"padding must be one of {PADDINGS}, got {padding!r}")


def _batched(x):
    x = np.asarray(x)
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ShapeError(f"expected (C,H,W) or (N,C,H,W) input, got shape {x.shape}")


def _check_kernel(kernel, channels, axis, name):
    kernel = np.asarray(kernel)
    if kernel.ndim != 4 or kernel.shape[2] != kernel.shape[3]:
        raise ShapeError(f"{name} kernel must be (C_out, C_in, k, k), got {kernel.shape}")
    if kernel.shape[axis] != channels:
        raise ShapeError(
            f"{name}: input has {channels} channels but kernel shape {kernel.shape} expects {kernel.shape[axis]}"
        )
    return kernel


def _check_stride(stride):
    if int(stride) != stride or stride < 1:
        raise ValueError(f"stride must be a positive integer, got {stride}")
    return int(stride)


def _windows(xp, k, stride):
    # (N, C, Ho, Wo, k, k) view over a padded batch
    return sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]


def conv2d(x, kernel, stride=1, padding="valid"):
    """Cross-correlate ``x`` with ``kernel`` (deep-learning convention, no flip)."""
    xb, single = _batched(x)
    kernel = _check_kernel(kernel, xb.shape[1], 1, "conv2d")
    stride = _check_stride(stride)
    k = kernel.shape[2]
    pt, pb, ho = _padding_1d(xb.shape[2], k, stride, padding)
    pl, pr, wo = _padding_1d(xb.shape[3], k, stride, padding)
    xp = np.pad(xb, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    win = _windows(xp, k, stride)[:, :, :ho, :wo]
    out = np.tensordot(win, kernel, axes=([1, 4, 5], [1, 2, 3]))  # (N, Ho, Wo, C_out)
    out = np.ascontiguousarray(out.transpose(0, 3, 1, 2))
    return out[0] if single else out


def conv2d_transpose(x, kernel, stride=1, padding="valid", output_size=None):
    """Adjoint of ``conv2d(., kernel, stride, padding)``.

    ``output_size`` selects among the spatial sizes that map back onto the
    input's size; the default is ``H*stride`` for ``same`` and
    ``(H-1)*stride + k`` for ``valid``.
    """
    xb, single = _batched(x)
    kernel = _check_kernel(kernel, xb.shape[1], 0, "conv2d_transpose")
    stride = _check_stride(stride)
    k = kernel.shape[2]
    n, _, h, w = xb.shape
    if output_size is None:
        output_size = (
            conv_transpose_output_size(h, k, stride, padding),
            conv_transpose_output_size(w, k, stride, padding),
        )
    ho, wo = output_size
    pt, pb, hh = _padding_1d(ho, k, stride, padding)
    pl, pr, ww = _padding_1d(wo, k, stride, padding)
    if (hh, ww) != (h, w):
        raise ShapeError(f"output size {output_size} does not map back to input size {(h, w)}")
    cols = np.tensordot(xb, kernel, axes=([1], [0]))  # (N, H, W, C_y, k, k)
    cols = cols.transpose(0, 3, 4, 5, 1, 2)  # (N, C_y, k, k, H, W)
    buf = np.zeros((n, kernel.shape[1], ho + pt + pb, wo + pl + pr), dtype=cols.dtype)
    for i in range(k):
        for j in range(k):
            buf[:, :, i : i + stride * h : stride, j : j + stride * w : stride] += cols[:, :, i, j]
    out = np.ascontiguousarray(buf[:, :, pt : pt + ho, pl : pl + wo])
    return out[0] if single else out


def conv2d_kernel_grad(x, grad_out, k, stride=1, padding="valid"):
    """Gradient of ``<conv2d(x, K), grad_out>`` with respect to ``K``."""
    xb, _ = _batched(x)
    gb, _ = _batched(grad_out)
    stride = _check_stride(stride)
    pt, pb, ho = _padding_1d(xb.shape[2], k, stride, padding)
    pl, pr, wo = _padding_1d(xb.shape[3], k, stride, padding)
    if gb.shape[2:] != (ho, wo) or gb.shape[0] != xb.shape[0]:
        raise ShapeError(f"output gradient shape {gb.shape} does not match convolution output")
    xp = np.pad(xb, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    win = _windows(xp, k, stride)[:, :, :ho, :wo]
    return np.tensordot(gb, win, axes=([0, 2, 3], [0, 2, 3]))  # (C_out, C_in, k, k)

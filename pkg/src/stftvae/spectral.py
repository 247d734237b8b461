"""Fourier machinery for images.

Two transforms with deliberately different scaling live here:

* :func:`dft2` is the global transform with the orthonormal ``1/sqrt(HW)``
  factor.
* :func:`stft` slides an ``h x h`` Hann window over the image on a
  ``stride`` grid (top-left anchors, no padding) and takes the
  *unnormalized* DFT of every windowed patch, giving an array of shape
  ``(K, L, h, h)`` with ``K = (M - h) // stride + 1`` and
  ``L = (N - h) // stride + 1``.

The direct transforms multiply by cosine/sine DFT matrices, which makes
them linear ops on the autodiff tape. :func:`fft2_pow2` is an independent
radix-2 path for power-of-two sizes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, ShapeError
from .tensor import ComplexTensor


@lru_cache(maxsize=None)
def dft_matrices(n):
    """Cosine and sine parts of the n-point DFT matrix, ``exp(-2j*pi*jk/n) = C - iS``."""
    jk = np.outer(np.arange(n), np.arange(n)) % n
    theta = 2 * np.pi * jk / n
    c, s = np.cos(theta), np.sin(theta)
    # exact zeros at half/quarter turns: self-conjugate bins of real input then
    # get an imaginary part of exactly 0 and a stable phase of 0 or pi
    s[(2 * jk) % n == 0] = 0.0
    c[((4 * jk) % n == 0) & ((2 * jk) % n != 0)] = 0.0
    c.flags.writeable = False
    s.flags.writeable = False
    return c, s


def _dft_parts(x, scale=1.0):
    """Real and imaginary parts of the 2D DFT over the last two axes (tape-aware)."""
    h, w = ad.value(x).shape[-2:]
    ch, sh = dft_matrices(h)
    cw, sw = dft_matrices(w)
    if scale != 1.0:
        ch, sh = ch * scale, sh * scale
    re = ad.sandwich(ch, x, cw) - ad.sandwich(sh, x, sw)
    im = -(ad.sandwich(ch, x, sw) + ad.sandwich(sh, x, cw))
    return re, im


def dft2_parts(image):
    """Differentiable orthonormal 2D DFT; returns ``(re, im)``."""
    h, w = ad.value(image).shape[-2:]
    return _dft_parts(image, 1.0 / np.sqrt(h * w))


def dft2(image):
    """Orthonormal 2D DFT of the last two axes, returned as a ComplexTensor."""
    image = np.asarray(image, dtype=float)
    if image.ndim < 2 or min(image.shape[-2:]) < 1:
        raise ShapeError(f"dft2 needs an (..., H, W) array, got shape {image.shape}")
    return ComplexTensor(*dft2_parts(image))


def idft2(spectrum):
    """Inverse of :func:`dft2` (orthonormal); returns a ComplexTensor."""
    z = spectrum.to_complex() if isinstance(spectrum, ComplexTensor) else np.asarray(spectrum)
    h, w = z.shape[-2:]
    ch, sh = dft_matrices(h)
    cw, sw = dft_matrices(w)
    eh, ew = ch + 1j * sh, cw + 1j * sw
    return ComplexTensor.from_complex(eh @ z @ ew.T / np.sqrt(h * w))


# -- windows and configuration ------------------------------------------------


@dataclass(frozen=True)
class HannWindow:
    side: int
    values: np.ndarray


def hann(side):
    """Separable periodic Hann window ``1/4 (1 - cos 2pi x/L)(1 - cos 2pi y/L)``."""
    if int(side) != side or side < 2:
        raise ConfigError(f"Hann window side must be an integer >= 2, got {side}")
    side = int(side)
    w1 = 0.5 * (1 - np.cos(2 * np.pi * np.arange(side) / side))
    return HannWindow(side, np.outer(w1, w1))


@dataclass(frozen=True)
class StftConfig:
    window: int = 16
    stride: int = 4

    def __post_init__(self):
        if self.window < 2:
            raise ConfigError(f"window side must be >= 2, got {self.window}")
        if not 1 <= self.stride <= self.window:
            raise ConfigError(f"stride must satisfy 1 <= stride <= window, got {self.stride}")

    def output_shape(self, m, n):
        if self.window > min(m, n):
            raise ShapeError(f"{self.window}x{self.window} window does not fit a {m}x{n} image")
        return (m - self.window) // self.stride + 1, (n - self.window) // self.stride + 1


@dataclass(frozen=True)
class StftTensor:
    """Per-window spectra of shape ``(..., K, L, h, h)``."""

    re: np.ndarray
    im: np.ndarray
    source_shape: tuple
    config: StftConfig

    @property
    def shape(self):
        return self.re.shape

    @property
    def spectra(self):
        return ComplexTensor(self.re, self.im)

    @property
    def amplitude(self):
        return amplitude(self.spectra)

    @property
    def phase(self):
        return phase(self.spectra)


def extract_patches(x, window, stride):
    """``(..., M, N) -> (..., K, L, window, window)`` patches at top-left anchors (tape-aware)."""
    a = ad.value(x)
    m, n = a.shape[-2:]
    k = (m - window) // stride + 1
    l = (n - window) // stride + 1
    view = np.lib.stride_tricks.sliding_window_view(a, (window, window), axis=(-2, -1))
    out = np.ascontiguousarray(view[..., ::stride, ::stride, :, :][..., :k, :l, :, :])

    def vjp(g):
        full = np.zeros_like(a)
        for i in range(k):
            for j in range(l):
                full[..., i * stride : i * stride + window, j * stride : j * stride + window] += g[..., i, j, :, :]
        return (full,)

    return ad._record("patches", out, (x,), vjp)


def stft_parts(image, cfg):
    """Differentiable STFT; returns ``(re, im)`` each of shape ``(..., K, L, h, h)``."""
    m, n = ad.value(image).shape[-2:]
    cfg.output_shape(m, n)
    patches = extract_patches(image, cfg.window, cfg.stride)
    win = ad.broadcast_const(hann(cfg.window).values, ad.value(patches).shape)
    return _dft_parts(ad.mul(patches, win))


def stft(image, cfg=None, method="direct"):
    """Sliding-window Hann STFT of ``(..., M, N)`` images.

    ``method="fft"`` uses :func:`fft2_pow2` per window (power-of-two
    windows only); the default multiplies by DFT matrices.
    """
    cfg = cfg or StftConfig()
    image = np.asarray(image, dtype=float)
    if image.ndim < 2:
        raise ShapeError(f"stft needs an (..., M, N) array, got shape {image.shape}")
    m, n = image.shape[-2:]
    cfg.output_shape(m, n)
    if method == "direct":
        re, im = stft_parts(image, cfg)
    elif method == "fft":
        patches = extract_patches(image, cfg.window, cfg.stride) * hann(cfg.window).values
        spec = fft2_pow2(patches)
        re, im = spec.re, spec.im
    else:
        raise ValueError(f"unknown method {method!r}")
    return StftTensor(re, im, (m, n), cfg)


# -- amplitude, phase, weights ------------------------------------------------


def amplitude(spectrum):
    return np.sqrt(spectrum.re**2 + spectrum.im**2)


def phase(spectrum):
    """Angle in (-pi, pi]; zero bins map to 0."""
    return ad.atan2(spectrum.im, spectrum.re)


def signed_frequencies(n):
    """Bin indices mapped to signed frequencies in [-n/2, n/2)."""
    k = np.arange(n)
    return np.where(k < n - n // 2, k, k - n)


@dataclass(frozen=True)
class FrequencyWeights:
    grid: np.ndarray
    w_min: float


def frequency_weights(side, w_min=0.1):
    """Linear ramp in wrapped radial frequency from ``w_min`` at DC to 1 at the Nyquist corner."""
    if not 0 <= w_min <= 1:
        raise ConfigError(f"w_min must lie in [0, 1], got {w_min}")
    f = signed_frequencies(side)
    r = np.hypot(f[:, None], f[None, :])
    r_max = r.max()
    grid = np.full_like(r, 1.0) if r_max == 0 else w_min + (1 - w_min) * r / r_max
    return FrequencyWeights(grid, float(w_min))


def radial_frequency(h, w):
    fh, fw = signed_frequencies(h), signed_frequencies(w)
    return np.hypot(fh[:, None], fw[None, :])


# -- radix-2 FFT --------------------------------------------------------------


def _is_pow2(n):
    return n >= 1 and n & (n - 1) == 0


def _fft_last_axis(z):
    n = z.shape[-1]
    bits = n.bit_length() - 1
    rev = np.array([int(format(i, f"0{bits}b")[::-1], 2) if bits else 0 for i in range(n)])
    z = z[..., rev]
    size = 2
    while size <= n:
        half = size // 2
        tw = np.exp(-2j * np.pi * np.arange(half) / size)
        z = z.reshape(z.shape[:-1] + (n // size, size))
        even = z[..., :half]
        odd = z[..., half:] * tw
        z = np.concatenate([even + odd, even - odd], axis=-1).reshape(z.shape[:-2] + (n,))
        size *= 2
    return z


def fft2_pow2(image, ortho=False):
    """Iterative Cooley-Tukey 2D FFT over the last two axes (both powers of two).

    Unnormalized by default, matching the STFT's scaling; ``ortho=True``
    applies ``1/sqrt(HW)`` to match :func:`dft2`.
    """
    z = np.asarray(image, dtype=complex)
    h, w = z.shape[-2:]
    if not (_is_pow2(h) and _is_pow2(w)):
        raise ShapeError(f"fft2_pow2 needs power-of-two sides, got {h}x{w}")
    z = _fft_last_axis(z)
    z = np.swapaxes(_fft_last_axis(np.swapaxes(z, -1, -2)), -1, -2)
    if ortho:
        z = z / np.sqrt(h * w)
    return ComplexTensor.from_complex(z)

"""Reconstruction objectives, image-quality metrics and the VAE loss.

All functions take images shaped ``(H, W)`` or ``(..., H, W)``; batch
dimensions are averaged. Inputs may be numpy arrays or autodiff
Variables. With arrays the result is a plain number.

Reductions: the frequency loss *sums* over windows and frequency bins of
each image. The pixel losses *average* over pixels. Both are then
averaged over the batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import autodiff as ad
from . import spectral
from .errors import ConfigError, DomainError, ShapeError
from .spectral import StftConfig

PIXEL_LOSSES = ("l1", "l2", "sigmoid_ce", "ssim")
SPECTRA = ("stft", "dft")


@dataclass(frozen=True)
class LossConfig:
    """Objective hyperparameters.

    ``lambda_phase``, ``lambda_freq`` and ``beta`` defaults are choices of
    this package. ``lambda_freq`` brings the summed spectral loss to the
    order of DSSIM on 28x28 digits; :func:`calibrate_lambda_freq`
    recomputes it.
    """

    lambda_phase: float = 2.0
    lambda_freq: float = 1e-4
    beta: float = 1.0
    stft: StftConfig = field(default_factory=StftConfig)
    w_min: float = 0.1
    pixel_loss: str = "ssim"
    spectrum: str = "stft"
    wrap_phase: bool = False
    ssim_window: int = 7
    ssim_sigma: float = 1.5
    data_range: float = 1.0

    def __post_init__(self):
        if not self.lambda_phase > 1:
            raise ConfigError(f"lambda_phase must be > 1, got {self.lambda_phase}")
        if self.lambda_freq < 0 or self.beta < 0:
            raise ConfigError("lambda_freq and beta must be non-negative")
        if not 0 <= self.w_min <= 1:
            raise ConfigError(f"w_min must lie in [0, 1], got {self.w_min}")
        if self.pixel_loss not in PIXEL_LOSSES:
            raise ConfigError(f"pixel_loss must be one of {PIXEL_LOSSES}, got {self.pixel_loss!r}")
        if self.spectrum not in SPECTRA:
            raise ConfigError(f"spectrum must be one of {SPECTRA}, got {self.spectrum!r}")
        if self.ssim_window < 1 or self.ssim_window % 2 == 0:
            raise ConfigError(f"ssim_window must be odd and positive, got {self.ssim_window}")
        if self.data_range <= 0:
            raise ConfigError(f"data_range must be positive, got {self.data_range}")

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass
class LatentDistribution:
    """Diagonal Gaussian posterior; arrays or Variables of shape ``(..., latent_dim)``."""

    mu: object
    log_var: object

    def __post_init__(self):
        if ad.value(self.mu).shape != ad.value(self.log_var).shape:
            raise ShapeError("mu and log_var must share a shape")

    @property
    def sigma(self):
        return np.exp(0.5 * ad.value(self.log_var))


def _check_images(x, y, name):
    sx, sy = ad.value(x).shape, ad.value(y).shape
    if sx != sy:
        raise ShapeError(f"{name}: image shapes differ, {sx} vs {sy}")
    if len(sx) < 2:
        raise ShapeError(f"{name}: expected (..., H, W) images, got shape {sx}")


def _batch_mean(per_image):
    return per_image if ad.value(per_image).ndim == 0 else ad.mean(per_image)


# -- frequency loss -----------------------------------------------------------


def _weights(shape, cfg):
    h, w = shape[-2:]
    if cfg.spectrum == "stft":
        grid = spectral.frequency_weights(cfg.stft.window, cfg.w_min).grid
    else:
        r = spectral.radial_frequency(h, w)
        grid = cfg.w_min + (1 - cfg.w_min) * r / r.max() if r.max() > 0 else np.ones_like(r)
    return grid


def _spectrum_parts(x, cfg):
    if cfg.spectrum == "stft":
        return spectral.stft_parts(x, cfg.stft)
    return spectral.dft2_parts(x)


def freq_loss_terms(s_i, s_o, cfg=None):
    """Weighted phase and amplitude discrepancies ``(sum |dP| W, sum |dA| W)``.

    The phase term is reported without the ``lambda_phase`` factor.
    """
    cfg = cfg or LossConfig()
    _check_images(s_i, s_o, "freq_loss")
    re_i, im_i = _spectrum_parts(s_i, cfg)
    re_o, im_o = _spectrum_parts(s_o, cfg)
    d_phase = ad.atan2(im_o, re_o) - ad.atan2(im_i, re_i)
    if cfg.wrap_phase:
        d_phase = ad.wrap_angle(d_phase)
    d_amp = ad.hypot(re_o, im_o) - ad.hypot(re_i, im_i)
    shape = ad.value(d_amp).shape
    w = ad.broadcast_const(_weights(ad.value(s_i).shape, cfg), shape)
    axes = tuple(range(-4 if cfg.spectrum == "stft" else -2, 0))
    phase_term = _batch_mean(ad.tsum(ad.absolute(d_phase) * w, axis=axes))
    amp_term = _batch_mean(ad.tsum(ad.absolute(d_amp) * w, axis=axes))
    return phase_term, amp_term


def freq_loss(s_i, s_o, cfg=None):
    """``sum_j (lambda |P_o - P_i| + |A_o - A_i|) W_j`` over all windows and bins."""
    cfg = cfg or LossConfig()
    phase_term, amp_term = freq_loss_terms(s_i, s_o, cfg)
    return phase_term * cfg.lambda_phase + amp_term


# -- SSIM / PSNR ---------------------------------------------------------------


@lru_cache(maxsize=None)
def _gaussian_filter_matrix(n, size, sigma):
    """Matrix form of a 1-D Gaussian filter with reflect padding on a length-n signal."""
    half = size // 2
    if n <= half:
        raise ShapeError(f"SSIM window {size} is too large for an image side of {n}")
    t = np.arange(size) - half
    g = np.exp(-(t**2) / (2 * sigma**2))
    g /= g.sum()
    pad = np.pad(np.eye(n), ((half, half), (0, 0)), mode="reflect")  # (n + 2h, n)
    band = np.zeros((n, n + 2 * half))
    for i in range(n):
        band[i, i : i + size] = g
    m = band @ pad
    m.flags.writeable = False
    return m


def _filter(x, cfg):
    h, w = ad.value(x).shape[-2:]
    return ad.sandwich(
        _gaussian_filter_matrix(h, cfg.ssim_window, cfg.ssim_sigma),
        x,
        _gaussian_filter_matrix(w, cfg.ssim_window, cfg.ssim_sigma),
    )


def ssim_map(x, y, cfg=None):
    cfg = cfg or LossConfig()
    _check_images(x, y, "ssim")
    c1 = (0.01 * cfg.data_range) ** 2
    c2 = (0.03 * cfg.data_range) ** 2
    mu_x, mu_y = _filter(x, cfg), _filter(y, cfg)
    mu_xx, mu_yy, mu_xy = ad.square(mu_x), ad.square(mu_y), mu_x * mu_y
    s_xx = _filter(ad.square(x), cfg) - mu_xx
    s_yy = _filter(ad.square(y), cfg) - mu_yy
    s_xy = _filter(x * y, cfg) - mu_xy
    num = (mu_xy * 2.0 + c1) * (s_xy * 2.0 + c2)
    den = (mu_xx + mu_yy + c1) * (s_xx + s_yy + c2)
    return num / den


def ssim(x, y, cfg=None, per_image=False):
    """Mean structural similarity (Gaussian window, reflect padding) in [-1, 1]."""
    per = ad.mean(ssim_map(x, y, cfg), axis=(-2, -1))
    return per if per_image else _batch_mean(per)


def dssim(x, y, cfg=None):
    """``1 - ssim``: zero for identical images."""
    return 1.0 - ssim(x, y, cfg)


def psnr(x, y, data_range=1.0, per_image=False):
    """Peak signal-to-noise ratio in dB, ``math.inf`` for identical images.

    For a batch, returns the mean of the per-image values.
    """
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    _check_images(x, y, "psnr")
    mse = np.mean((x - y) ** 2, axis=(-2, -1))
    with np.errstate(divide="ignore"):
        per = np.where(mse == 0, math.inf, 10 * np.log10(data_range**2 / np.where(mse == 0, 1.0, mse)))
    if per_image:
        return per
    return float(np.mean(per))


# -- pixel losses -------------------------------------------------------------


def l1(x, y):
    _check_images(x, y, "l1")
    return ad.mean(ad.absolute(x - y))


def l2(x, y):
    _check_images(x, y, "l2")
    return ad.mean(ad.square(x - y))


def sigmoid_ce(logits, targets):
    """Mean binary cross-entropy of ``sigmoid(logits)`` against ``targets``."""
    _check_images(logits, targets, "sigmoid_ce")
    t = ad.value(targets)
    if np.any((t < 0) | (t > 1)):
        raise DomainError("sigmoid_ce targets must lie in [0, 1]")
    return ad.mean(ad.sigmoid_cross_entropy(logits, targets))


def kl_divergence(q):
    """``KL(N(mu, sigma^2) || N(0, I))`` summed over latent dims, averaged over the batch."""
    per = ad.tsum(1.0 + q.log_var - ad.square(q.mu) - ad.exp(q.log_var), axis=-1) * -0.5
    return _batch_mean(per)


# -- composite objectives -----------------------------------------------------


def loss_terms(s_i, s_o, q=None, cfg=None, logits=None):
    """Every component of the objective, keyed by name, plus ``"total"``.

    ``s_o`` is the decoded image in [0, 1]; ``logits`` is only consumed by
    the sigmoid cross-entropy pixel loss.
    """
    cfg = cfg or LossConfig()
    _check_images(s_i, s_o, "loss")
    terms = {}
    if cfg.pixel_loss == "ssim":
        terms["pixel"] = dssim(s_i, s_o, cfg)
    elif cfg.pixel_loss == "l1":
        terms["pixel"] = l1(s_i, s_o)
    elif cfg.pixel_loss == "l2":
        terms["pixel"] = l2(s_i, s_o)
    else:
        if logits is None:
            raise ConfigError("sigmoid_ce pixel loss needs decoder logits")
        terms["pixel"] = sigmoid_ce(logits, s_i)
    recons = terms["pixel"]
    if cfg.lambda_freq > 0:
        phase_term, amp_term = freq_loss_terms(s_i, s_o, cfg)
        terms["freq_phase"] = phase_term
        terms["freq_amplitude"] = amp_term
        recons = recons + (phase_term * cfg.lambda_phase + amp_term) * cfg.lambda_freq
    terms["recons"] = recons
    total = recons
    if q is not None:
        terms["kl"] = kl_divergence(q)
        if cfg.beta > 0:
            total = total + terms["kl"] * cfg.beta
    terms["total"] = total
    return terms


def recons_loss(s_i, s_o, cfg=None, logits=None):
    """``lambda_freq * freq_loss + pixel term`` (DSSIM by default)."""
    return loss_terms(s_i, s_o, None, cfg, logits)["recons"]


def total_loss(s_i, s_o, q, cfg=None, logits=None):
    """``beta * KL + recons_loss``."""
    return loss_terms(s_i, s_o, q, cfg, logits)["total"]


def calibrate_lambda_freq(images, reconstructions, cfg=None):
    """``lambda_freq`` that equalizes mean DSSIM and mean weighted spectral loss."""
    cfg = cfg or LossConfig()
    d = dssim(images, reconstructions, cfg)
    f = freq_loss(images, reconstructions, cfg)
    if f <= 0:
        raise DomainError("spectral loss is zero; calibration is undefined")
    return float(d / f)

"""Naive reference implementations, written straight from the defining sums.

Deliberately slow and loop-based so they share no code path with the package.
"""

import math

import numpy as np


def naive_dft2(f, normalize=True):
    """Direct double sum per frequency bin, exponentials evaluated from scratch."""
    h, w = f.shape
    y, x = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    out = np.zeros((h, w), dtype=complex)
    for u in range(h):
        for v in range(w):
            out[u, v] = np.sum(f * np.exp(-2j * math.pi * (u * y / h + v * x / w)))
    return out / math.sqrt(h * w) if normalize else out


def naive_hann(side):
    return np.array(
        [[0.25 * (1 - math.cos(2 * math.pi * x / side)) * (1 - math.cos(2 * math.pi * y / side)) for y in range(side)] for x in range(side)]
    )


def naive_stft(image, window, stride):
    m, n = image.shape
    k = (m - window) // stride + 1
    l = (n - window) // stride + 1
    hw = naive_hann(window)
    out = np.zeros((k, l, window, window), dtype=complex)
    for a in range(k):
        for b in range(l):
            patch = image[a * stride : a * stride + window, b * stride : b * stride + window] * hw
            out[a, b] = naive_dft2(patch, normalize=False)
    # bins equal to their own conjugate mirror are real for real input
    for u in range(window):
        for v in range(window):
            if (2 * u) % window == 0 and (2 * v) % window == 0:
                out[:, :, u, v] = out[:, :, u, v].real
    return out


def naive_weights(side, w_min):
    def signed(k):
        return k if k < side - side // 2 else k - side

    r = np.array([[math.hypot(signed(u), signed(v)) for v in range(side)] for u in range(side)])
    return w_min + (1 - w_min) * r / r.max()


def naive_freq_loss(x, y, window, stride, lam, w_min):
    """sum over windows and bins of (lam*|dP| + |dA|) * W, for one image pair."""
    fx, fy = naive_stft(x, window, stride), naive_stft(y, window, stride)
    w = naive_weights(window, w_min)
    total = 0.0
    k, l = fx.shape[:2]
    for a in range(k):
        for b in range(l):
            for u in range(window):
                for v in range(window):
                    zx, zy = fx[a, b, u, v], fy[a, b, u, v]
                    dp = abs(_angle(zx) - _angle(zy))
                    da = abs(abs(zx) - abs(zy))
                    total += (lam * dp + da) * w[u, v]
    return total


def _angle(z):
    if z == 0:
        return 0.0
    a = math.atan2(z.imag, z.real)
    return math.pi if a <= -math.pi else a


def naive_kl(mu, log_var):
    return -0.5 * sum(1 + lv - m * m - math.exp(lv) for m, lv in zip(mu, log_var))


def smooth_central_difference(f, x0, h=1e-5, min_h=1e-8):
    """Central difference of scalar ``f`` at ``x0`` that steps around jumps and kinks.

    The raw phase difference jumps by 2*pi when a spectral bin crosses the
    atan2 branch cut, and ReLU or abs kinks bend the loss. A stencil that
    straddles either gives a difference that moves when the step shrinks, so
    ``h`` is reduced until the estimates at ``h`` and ``h/10`` agree (or
    ``min_h`` is reached). Returns the estimate at the larger of the two
    steps, which carries less rounding error, and that step.
    """

    def central(step):
        fp, fm = f(x0 + step), f(x0 - step)
        # rounding in fp - fm, amplified by 1/step
        noise = 10 * np.finfo(float).eps * max(abs(fp), abs(fm)) / step
        return (fp - fm) / (2 * step), noise

    coarse, _ = central(h)
    while True:
        fine, noise = central(h / 10)
        # on smooth stretches the two differ only by truncation and rounding
        if abs(coarse - fine) <= 1e-5 * max(abs(fine), 1e-3) + noise or h / 10 <= min_h:
            return coarse, h
        coarse, h = fine, h / 10


def network_fd_errors(loss_of_params, params, grads, rng, per_tensor=4, h=1e-5):
    """Relative |analytic - central difference| at a few random coordinates of each tensor.

    Returns (max relative error, number of coordinates checked, number of
    coordinates where the step had to shrink past a jump or kink).
    """
    worst, count, refined = 0.0, 0, 0
    for name, value in params.items():
        flat_idx = rng.choice(value.size, size=min(per_tensor, value.size), replace=False)
        for fi in flat_idx:
            idx = np.unravel_index(fi, value.shape)
            orig = value[idx]

            def f(t, value=value, idx=idx):
                value[idx] = t
                try:
                    return loss_of_params(params)
                finally:
                    value[idx] = orig

            numeric, used = smooth_central_difference(f, orig, h)
            refined += used < h
            analytic = grads[name][idx]
            worst = max(worst, abs(analytic - numeric) / max(1e-8, abs(numeric)))
            count += 1
    return worst, count, refined

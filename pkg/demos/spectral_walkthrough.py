"""
Windowed spectra of a digit
===========================

Cut a digit into overlapping Hann-weighted windows, look at the
amplitude and phase of each window, and see how the weighted
frequency loss reacts to a blur.
"""

import numpy as np
from scipy import ndimage

from stftvae import data, losses, spectral

digit = data.load_mnist_sample("test").images[0]

# 16x16 windows every 4 pixels on a 28x28 image -> a 4x4 grid of windows
spec = spectral.stft(digit, spectral.StftConfig(16, 4))
print("stft shape", spec.shape)

# the window tapers to zero at its border
w = spectral.hann(16).values
print("hann corners", w[0, 0], "centre", w[8, 8])

# most of the energy sits at low frequencies
amp = spec.amplitude
print("mean DC amplitude  ", amp[..., 0, 0].mean().round(3))
print("mean Nyquist amplitude", amp[..., 8, 8].mean().round(3))

# high frequencies get more weight, from 0.1 at DC up to 1 at the corner
weights = spectral.frequency_weights(16).grid
print("weights at DC, (0,4), (8,8):", weights[0, 0], weights[0, 4].round(3), weights[8, 8])

# blurring removes high-frequency amplitude, so the loss grows with sigma
for sigma in (0.5, 1.0, 2.0):
    blurred = ndimage.gaussian_filter(digit, sigma, mode="reflect")
    phase_term, amp_term = losses.freq_loss_terms(digit, blurred)
    print(f"sigma {sigma}: phase term {phase_term:8.1f}  amplitude term {amp_term:7.2f}")

# the whole-image transform is orthonormal, so energy is preserved
g = spectral.dft2(digit)
print("energy image / spectrum:", np.sum(digit**2).round(6), np.sum(g.re**2 + g.im**2).round(6))

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from oracles import naive_dft2, naive_hann, naive_stft, naive_weights
from stftvae import autodiff as ad
from stftvae import spectral as S
from stftvae.errors import ConfigError, ShapeError
from stftvae.tensor import ComplexTensor


def test_dft2_impulse():
    f = np.zeros((2, 2))
    f[0, 0] = 1.0
    z = S.dft2(f)
    np.testing.assert_allclose(z.re, 0.5, atol=1e-15)
    np.testing.assert_allclose(z.im, 0.0, atol=1e-15)


def test_dft2_constant():
    z = S.dft2(np.full((2, 2), 3.0))
    expected = np.zeros((2, 2))
    expected[0, 0] = 6.0
    np.testing.assert_allclose(z.re, expected, atol=1e-14)
    np.testing.assert_allclose(z.im, 0.0, atol=1e-14)


@pytest.mark.parametrize("shape", [(8, 8), (5, 7), (1, 4)])
def test_dft2_matches_oracle(rng, shape):
    f = rng.standard_normal(shape)
    z = S.dft2(f).to_complex()
    assert np.abs(z - naive_dft2(f)).max() < 1e-10


def test_idft2_inverts(rng):
    f = rng.standard_normal((6, 9))
    np.testing.assert_allclose(S.idft2(S.dft2(f)).re, f, atol=1e-12)
    np.testing.assert_allclose(S.idft2(S.dft2(f)).im, 0.0, atol=1e-12)


def test_parseval(rng):
    f = rng.standard_normal((3, 12, 10))
    z = S.dft2(f)
    assert abs(np.sum(f**2) - np.sum(z.re**2 + z.im**2)) < 1e-9


def test_hann_values():
    w = S.hann(16).values
    assert w[8, 8] == pytest.approx(1.0, abs=1e-15)
    assert w[4, 4] == pytest.approx(0.25, abs=1e-15)
    assert not w[0].any() and not w[:, 0].any()
    assert w.max() <= 1.0
    np.testing.assert_allclose(w, naive_hann(16), atol=1e-15)


@pytest.mark.parametrize("side", [0, 1, 2.5])
def test_hann_invalid(side):
    with pytest.raises(ConfigError):
        S.hann(side)


def test_stft_shape_28_window16_stride4():
    assert S.stft(np.zeros((28, 28)), S.StftConfig(16, 4)).shape == (4, 4, 16, 16)


def test_stft_zero_image():
    st_ = S.stft(np.zeros((20, 20)), S.StftConfig(8, 4))
    assert not st_.re.any() and not st_.im.any()


def test_stft_matches_oracle(rng):
    img = rng.random((20, 20))
    got = S.stft(img, S.StftConfig(8, 4)).spectra.to_complex()
    assert np.abs(got - naive_stft(img, 8, 4)).max() < 1e-10


def test_stft_window_too_large():
    with pytest.raises(ShapeError):
        S.stft(np.zeros((10, 12)), S.StftConfig(11, 1))


@pytest.mark.parametrize("window, stride", [(4, 0), (4, 5), (1, 1)])
def test_stft_config_invalid(window, stride):
    with pytest.raises(ConfigError):
        S.StftConfig(window, stride)


@settings(max_examples=60, deadline=None)
@given(m=st.integers(2, 30), n=st.integers(2, 30), window=st.integers(2, 16), stride=st.integers(1, 16))
def test_shape_law(m, n, window, stride):
    if stride > window or window > min(m, n):
        return
    out = S.stft(np.zeros((m, n)), S.StftConfig(window, stride))
    assert out.shape == ((m - window) // stride + 1, (n - window) // stride + 1, window, window)


def test_stft_batch_matches_single(rng):
    imgs = rng.random((3, 16, 18))
    batch = S.stft(imgs, S.StftConfig(8, 3))
    for i in range(3):
        single = S.stft(imgs[i], S.StftConfig(8, 3))
        np.testing.assert_array_equal(batch.re[i], single.re)


def test_stft_linearity(rng):
    x = rng.random((16, 16))
    a = S.stft(x)
    b = S.stft(-2.5 * x)
    np.testing.assert_allclose(b.re, -2.5 * a.re, atol=1e-12)
    np.testing.assert_allclose(b.im, -2.5 * a.im, atol=1e-12)


def test_stft_fft_method_matches_direct(rng):
    x = rng.random((28, 28))
    a = S.stft(x, method="direct")
    b = S.stft(x, method="fft")
    np.testing.assert_allclose(b.re, a.re, atol=1e-10)
    np.testing.assert_allclose(b.im, a.im, atol=1e-10)


def test_amplitude_and_phase_examples():
    z = ComplexTensor(np.array([3.0, 0.0, 0.0, 1.0, -1.0]), np.array([4.0, 0.0, 1.0, 0.0, 0.0]))
    np.testing.assert_array_equal(S.amplitude(z), [5.0, 0.0, 1.0, 1.0, 1.0])
    np.testing.assert_allclose(S.phase(z), [math.atan2(4, 3), 0.0, math.pi / 2, 0.0, math.pi])
    # negative zero imaginary part stays on the principal branch
    assert S.phase(ComplexTensor(np.array([-1.0]), np.array([-0.0])))[0] == math.pi


def test_amplitude_phase_reconstruct(rng):
    st_ = S.stft(rng.random((24, 24)), S.StftConfig(8, 4))
    a, p = st_.amplitude, st_.phase
    np.testing.assert_allclose(a**2, st_.re**2 + st_.im**2, rtol=1e-14, atol=1e-300)
    assert np.all(a >= 0)
    assert np.all((p > -math.pi) & (p <= math.pi))
    mask = a > 1e-12
    assert np.abs(a * np.cos(p) - st_.re)[mask].max() < 1e-10
    assert np.abs(a * np.sin(p) - st_.im)[mask].max() < 1e-10
    z = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    np.testing.assert_allclose(S.amplitude(ComplexTensor.from_complex(z)), np.abs(z), rtol=1e-15)


def test_self_conjugate_bins_are_real(rng):
    st_ = S.stft(rng.random((28, 28)))
    for u in (0, 8):
        for v in (0, 8):
            assert not st_.im[..., u, v].any()


def test_frequency_weights():
    w = S.frequency_weights(16, 0.1).grid
    assert w[0, 0] == pytest.approx(0.1)
    assert w[8, 8] == pytest.approx(1.0)
    assert w.max() == pytest.approx(1.0) and w.min() == pytest.approx(0.1)
    np.testing.assert_allclose(w, naive_weights(16, 0.1), atol=1e-15)
    # hand evaluated: r=1, r_max=sqrt(8)
    assert S.frequency_weights(4, 0.0).grid[1, 0] == pytest.approx(0.35355339059327373, abs=1e-12)


def test_frequency_weights_monotone_in_radius():
    r = S.radial_frequency(16, 16).ravel()
    w = S.frequency_weights(16, 0.3).grid.ravel()
    order = np.argsort(r, kind="stable")
    assert np.all(np.diff(w[order]) >= -1e-15)


def test_frequency_weights_invalid():
    with pytest.raises(ConfigError):
        S.frequency_weights(8, 1.5)


def test_fft_matches_dft(rng):
    x = rng.standard_normal((16, 16))
    got = S.fft2_pow2(x, ortho=True).to_complex()
    assert np.abs(got - S.dft2(x).to_complex()).max() < 1e-10


def test_fft_impulse_flat():
    x = np.zeros((8, 8))
    x[0, 0] = 1.0
    np.testing.assert_allclose(S.fft2_pow2(x).to_complex(), np.ones((8, 8)), atol=1e-15)


def test_fft_linearity(rng):
    x, y = rng.standard_normal((2, 8, 16))
    lhs = S.fft2_pow2(2 * x - 3 * y).to_complex()
    rhs = 2 * S.fft2_pow2(x).to_complex() - 3 * S.fft2_pow2(y).to_complex()
    assert np.abs(lhs - rhs).max() < 1e-10


def test_fft_rejects_non_pow2():
    with pytest.raises(ShapeError):
        S.fft2_pow2(np.zeros((12, 16)))


def test_stft_gradient(rng):
    cfg = S.StftConfig(8, 4)
    w1, w2 = rng.standard_normal((2, 2, 2, 8, 8))

    def f(x):
        re, im = S.stft_parts(x, cfg)
        return ad.add(ad.tsum(ad.mul(re, w1)), ad.tsum(ad.mul(im, w2)))

    assert ad.finite_diff_check(f, rng.random((12, 12))) < 1e-6


def test_blur_reduces_weighted_amplitude(gray_corpus):
    w = S.frequency_weights(16, 0.1).grid
    for img in gray_corpus:
        orig = np.sum(S.stft(img).amplitude * w)
        blur = np.sum(S.stft(ndimage.gaussian_filter(img, 1.0, mode="reflect")).amplitude * w)
        assert blur < orig

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atmosim.imgcore import fft_convolve, fft_convolve_adjoint, gaussian_kernel, gaussian_kernel_dsigma
from oracles import direct_convolve, dot_test


def _rand_kernel(rng, ksz):
    k = rng.uniform(0.1, 1.0, (ksz, ksz))
    return k / k.sum()


class TestGaussianKernel:
    def test_sigma_zero_is_delta(self):
        assert np.array_equal(gaussian_kernel(0.0), np.array([[1.0]]))

    def test_unit_sum_and_odd(self):
        for sigma in (0.3, 0.8, 1.5, 2.0, 4.0):
            k = gaussian_kernel(sigma)
            assert k.shape[0] % 2 == 1
            assert k.shape[0] == 2 * int(np.ceil(4 * sigma)) + 1
            assert abs(k.sum() - 1.0) < 1e-12
            assert np.all(k >= 0)

    def test_second_moment_matches_sigma(self):
        # truncation at 4 sigma keeps the discrete variance within 1% of sigma^2
        for sigma in (1.0, 2.0, 3.0):
            k = gaussian_kernel(sigma)
            r = k.shape[0] // 2
            idx = np.arange(-r, r + 1, dtype=float)
            var = np.sum(idx[:, None] ** 2 * k)
            assert abs(var - sigma**2) / sigma**2 < 0.01

    def test_dsigma_matches_finite_difference(self):
        sigma, radius, h = 1.3, 8, 1e-6
        fd = (gaussian_kernel(sigma + h, radius) - gaussian_kernel(sigma - h, radius)) / (2 * h)
        an = gaussian_kernel_dsigma(sigma, radius)
        assert np.max(np.abs(an - fd)) < 1e-7

    def test_rejects_bad_sigma(self):
        with pytest.raises(ValueError):
            gaussian_kernel(-1.0)
        with pytest.raises(ValueError):
            gaussian_kernel(float("nan"))


class TestFftConvolve:
    def test_impulse_reproduces_kernel(self):
        # delta at the center with zero boundary embeds the kernel at the center
        rng = np.random.default_rng(0)
        x = np.zeros((17, 17))
        x[8, 8] = 1.0
        k = _rand_kernel(rng, 5)
        out = fft_convolve(x, k, boundary="zero")
        assert np.max(np.abs(out[6:11, 6:11] - k)) < 1e-12
        out[6:11, 6:11] = 0.0
        assert np.max(np.abs(out)) < 1e-12

    @pytest.mark.parametrize("boundary", ["reflect", "wrap", "zero"])
    def test_matches_direct_loop(self, boundary):
        rng = np.random.default_rng(1)
        x = rng.uniform(0, 1, (16, 13))
        k = _rand_kernel(rng, 5)
        fast = fft_convolve(x, k, boundary=boundary)
        slow = direct_convolve(x, k, boundary=boundary)
        assert np.max(np.abs(fast - slow)) < 1e-10

    def test_constant_image_fixed_point_reflect_wrap(self):
        x = np.full((12, 12), 0.37)
        k = gaussian_kernel(1.2)
        for boundary in ("reflect", "wrap"):
            out = fft_convolve(x, k, boundary=boundary)
            assert np.max(np.abs(out - 0.37)) < 1e-12

    def test_mass_preserved_wrap(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(0, 1, (24, 24))
        k = _rand_kernel(rng, 7)
        out = fft_convolve(x, k, boundary="wrap")
        assert abs(out.sum() - x.sum()) < 1e-9 * x.sum()

    def test_channels_processed_independently(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(0, 1, (10, 11, 3))
        k = _rand_kernel(rng, 3)
        out = fft_convolve(x, k, boundary="reflect")
        for c in range(3):
            assert np.allclose(out[:, :, c], fft_convolve(x[:, :, c], k), atol=1e-14)

    def test_rejects_even_and_oversize_kernels(self):
        x = np.zeros((8, 8))
        with pytest.raises(ValueError):
            fft_convolve(x, np.ones((4, 4)) / 16)
        with pytest.raises(ValueError):
            fft_convolve(x, np.ones((9, 9)) / 81)
        bad = np.ones((3, 3))
        bad[0, 0] = np.nan
        with pytest.raises(ValueError):
            fft_convolve(x, bad)

    @pytest.mark.parametrize("boundary", ["reflect", "wrap", "zero"])
    def test_adjoint_dot_product(self, boundary):
        rng = np.random.default_rng(4)
        k = _rand_kernel(rng, 5)
        defect = dot_test(
            lambda u: fft_convolve(u, k, boundary=boundary),
            lambda v: fft_convolve_adjoint(v, k, boundary=boundary),
            (14, 11),
            (14, 11),
            rng,
        )
        assert defect < 1e-12

    @settings(max_examples=25, deadline=None)
    @given(
        sigma=st.floats(min_value=0.2, max_value=2.0),
        seed=st.integers(min_value=0, max_value=10_000),
    )
    def test_unit_sum_kernel_is_max_norm_nonexpansive(self, sigma, seed):
        rng = np.random.default_rng(seed)
        x1 = rng.uniform(0, 1, (12, 12))
        x2 = rng.uniform(0, 1, (12, 12))
        k = gaussian_kernel(sigma)
        if k.shape[0] > 12:
            return
        d_out = np.max(np.abs(fft_convolve(x1, k) - fft_convolve(x2, k)))
        d_in = np.max(np.abs(x1 - x2))
        assert d_out <= d_in * (1 + 1e-12)

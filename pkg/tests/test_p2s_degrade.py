import json

import numpy as np
import pytest

from atmosim.imgcore import RngStream, fft_convolve
from atmosim.imgcore.warp import grid_weights, warp
from atmosim.ladder import deserialize_handle
from atmosim.p2s import BasisSet, BetaField, P2SHandle, learn_basis, p2s_degrade, p2s_vjp

from test_p2s_basis import unit_sum_kernels


def small_basis(ksize=7, n_components=5, seed=21):
    samples = unit_sum_kernels(80, ksize=ksize, seed=seed)
    return learn_basis(samples, n_components)


def random_setup(n=32, grid=(2, 3), n_components=5, seed=6, with_flow=False):
    rng = RngStream(seed, 50)
    basis = small_basis(n_components=n_components)
    x = rng.child(0).uniform(size=(n, n))
    beta = rng.child(1).standard_normal((*grid, n_components)) * 0.1
    if with_flow:
        flow = rng.child(2).standard_normal((n, n, 2)) * 0.4
    else:
        flow = np.zeros((n, n, 2))
    rows = np.linspace(0.0, n - 1.0, grid[0])
    cols = np.linspace(0.0, n - 1.0, grid[1])
    field = BetaField(rows, cols, beta, flow)
    return x, field, basis


def brute_force_degrade(x, field, basis):
    """Per-pixel kernel reconstruction + gather convolution (zero padding)."""
    xw = warp(x, field.flow)
    h, w = xw.shape
    wr = grid_weights(field.anchor_rows, h)
    wc = grid_weights(field.anchor_cols, w)
    beta_maps = np.einsum("hr,wc,rcl->hwl", wr, wc, field.beta)
    kernels = basis.mean_kernel[None, None] + np.einsum(
        "hwl,luv->hwuv", beta_maps, basis.components
    )
    r = basis.ksize // 2
    pad = np.pad(xw, r)
    windows = np.lib.stride_tricks.sliding_window_view(pad, (basis.ksize, basis.ksize))
    return np.einsum("hwuv,hwuv->hw", kernels, windows[:, :, ::-1, ::-1])


class TestBetaField:
    def test_validation(self):
        flow = np.zeros((8, 8, 2))
        with pytest.raises(ValueError, match="increasing"):
            BetaField(np.array([5.0, 2.0]), np.array([0.0, 7.0]), np.zeros((2, 2, 3)), flow)
        with pytest.raises(ValueError, match="shape"):
            BetaField(np.array([0.0, 7.0]), np.array([0.0, 7.0]), np.zeros((3, 2, 3)), flow)
        with pytest.raises(ValueError, match="finite"):
            BetaField(np.array([0.0, 7.0]), np.array([0.0, 7.0]),
                      np.full((2, 2, 3), np.nan), flow)

    def test_json_roundtrip_lossless(self):
        rng = RngStream(4, 51)
        beta = rng.standard_normal((2, 2, 4)) * 0.123456789
        flow = rng.standard_normal((6, 6, 2)) * 0.7
        field = BetaField(np.array([0.0, 5.0]), np.array([0.0, 5.0]), beta, flow)
        doc = json.loads(json.dumps(field.to_json()))
        back = BetaField.from_json(doc)
        assert np.array_equal(back.beta, field.beta)
        assert np.array_equal(back.flow, field.flow)
        assert np.array_equal(back.anchor_rows, field.anchor_rows)


class TestDegrade:
    def test_zero_beta_zero_flow_is_mean_blur(self):
        x, field, basis = random_setup()
        zero_field = BetaField(field.anchor_rows, field.anchor_cols,
                               np.zeros_like(field.beta), field.flow)
        y = p2s_degrade(x, zero_field, basis)
        assert np.array_equal(y, fft_convolve(x, basis.mean_kernel, boundary="zero"))

    def test_one_hot_beta_with_zero_mean_is_component_convolution(self):
        x, _, basis = random_setup()
        zero_mean = BasisSet(basis.components, np.zeros_like(basis.mean_kernel),
                             basis.variance_ratios)
        n = x.shape[0]
        for ell in (0, 3):
            beta = np.zeros((1, 1, basis.n_components))
            beta[0, 0, ell] = 1.0
            field = BetaField(np.array([(n - 1) / 2.0]), np.array([(n - 1) / 2.0]),
                              beta, np.zeros((n, n, 2)))
            y = p2s_degrade(x, field, zero_mean)
            want = fft_convolve(x, basis.components[ell], boundary="zero")
            assert np.abs(y - want).max() <= 1e-10

    def test_matches_brute_force_per_pixel_oracle(self):
        x, field, basis = random_setup(n=64, grid=(3, 3), seed=9)
        y = p2s_degrade(x, field, basis)
        assert np.abs(y - brute_force_degrade(x, field, basis)).max() <= 1e-8

    def test_matches_brute_force_with_flow(self):
        x, field, basis = random_setup(n=64, grid=(2, 4), seed=10, with_flow=True)
        y = p2s_degrade(x, field, basis)
        assert np.abs(y - brute_force_degrade(x, field, basis)).max() <= 1e-8

    def test_linear_in_image(self):
        x, field, basis = random_setup(seed=12, with_flow=True)
        x2 = RngStream(13, 52).uniform(size=x.shape)
        lhs = p2s_degrade(2.5 * x - 1.25 * x2, field, basis)
        rhs = 2.5 * p2s_degrade(x, field, basis) - 1.25 * p2s_degrade(x2, field, basis)
        assert np.abs(lhs - rhs).max() <= 1e-9

    def test_linear_in_beta(self):
        x, field, basis = random_setup(seed=14)
        other = RngStream(15, 53).standard_normal(field.beta.shape) * 0.1

        def at(beta):
            return p2s_degrade(
                x, BetaField(field.anchor_rows, field.anchor_cols, beta, field.flow), basis
            )

        base = at(np.zeros_like(field.beta))
        lhs = at(1.5 * field.beta + 0.75 * other)
        rhs = base + 1.5 * (at(field.beta) - base) + 0.75 * (at(other) - base)
        assert np.abs(lhs - rhs).max() <= 1e-9

    def test_multichannel(self):
        x, field, basis = random_setup(seed=16)
        x3 = np.stack([x, 0.5 * x, x**2], axis=-1)
        y3 = p2s_degrade(x3, field, basis)
        assert y3.shape == x3.shape
        assert np.allclose(y3[:, :, 0], p2s_degrade(x, field, basis), atol=1e-12)

    def test_shape_mismatch_rejected(self):
        x, field, basis = random_setup()
        with pytest.raises(ValueError, match="flow"):
            p2s_degrade(np.ones((16, 16)), field, basis)
        wrong = small_basis(n_components=3, seed=5)
        with pytest.raises(ValueError, match="components"):
            p2s_degrade(x, field, wrong)


class TestVjp:
    def test_zero_cotangent_gives_zeros(self):
        x, field, basis = random_setup(seed=17, with_flow=True)
        xbar, betabar = p2s_vjp(x, field, basis, np.zeros_like(x))
        assert np.all(xbar == 0.0)
        assert np.all(betabar == 0.0)

    def test_dot_product_identity(self):
        x, field, basis = random_setup(seed=18, with_flow=True)
        rng = RngStream(19, 54)
        for trial in range(5):
            dx = rng.child(trial * 3).standard_normal(x.shape)
            dbeta = rng.child(trial * 3 + 1).standard_normal(field.beta.shape)
            ybar = rng.child(trial * 3 + 2).standard_normal(x.shape)

            jx = p2s_degrade(dx, field, basis)  # image Jacobian action
            shifted = BetaField(field.anchor_rows, field.anchor_cols,
                                field.beta + dbeta, field.flow)
            jbeta = p2s_degrade(x, shifted, basis) - p2s_degrade(x, field, basis)
            lhs = np.sum(ybar * (jx + jbeta))

            xbar, betabar = p2s_vjp(x, field, basis, ybar)
            rhs = np.sum(xbar * dx) + np.sum(betabar * dbeta)
            assert abs(lhs - rhs) <= 1e-9 * max(abs(lhs), 1.0)

    def test_directional_derivative_matches_central_difference(self):
        x, field, basis = random_setup(seed=20, with_flow=True)
        rng = RngStream(21, 55)
        ybar = rng.child(999).standard_normal(x.shape)
        xbar, betabar = p2s_vjp(x, field, basis, ybar)
        eps = 1e-5
        for trial in range(50):
            dx = rng.child(2 * trial).standard_normal(x.shape)
            dbeta = rng.child(2 * trial + 1).standard_normal(field.beta.shape)

            def value(t):
                f = BetaField(field.anchor_rows, field.anchor_cols,
                              field.beta + t * dbeta, field.flow)
                return np.sum(ybar * p2s_degrade(x + t * dx, f, basis))

            fd = (value(eps) - value(-eps)) / (2 * eps)
            analytic = np.sum(xbar * dx) + np.sum(betabar * dbeta)
            assert abs(fd - analytic) <= 1e-5 * max(abs(analytic), 1.0)

    def test_multichannel_cotangent(self):
        x, field, basis = random_setup(seed=22)
        x3 = np.stack([x, x**2, 1.0 - x], axis=-1)
        ybar = RngStream(23, 56).standard_normal(x3.shape)
        xbar, betabar = p2s_vjp(x3, field, basis, ybar)
        assert xbar.shape == x3.shape
        lhs = np.sum(ybar * p2s_degrade(x3, field, basis))
        # linearity in x makes <ybar, H x> = <xbar, x> an exact adjoint check
        assert lhs == pytest.approx(np.sum(xbar * x3), rel=1e-10)


class TestHandle:
    def make(self, seed=24):
        x, field, basis = random_setup(seed=seed, with_flow=True)
        return x, P2SHandle(basis, field)

    def test_serialization_roundtrip_bitwise(self):
        x, handle = self.make()
        doc = json.loads(json.dumps(handle.serialize()))
        again = deserialize_handle(doc)
        assert again.family == "p2s"
        assert np.array_equal(again.degrade(x), handle.degrade(x))

    def test_theta_roundtrip_and_vjp(self):
        x, handle = self.make(seed=25)
        vec = handle.theta_vector()
        assert vec.size == handle.field.beta.size
        moved = handle.with_theta(vec * 1.5)
        assert np.array_equal(moved.theta_vector(), vec * 1.5)
        ybar = RngStream(26, 57).standard_normal(x.shape)
        _, betabar = p2s_vjp(x, handle.field, handle.basis, ybar)
        assert np.array_equal(handle.vjp_theta(x, ybar), betabar.ravel())

    def test_capabilities_and_counts(self):
        x, handle = self.make(seed=27)
        assert handle.differentiable and handle.supports_theta_vjp
        assert handle.param_count() == handle.field.beta.size + handle.field.flow.size
        counts = handle.structure_counts(x.shape)
        assert counts["shift_invariant_convolutions"] == handle.basis.n_components + 1

    def test_shape_mismatch_rejected(self):
        _, handle = self.make(seed=28)
        with pytest.raises(ValueError, match="shape"):
            handle.degrade(np.ones((8, 8)))

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atmosim.imgcore import (
    downsample_grid_adjoint,
    grid_weights,
    upsample_grid,
    warp,
    warp_vjp,
)
from oracles import direct_warp


class TestWarp:
    def test_zero_flow_identity_exact(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(0, 1, (9, 13))
        out = warp(x, np.zeros((9, 13, 2)))
        assert np.array_equal(out, x)

    def test_half_pixel_shift_on_ramp(self):
        # ramp x[i, j] = j, constant flow (0, 0.5): interior samples at j - 0.5
        h, w = 8, 10
        x = np.tile(np.arange(w, dtype=float), (h, 1))
        flow = np.zeros((h, w, 2))
        flow[:, :, 1] = 0.5
        out = warp(x, flow)
        expect = np.maximum(np.arange(w) - 0.5, 0.0)  # column 0 clamps to the edge
        assert np.max(np.abs(out - expect[None, :])) < 1e-12

    def test_matches_direct_loop(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(0, 1, (14, 11))
        flow = rng.uniform(-3, 3, (14, 11, 2))
        assert np.max(np.abs(warp(x, flow) - direct_warp(x, flow))) < 1e-12

    def test_constant_image_fixed_point(self):
        rng = np.random.default_rng(2)
        x = np.full((10, 10), 0.61)
        flow = rng.uniform(-4, 4, (10, 10, 2))
        assert np.max(np.abs(warp(x, flow) - 0.61)) < 1e-12

    def test_output_within_input_envelope(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(0, 1, (12, 12))
        flow = rng.uniform(-5, 5, (12, 12, 2))
        out = warp(x, flow)
        assert out.min() >= x.min() - 1e-12 and out.max() <= x.max() + 1e-12

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            warp(np.zeros((8, 8)), np.zeros((7, 8, 2)))
        with pytest.raises(ValueError):
            warp(np.zeros((8, 8)), np.zeros((8, 8, 3)))

    def test_vjp_x_dot_product(self):
        rng = np.random.default_rng(4)
        flow = rng.uniform(-2, 2, (10, 9, 2))
        x = rng.uniform(0, 1, (10, 9))
        worst = 0.0
        for _ in range(5):
            u = rng.standard_normal((10, 9))
            v = rng.standard_normal((10, 9))
            lhs = float(np.vdot(warp(u, flow), v))
            xbar, _ = warp_vjp(x, flow, v)
            # warp is linear in x, so the x-adjoint at any basepoint applies
            rhs = float(np.vdot(u, warp_vjp(u * 0 + u, flow, v)[0]))
            assert xbar.shape == x.shape
            worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1e-30))
        assert worst < 1e-12

    def test_vjp_flow_matches_finite_difference(self):
        # keep sample coordinates strictly inside bilinear cells so the
        # central difference never crosses a lattice kink
        rng = np.random.default_rng(5)
        x = rng.uniform(0, 1, (12, 12))
        flow = 1.0 + 0.6 * rng.uniform(-0.5, 0.5, (12, 12, 2))
        gbar = rng.standard_normal((12, 12))
        _, flowbar = warp_vjp(x, flow, gbar)
        for _ in range(5):
            d = rng.standard_normal(flow.shape)
            d /= np.max(np.abs(d))
            h = 1e-6
            fd = (np.vdot(warp(x, flow + h * d), gbar) - np.vdot(warp(x, flow - h * d), gbar)) / (2 * h)
            an = float(np.vdot(flowbar, d))
            assert abs(fd - an) / max(abs(fd), 1e-12) < 1e-6


class TestGridInterp:
    def test_weights_partition_of_unity(self):
        w = grid_weights(np.array([2.0, 5.0, 11.0]), 16)
        assert np.allclose(w.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(w >= 0)

    def test_clamped_extrapolation(self):
        w = grid_weights(np.array([4.0, 8.0]), 16)
        assert np.allclose(w[:5, 0], 1.0)  # positions 0..4 clamp to first anchor
        assert np.allclose(w[8:, 1], 1.0)

    def test_exact_at_anchors_and_linear_between(self):
        anchors = np.array([0.0, 6.0])
        vals = np.array([[1.0], [4.0]]).reshape(2, 1)
        out = upsample_grid(vals, anchors, np.array([0.0]), (7, 1))
        assert np.allclose(out[:, 0], 1.0 + 0.5 * np.arange(7))

    def test_upsample_downsample_adjoint(self):
        rng = np.random.default_rng(6)
        ar = np.array([1.0, 5.0, 10.0])
        ac = np.array([0.0, 11.0])
        u = rng.standard_normal((3, 2))
        v = rng.standard_normal((12, 12))
        lhs = float(np.vdot(upsample_grid(u, ar, ac, (12, 12)), v))
        rhs = float(np.vdot(u, downsample_grid_adjoint(v, ar, ac)))
        assert abs(lhs - rhs) < 1e-12 * max(abs(lhs), 1.0)

    def test_rejects_unsorted_anchors(self):
        with pytest.raises(ValueError):
            grid_weights(np.array([5.0, 2.0]), 8)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=9999))
    def test_warp_nonexpansive_in_max_norm(self, seed):
        rng = np.random.default_rng(seed)
        x1 = rng.uniform(0, 1, (8, 8))
        x2 = rng.uniform(0, 1, (8, 8))
        flow = rng.uniform(-3, 3, (8, 8, 2))
        d_out = np.max(np.abs(warp(x1, flow) - warp(x2, flow)))
        assert d_out <= np.max(np.abs(x1 - x2)) * (1 + 1e-12)

import json

import numpy as np
import pytest

from atmosim.imgcore import PSFField, RngStream, fft_convolve, gaussian_kernel, grid_weights, warp
from atmosim.ladder import (
    DeformState,
    JitterState,
    blur_shared,
    deform_degrade,
    flipped_degrade,
    jitter_degrade,
    sample_deform_state,
    state_from_json,
    state_to_json,
    varying_degrade,
)
from atmosim.oracle import anchor_grid


def rand_image(n=48, seed=5, stream=3):
    return RngStream(seed, stream).uniform(size=(n, n))


def gaussian_field(shape, grid_shape, sigmas, ksize=9):
    """PSF field whose anchor kernels are Gaussians of the given widths."""
    rows, cols = anchor_grid(shape, grid_shape[0], grid_shape[1])
    sigmas = np.broadcast_to(np.asarray(sigmas, dtype=np.float64), (rows.size, cols.size))
    kerns = np.zeros((rows.size, cols.size, ksize, ksize))
    for i in range(rows.size):
        for j in range(cols.size):
            kerns[i, j] = gaussian_kernel(sigmas[i, j], ksize // 2)
    return PSFField(rows, cols, kerns)


def delta_field(shape, grid_shape, ksize):
    rows, cols = anchor_grid(shape, grid_shape[0], grid_shape[1])
    kerns = np.zeros((rows.size, cols.size, ksize, ksize))
    kerns[:, :, ksize // 2, ksize // 2] = 1.0
    return PSFField(rows, cols, kerns)


class TestStates:
    def test_jitter_state_rejects_bad_scales(self):
        with pytest.raises(ValueError):
            JitterState(-0.1, 0.0)
        with pytest.raises(ValueError):
            JitterState(0.0, np.nan)

    def test_deform_state_rejects_degenerate_grids(self):
        with pytest.raises(ValueError, match="at least 2"):
            DeformState(np.array([0.0]), np.array([0.0, 8.0]), np.zeros((1, 2, 2)), 0.0)
        with pytest.raises(ValueError, match="increasing"):
            DeformState(np.array([8.0, 0.0]), np.array([0.0, 8.0]), np.zeros((2, 2, 2)), 0.0)
        with pytest.raises(ValueError, match="shape"):
            DeformState(np.array([0.0, 8.0]), np.array([0.0, 8.0]), np.zeros((2, 3, 2)), 0.0)
        with pytest.raises(ValueError, match="finite"):
            DeformState(np.array([0.0, 8.0]), np.array([0.0, 8.0]), np.full((2, 2, 2), np.inf), 0.0)

    def test_json_round_trip_is_lossless(self):
        states = [
            JitterState(1.5000000000000002, 0.30000000000000004),
            sample_deform_state((64, 64), (3, 4), 1.7, 0.9, RngStream(11, 0)),
        ]
        for state in states:
            doc = json.loads(json.dumps(state_to_json(state)))
            back = state_from_json(doc)
            if isinstance(state, JitterState):
                assert back == state
            else:
                assert np.array_equal(back.anchor_rows, state.anchor_rows)
                assert np.array_equal(back.anchor_cols, state.anchor_cols)
                assert np.array_equal(back.displacements, state.displacements)
                assert back.sigma_blur == state.sigma_blur

    def test_unknown_family_rejected(self):
        with pytest.raises(ValueError, match="family"):
            state_from_json({"family": "fog"})


class TestJitter:
    def test_zero_state_is_identity(self):
        x = rand_image()
        y, flow = jitter_degrade(x, JitterState(0.0, 0.0), RngStream(1, 0))
        assert np.array_equal(y, x)
        assert not flow.any()

    def test_zero_jitter_collapses_to_shared_blur(self):
        x = rand_image()
        y, flow = jitter_degrade(x, JitterState(0.0, 2.0), RngStream(1, 0))
        assert not flow.any()
        assert np.array_equal(y, fft_convolve(x, gaussian_kernel(2.0), "zero"))

    def test_flow_std_matches_sigma(self):
        # 128 x 128 x 2 = 32768 draws, so a 5% window is ~13 sigma wide
        x = rand_image(128)
        _, flow = jitter_degrade(x, JitterState(1.5, 0.0), RngStream(7, 1))
        assert 1.425 <= flow.std() <= 1.575

    def test_replay_and_stream_separation(self):
        x = rand_image()
        y1, f1 = jitter_degrade(x, JitterState(1.0, 0.5), RngStream(9, 4))
        y2, f2 = jitter_degrade(x, JitterState(1.0, 0.5), RngStream(9, 4))
        y3, _ = jitter_degrade(x, JitterState(1.0, 0.5), RngStream(9, 5))
        assert np.array_equal(y1, y2) and np.array_equal(f1, f2)
        assert not np.array_equal(y1, y3)


class TestDeform:
    def test_zero_displacements_blur_only(self):
        x = rand_image()
        state = DeformState(np.array([0.0, 47.0]), np.array([0.0, 47.0]), np.zeros((2, 2, 2)), 1.0)
        y, flow = deform_degrade(x, state)
        assert not flow.any()
        assert np.array_equal(y, fft_convolve(x, gaussian_kernel(1.0), "zero"))

    def test_uniform_displacement_gives_constant_flow(self):
        x = rand_image()
        disp = np.zeros((2, 2, 2))
        disp[:, :, 0] = 1.0
        state = DeformState(np.array([0.0, 47.0]), np.array([0.0, 47.0]), disp, 0.0)
        _, flow = deform_degrade(x, state)
        assert np.allclose(flow[:, :, 0], 1.0, atol=1e-12)
        assert np.allclose(flow[:, :, 1], 0.0, atol=1e-12)

    def test_flow_interpolates_anchor_displacements_exactly(self):
        x = rand_image(64)
        rows = np.array([0.0, 13.0, 40.0, 63.0])
        cols = np.array([2.0, 31.0, 63.0])
        disp = RngStream(3, 8).normal(scale=1.5, size=(4, 3, 2))
        state = DeformState(rows, cols, disp, 0.0)
        _, flow = deform_degrade(x, state)
        node_flow = flow[rows.astype(int)[:, None], cols.astype(int)[None, :]]
        assert np.array_equal(node_flow, disp)

    def test_anchors_outside_image_rejected(self):
        x = rand_image(32)
        state = DeformState(np.array([0.0, 47.0]), np.array([0.0, 31.0]), np.zeros((2, 2, 2)), 0.0)
        with pytest.raises(ValueError, match="anchor rows"):
            deform_degrade(x, state)

    def test_deterministic(self):
        x = rand_image()
        state = sample_deform_state(x.shape, (3, 3), 1.2, 0.7, RngStream(2, 2))
        y1, f1 = deform_degrade(x, state)
        y2, f2 = deform_degrade(x, state)
        assert np.array_equal(y1, y2) and np.array_equal(f1, f2)


class TestVarying:
    def test_point_mass_field_and_zero_flow_is_identity(self):
        x = rand_image()
        field = delta_field(x.shape, (2, 2), 1)
        y = varying_degrade(x, field, np.zeros(x.shape + (2,)))
        assert np.array_equal(y, x)

    def test_centered_delta_kernels_identity_to_roundoff(self):
        x = rand_image()
        field = delta_field(x.shape, (3, 3), 9)
        y = varying_degrade(x, field, np.zeros(x.shape + (2,)))
        assert np.allclose(y, x, atol=1e-12)

    def test_constant_field_matches_shift_invariant_convolution(self):
        x = rand_image()
        field = gaussian_field(x.shape, (2, 2), 1.2, ksize=11)
        y = varying_degrade(x, field, np.zeros(x.shape + (2,)))
        ref = fft_convolve(x, gaussian_kernel(1.2, 5), "zero")
        assert np.allclose(y, ref, atol=1e-12)

    def test_gather_mode_matches_per_pixel_loop(self):
        from atmosim.imgcore import sv_convolve

        x = rand_image(32, seed=21)
        field = gaussian_field(x.shape, (2, 3), [[0.5, 1.0, 1.5], [2.0, 0.8, 1.1]], ksize=7)
        got = sv_convolve(x, field, "gather")

        wr = grid_weights(field.anchor_rows, 32)
        wc = grid_weights(field.anchor_cols, 32)
        r = field.ksize // 2
        want = np.zeros_like(x)
        for i in range(32):
            for j in range(32):
                kern = np.einsum("a,b,abuv->uv", wr[i], wc[j], field.kernels)
                acc = 0.0
                for u in range(-r, r + 1):
                    for v in range(-r, r + 1):
                        si, sj = i - u, j - v
                        if 0 <= si < 32 and 0 <= sj < 32:
                            acc += kern[u + r, v + r] * x[si, sj]
                want[i, j] = acc
        assert np.allclose(got, want, atol=1e-10)


class TestFlipped:
    def test_zero_flow_orders_coincide_exactly(self):
        x = rand_image()
        field = gaussian_field(x.shape, (3, 3), [[0.5, 1.0, 1.5], [1.0, 0.7, 1.2], [0.9, 1.4, 0.6]])
        zero = np.zeros(x.shape + (2,))
        assert np.array_equal(flipped_degrade(x, field, zero), varying_degrade(x, field, zero))

    def test_shift_invariant_configuration_commutes(self):
        # zero border keeps both compositions away from boundary effects,
        # which is the regime where the two operator orders commute
        n = 64
        x = np.zeros((n, n))
        x[20:44, 20:44] = RngStream(31, 0).uniform(size=(24, 24))
        field = gaussian_field(x.shape, (2, 2), 1.0, ksize=9)
        flow = np.full((n, n, 2), [1.3, -0.8])
        fl = flipped_degrade(x, field, flow)
        va = varying_degrade(x, field, flow)
        assert np.max(np.abs(fl - va)) < 1e-8

    def test_difference_concentrates_at_step_edge(self):
        n, ksize = 96, 9
        x = np.zeros((n, n))
        x[:, n // 2 :] = 1.0
        sig = 0.6 + 0.25 * np.arange(9.0).reshape(3, 3)
        field = gaussian_field((n, n), (3, 3), sig, ksize=ksize)
        rr, cc = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        flow = np.stack(
            [
                1.2 * np.sin(2 * np.pi * rr / n) * np.cos(2 * np.pi * cc / n),
                -0.9 * np.cos(2 * np.pi * rr / n + 1.0) * np.sin(2 * np.pi * cc / n + 0.5),
            ],
            axis=-1,
        )
        fl = flipped_degrade(x, field, flow, boundary="reflect")
        va = varying_degrade(x, field, flow, boundary="reflect")
        diff = np.abs(fl - va)
        assert diff.sum() > 1e-6
        band = np.abs(cc - n // 2) <= 2 * ksize
        assert diff[band].sum() >= 0.8 * diff.sum()


class TestSharedBlur:
    def test_blur_preserves_mass_interior(self):
        x = np.zeros((33, 33))
        x[16, 16] = 1.0
        y = blur_shared(x, 1.5)
        assert y.sum() == pytest.approx(1.0, abs=1e-12)
        assert y.min() >= -1e-15

    def test_zero_sigma_returns_copy(self):
        x = rand_image(16)
        y = blur_shared(x, 0.0)
        assert np.array_equal(y, x)
        assert y is not x

import numpy as np
import pytest

from atmosim.imgcore.rng import RngStream
from atmosim.oracle.screens import (
    PSD_COEFF,
    STRUCTURE_COEFF,
    _cell_correction,
    estimate_structure_function,
    kolmogorov_screen,
    phase_psd,
    theoretical_structure_function,
)


def test_psd_matches_formula():
    f = np.array([0.5, 1.0, 4.0])
    got = phase_psd(f, 2.0)
    want = PSD_COEFF * 2.0 ** (-5.0 / 3.0) * f ** (-11.0 / 3.0)
    assert np.allclose(got, want, rtol=1e-12)
    assert phase_psd(np.array([0.0]), 2.0)[0] == 0.0


def test_structure_function_closed_form():
    assert theoretical_structure_function(np.array([3.0]), 3.0)[0] == pytest.approx(STRUCTURE_COEFF)
    d = theoretical_structure_function(np.array([1.0, 2.0]), 1.0)
    assert d[1] / d[0] == pytest.approx(2.0 ** (5.0 / 3.0))


def test_cell_corrections_sane():
    assert _cell_correction(1, 0) == _cell_correction(0, 1)
    assert _cell_correction(-1, 0) == _cell_correction(1, 0)
    assert _cell_correction(1, 0) > _cell_correction(2, 0) > 1.0
    assert _cell_correction(9, 2) == 1.0


def test_screen_shape_piston_and_replay():
    a = kolmogorov_screen(64, 0.5, 4.0, RngStream(11, 2))
    b = kolmogorov_screen(64, 0.5, 4.0, RngStream(11, 2))
    c = kolmogorov_screen(64, 0.5, 4.0, RngStream(11, 3))
    assert a.shape == (64, 64) and a.dtype == np.float64
    assert np.isfinite(a).all()
    assert abs(a.mean()) < 1e-10
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_infinite_r0_gives_zero_screen():
    s = kolmogorov_screen(32, 1.0, np.inf, RngStream(1, 0))
    assert np.all(s == 0.0)


def test_invalid_arguments_rejected():
    rng = RngStream(0, 0)
    with pytest.raises(ValueError):
        kolmogorov_screen(32, 1.0, 1.5, rng)  # under-resolved: r0 < 2 dx
    with pytest.raises(ValueError):
        kolmogorov_screen(32, 0.0, 8.0, rng)
    with pytest.raises(ValueError):
        kolmogorov_screen(1, 1.0, 8.0, rng)
    with pytest.raises(ValueError):
        kolmogorov_screen(32, 1.0, -1.0, rng)
    with pytest.raises(ValueError):
        kolmogorov_screen(32, 1.0, 8.0, rng, subharmonics=-1)


def test_subharmonics_supply_large_separation_power():
    n, r0 = 64, 10.0
    seps = np.array([24, 32])
    d_none = np.zeros(2)
    d_full = np.zeros(2)
    m = 60
    for i in range(m):
        s0 = kolmogorov_screen(n, 1.0, r0, RngStream(3, 0).child(i), subharmonics=0)
        s8 = kolmogorov_screen(n, 1.0, r0, RngStream(3, 0).child(i))
        d_none += estimate_structure_function(s0, seps, 1.0)[1]
        d_full += estimate_structure_function(s8, seps, 1.0)[1]
    assert np.all(d_full > 1.5 * d_none)


def test_structure_function_tracks_theory():
    # ensemble check across a full decade of separations
    n, dx, r0 = 128, 1.0, 20.0
    m = 400
    seps = np.array([4, 6, 8, 12, 16, 24, 32, 48, 64])
    base = RngStream(20250814, 0)
    acc = np.zeros(seps.size)
    for i in range(m):
        s = kolmogorov_screen(n, dx, r0, base.child(i))
        acc += estimate_structure_function(s, seps, dx)[1]
    d_mc = acc / m
    th = theoretical_structure_function(seps * dx, r0)
    rel = np.abs(d_mc / th - 1.0)
    assert rel.max() < 0.15, f"worst relative error {rel.max():.3f}"
    slope = np.polyfit(np.log(seps.astype(float)), np.log(d_mc), 1)[0]
    assert 1.55 < slope < 1.80, f"slope {slope:.3f}"


def test_estimator_on_known_field():
    # a pure sinusoid has D(r) = 2 sigma^2 (1 - cos(2 pi f r)) pooled over phase
    n = 128
    x = np.arange(n)
    f = 4.0 / n
    phases = np.linspace(0.0, 2 * np.pi, 32, endpoint=False)
    screens = np.array([np.cos(2 * np.pi * f * x + p)[None, :].repeat(n, 0) for p in phases])
    seps = np.array([4, 8, 16])
    _, d = estimate_structure_function(screens, seps, 1.0)
    # row-axis differences vanish for a column-constant field; pooling halves it
    want = 0.5 * (1.0 - np.cos(2 * np.pi * f * seps))
    assert np.allclose(d, want, atol=1e-2)

import numpy as np
import pytest

from atmosim.zernike import build_basis, noll_to_nm, zernike_grid


def test_noll_index_table():
    want = {
        1: (0, 0, ""),
        2: (1, 1, "cos"),
        3: (1, 1, "sin"),
        4: (2, 0, ""),
        5: (2, 2, "sin"),
        6: (2, 2, "cos"),
        7: (3, 1, "sin"),
        8: (3, 1, "cos"),
        9: (3, 3, "sin"),
        10: (3, 3, "cos"),
        11: (4, 0, ""),
    }
    got = {j: noll_to_nm(j) for j in want}
    assert got == want
    with pytest.raises(ValueError):
        noll_to_nm(0)


def test_orthonormal_at_64():
    b = build_basis(36, 64)
    flat = b.grids.reshape(36, -1)
    gram = flat @ flat.T
    assert np.abs(gram - np.eye(36)).max() < 1e-6


def test_piston_is_constant():
    b = build_basis(6, 64)
    z1 = b.grids[0]
    assert np.allclose(z1[b.mask], 1.0 / np.sqrt(b.n_pupil), atol=1e-14)
    assert np.all(z1[~b.mask] == 0.0)


def test_defocus_normalization_at_128():
    b = build_basis(4, 128)
    assert np.sum(b.grids[3] ** 2) == pytest.approx(1.0, abs=1e-6)
    # raw (pre-orthonormalization) defocus is already near unit RMS on the disk
    raw = zernike_grid(4, 128)
    mask = raw != 0.0
    assert np.mean(raw[mask] ** 2) == pytest.approx(1.0, abs=5e-3)


def test_reflection_parities_exact():
    b = build_basis(10, 64)
    assert np.array_equal(b.grids[1][:, ::-1], -b.grids[1])  # x tilt odd in x
    assert np.array_equal(b.grids[2][::-1, :], -b.grids[2])  # y tilt odd in y
    assert np.array_equal(b.grids[1][::-1, :], b.grids[1])  # x tilt even in y
    assert np.array_equal(b.grids[9][:, ::-1], -b.grids[9])  # cos 3theta odd in x


def test_tilt_slopes_near_continuous_value():
    b = build_basis(3, 64)
    assert b.tilt_slopes == pytest.approx([4.0 / 64, 4.0 / 64], rel=0.02)


def test_bad_arguments():
    with pytest.raises(ValueError):
        build_basis(0, 64)
    with pytest.raises(ValueError):
        build_basis(4, 8)
    with pytest.raises(ValueError):
        build_basis(100, 16)  # more modes than the tiny pupil can resolve

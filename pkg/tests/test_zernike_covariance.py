from math import factorial, pi

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import jv

from atmosim.imgcore.rng import RngStream
from atmosim.zernike import (
    build_covariance,
    noll_covariance,
    noll_to_nm,
    sample_alpha,
)


def bessel_mode_variance(j: int, d_over_r0: float) -> float:
    """Independent oracle: 1-D Bessel form of the Kolmogorov mode variance.

    var_j = 0.023 * 8 * pi^(8/3) * (n+1) * (D/r0)^(5/3)
            * integral_0^inf k^(-14/3) J_{n+1}(k)^2 dk,
    evaluated numerically; the small-k endpoint uses the series of J to tame
    the algebraic singularity.
    """
    n, _, _ = noll_to_nm(j)
    nu = n + 1
    a = 0.2
    c0 = 1.0 / (2.0**nu * factorial(nu))
    p = 2 * nu - 14.0 / 3.0
    low = c0**2 * (a ** (p + 1) / (p + 1) - a ** (p + 3) / (2.0 * (nu + 1) * (p + 3)))
    mid, _ = quad(lambda k: k ** (-14.0 / 3.0) * jv(nu, k) ** 2, a, 400.0, limit=2000)
    return 0.023 * 8.0 * pi ** (8.0 / 3.0) * nu * (low + mid) * d_over_r0 ** (5.0 / 3.0)


def test_variances_match_bessel_oracle():
    base = noll_covariance(11, 1.0)
    for j in range(2, 11):
        want = bessel_mode_variance(j, 1.0)
        assert base[j - 1, j - 1] == pytest.approx(want, rel=0.02)


def test_known_entries():
    c = noll_covariance(12, 1.0)
    assert c[1, 1] == pytest.approx(0.4509, rel=1e-3)  # tilt
    assert c[2, 2] == c[1, 1]
    assert c[3, 3] == pytest.approx(0.02332, rel=1e-3)  # defocus
    assert c[1, 7] == pytest.approx(-0.01414, rel=1e-2)  # tilt-coma coupling
    assert c[1, 3] == 0.0  # different azimuthal order
    assert c[6, 7] == 0.0  # same order, opposite trig parity
    assert np.all(c[0, :] == 0.0) and np.all(c[:, 0] == 0.0)  # piston zeroed


def test_scaling_and_degenerate_strength():
    c1 = noll_covariance(10, 1.0)
    c2 = noll_covariance(10, 2.0)
    assert np.allclose(c2, c1 * 2.0 ** (5.0 / 3.0), rtol=1e-12)
    assert np.all(noll_covariance(10, 0.0) == 0.0)
    with pytest.raises(ValueError):
        noll_covariance(10, -1.0)
    with pytest.raises(ValueError):
        noll_covariance(0, 1.0)


@pytest.fixture(scope="module")
def small_cov():
    rows = np.linspace(0.0, 96.0, 2)
    cols = np.linspace(0.0, 96.0, 2)
    return build_covariance(2.0, (rows, cols), corr_length=16.0, n_modes=12)


def test_assembled_structure(small_cov):
    m = small_cov.matrix
    M = 12
    base = noll_covariance(M, 2.0)
    # per-anchor diagonal block: Noll matrix with the tilt-to-higher coupling dropped
    blk = m[:M, :M]
    assert np.allclose(blk[3:, 3:], base[3:, 3:])
    assert blk[1, 1] == base[1, 1] and blk[2, 2] == base[2, 2]
    assert np.all(blk[1:3, 3:] == 0.0) and np.all(blk[3:, 1:3] == 0.0)
    # cross-anchor: tilt only, exponential distance decay
    want = np.exp(-96.0 / 16.0) * base[1, 1]
    assert m[1, M + 1] == pytest.approx(want, rel=1e-12)
    assert np.all(m[3:M, M + 3 : 2 * M] == 0.0)
    assert np.array_equal(m, m.T)
    assert np.linalg.eigvalsh(m).min() > -1e-10


def test_build_covariance_rejections():
    anchors = (np.array([0.0, 10.0]), np.array([0.0, 10.0]))
    with pytest.raises(ValueError):
        build_covariance(1.0, anchors, corr_length=0.0)
    with pytest.raises(ValueError):
        build_covariance(-1.0, anchors, corr_length=5.0)
    with pytest.raises(ValueError):
        build_covariance(1.0, anchors, corr_length=5.0, n_modes=2)


def test_sampling_reproducible_and_zero_strength():
    anchors = (np.array([0.0, 32.0]), np.array([0.0, 32.0]))
    cov = build_covariance(3.0, anchors, corr_length=8.0, n_modes=10)
    a1 = sample_alpha(cov, RngStream(42, 0))
    a2 = sample_alpha(cov, RngStream(42, 0))
    a3 = sample_alpha(cov, RngStream(42, 1))
    assert np.array_equal(a1.table, a2.table)
    assert not np.array_equal(a1.table, a3.table)
    assert a1.table.shape == (4, 10)
    assert np.all(a1.table[:, 0] == 0.0)  # piston never excited

    zero = build_covariance(0.0, anchors, corr_length=8.0, n_modes=10)
    assert np.all(sample_alpha(zero, RngStream(0, 0)).table == 0.0)


def test_empirical_covariance_matches():
    # long correlation length so every retained entry is statistically resolvable
    anchors = (np.array([0.0, 24.0]), np.array([0.0, 24.0]))
    cov = build_covariance(2.0, anchors, corr_length=1000.0, n_modes=12)
    rng = RngStream(314, 0)
    n = 10_000
    dim = cov.matrix.shape[0]
    acc = np.zeros((dim, dim))
    for i in range(n):
        v = sample_alpha(cov, rng.child(i)).table.ravel()
        acc += np.outer(v, v)
    emp = acc / n
    keep = np.abs(cov.matrix) > 0.01 * np.abs(cov.matrix).max()
    rel = np.abs(emp - cov.matrix)[keep] / np.abs(cov.matrix)[keep]
    assert rel.max() < 0.10


def test_sampled_std_follows_five_thirds_law():
    anchors = (np.array([0.0, 20.0]), np.array([0.0, 20.0]))
    cov1 = build_covariance(1.0, anchors, corr_length=8.0, n_modes=10)
    cov4 = build_covariance(4.0, anchors, corr_length=8.0, n_modes=10)
    rng = RngStream(99, 0)
    n = 4000
    s1 = np.std([sample_alpha(cov1, rng.child(i)).table[0, 1] for i in range(n)])
    s4 = np.std([sample_alpha(cov4, rng.child(n + i)).table[0, 1] for i in range(n)])
    assert s4 / s1 == pytest.approx(4.0 ** (5.0 / 6.0), rel=0.05)

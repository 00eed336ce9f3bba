"""Shared fixtures and independent oracles for the test suite."""

import numpy as np
import pytest

from sqglab import spectral as sp
from sqglab.spectral import Grid, SpectralField


@pytest.fixture
def grid32():
    return Grid(32, 2 * np.pi)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def band_limited(grid, rng, kmax_index=None):
    """Random real mean-zero field supported on |j|_inf <= kmax_index."""
    limit = grid.n // 3 if kmax_index is None else kmax_index
    mask = (np.abs(grid.j1) <= limit) & (np.abs(grid.j2) <= limit)
    return sp.random_field(grid, rng, mask)


def convolution_advection(u1, u2, f):
    """Dealiased coefficients of u . grad f by a direct sum over mode pairs.

    Works purely on coefficient arrays: no FFT, no physical grid.
    """
    grid = f.grid
    n = grid.n
    out = np.zeros((n, n), dtype=complex)
    pu = np.argwhere((u1.coeffs != 0) | (u2.coeffs != 0))
    pf = np.argwhere(f.coeffs != 0)
    if len(pu) == 0 or len(pf) == 0:
        return SpectralField(grid, out)
    ju = grid.index[pu]  # signed lattice indices
    jf = grid.index[pf]
    a1 = u1.coeffs[pu[:, 0], pu[:, 1]]
    a2 = u2.coeffs[pu[:, 0], pu[:, 1]]
    c = f.coeffs[pf[:, 0], pf[:, 1]]
    kf = jf * grid.dk
    # d/dx_i of exp(i k.x) is i k_i; odd Nyquist multipliers vanish
    nyq = (jf == -n // 2)
    g1 = np.where(nyq[:, 0], 0.0, 1j * kf[:, 0]) * c
    g2 = np.where(nyq[:, 1], 0.0, 1j * kf[:, 1]) * c
    total = ju[:, None, :] + jf[None, :, :]
    vals = a1[:, None] * g1[None, :] + a2[:, None] * g2[None, :]
    keep = (np.abs(total[..., 0]) <= n / 3) & (np.abs(total[..., 1]) <= n / 3)
    tot = total[keep] % n
    np.add.at(out, (tot[:, 0], tot[:, 1]), vals[keep])
    return SpectralField(grid, out)


def velocity_oracle(theta, exponent=-0.5):
    """Velocity coefficients built mode by mode from the symbol definition."""
    grid = theta.grid
    n = grid.n
    u1 = np.zeros((n, n), dtype=complex)
    u2 = np.zeros((n, n), dtype=complex)
    for a, b in np.argwhere(theta.coeffs != 0):
        j1, j2 = grid.index[a], grid.index[b]
        k1, k2 = j1 * grid.dk, j2 * grid.dk
        kk = np.hypot(k1, k2)
        if kk == 0:
            continue
        scale = kk ** (2 * exponent) * theta.coeffs[a, b]
        u1[a, b] = 0.0 if j2 == -n // 2 else 1j * k2 * scale
        u2[a, b] = 0.0 if j1 == -n // 2 else -1j * k1 * scale
    return SpectralField(grid, u1), SpectralField(grid, u2)

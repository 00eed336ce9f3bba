"""Periodic-box spectral fields and Fourier-multiplier operators.

Coefficients are stored as full ``n x n`` complex arrays in numpy FFT order.
Axis 0 carries the x1 wavenumber index, axis 1 the x2 index, and the
physical field is ``f(x) = sum_k c_k exp(i k.x)`` sampled at ``x = i*dx``
(the origin is always a sampling point).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Literal

import numpy as np
import scipy.fft as sfft

ANNULUS_INNER = 4.0 / 3.0
ANNULUS_OUTER = 1.5


class GridMismatchError(ValueError):
    pass


class MeanError(ValueError):
    """Raised when an operator needing a zero-mean field gets a nonzero mean."""


@dataclass(frozen=True)
class Grid:
    """Square periodic box with ``n`` modes per axis and period ``box_len``."""

    n: int
    box_len: float = 64.0 * np.pi

    def __post_init__(self) -> None:
        if self.n < 8 or self.n % 2:
            raise ValueError(f"n must be an even integer >= 8, got {self.n}")
        if not self.box_len > 0:
            raise ValueError(f"box_len must be positive, got {self.box_len}")

    @property
    def dk(self) -> float:
        return 2.0 * np.pi / self.box_len

    @property
    def dx(self) -> float:
        return self.box_len / self.n

    @property
    def area(self) -> float:
        return self.box_len**2

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @cached_property
    def index(self) -> np.ndarray:
        """Signed lattice indices j in FFT order, ``[0, ..., n/2-1, -n/2, ..., -1]``."""
        return np.fft.fftfreq(self.n, 1.0 / self.n).astype(np.int64)

    @cached_property
    def j1(self) -> np.ndarray:
        return np.broadcast_to(self.index[:, None], self.shape)

    @cached_property
    def j2(self) -> np.ndarray:
        return np.broadcast_to(self.index[None, :], self.shape)

    @cached_property
    def k1(self) -> np.ndarray:
        return self.j1 * self.dk

    @cached_property
    def k2(self) -> np.ndarray:
        return self.j2 * self.dk

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.hypot(self.k1, self.k2)

    @cached_property
    def nyquist(self) -> np.ndarray:
        """Mask of modes on the Nyquist row or column."""
        return (self.j1 == -self.n // 2) | (self.j2 == -self.n // 2)

    @cached_property
    def k1_odd(self) -> np.ndarray:
        # odd-order multipliers vanish on Nyquist modes to keep fields real
        return np.where(self.nyquist, 0.0, self.k1)

    @cached_property
    def k2_odd(self) -> np.ndarray:
        return np.where(self.nyquist, 0.0, self.k2)

    @cached_property
    def ik1_odd(self) -> np.ndarray:
        return 1j * self.k1_odd

    @cached_property
    def ik2_odd(self) -> np.ndarray:
        return 1j * self.k2_odd

    @cached_property
    def _power_cache(self) -> dict:
        return {}

    def kpow(self, p: float) -> np.ndarray:
        """Cached ``|k|^p`` with the zero mode mapped to 0."""
        cache = self._power_cache
        if p not in cache:
            arr = _power(self.kmag, p)
            arr.setflags(write=False)
            cache[p] = arr
        return cache[p]

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        cut = self.n / 3.0
        return (np.abs(self.j1) <= cut) & (np.abs(self.j2) <= cut)

    @cached_property
    def tail_mask(self) -> np.ndarray:
        """Outer third of the retained block (resolution monitor)."""
        cut = self.n / 3.0
        jmax = np.maximum(np.abs(self.j1), np.abs(self.j2))
        return self.dealias_mask & (jmax > 2.0 * cut / 3.0)

    @cached_property
    def neg_index(self) -> tuple[np.ndarray, np.ndarray]:
        """Fancy index mapping each lattice point k to -k (mod n)."""
        idx = (-np.arange(self.n)) % self.n
        return np.ix_(idx, idx)

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.n) * self.dx

    @cached_property
    def x1(self) -> np.ndarray:
        return np.broadcast_to(self.x[:, None], self.shape)

    @cached_property
    def x2(self) -> np.ndarray:
        return np.broadcast_to(self.x[None, :], self.shape)

    def resolves_annulus(self) -> bool:
        """True when some lattice point lies in 4/3 <= |k| <= 3/2."""
        inside = (self.kmag >= ANNULUS_INNER) & (self.kmag <= ANNULUS_OUTER)
        return bool(inside.any())

    def zeros(self) -> "SpectralField":
        return SpectralField(self, np.zeros(self.shape, dtype=np.complex128))


@dataclass
class SpectralField:
    """Fourier coefficients of a real scalar field on ``grid``."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.shape != self.grid.shape:
            raise GridMismatchError(
                f"coefficient shape {self.coeffs.shape} does not match grid {self.grid.shape}"
            )

    @classmethod
    def from_physical(cls, grid: Grid, values: np.ndarray) -> "SpectralField":
        values = np.asarray(values, dtype=np.float64)
        n = grid.n
        half = sfft.rfft2(values) / (n * n)
        coeffs = np.empty(grid.shape, dtype=np.complex128)
        m = n // 2 + 1
        coeffs[:, :m] = half
        rows = (-np.arange(n)) % n
        coeffs[:, m:] = np.conj(half[rows][:, n // 2 - 1 : 0 : -1])
        return cls(grid, coeffs)

    def to_physical(self) -> np.ndarray:
        n = self.grid.n
        return sfft.irfft2(self.coeffs[:, : n // 2 + 1] * (n * n), s=(n, n))

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    @property
    def mean(self) -> complex:
        return complex(self.coeffs[0, 0])

    def is_mean_zero(self, rtol: float = 1e-12) -> bool:
        scale = float(np.abs(self.coeffs).max(initial=0.0))
        return abs(self.coeffs[0, 0]) <= rtol * scale

    def symmetry_defect(self) -> float:
        """max |c(-k) - conj(c(k))|; zero for real fields."""
        c = self.coeffs
        return float(np.abs(c[self.grid.neg_index] - np.conj(c)).max(initial=0.0))

    def _check(self, other: "SpectralField") -> None:
        if other.grid != self.grid:
            raise GridMismatchError(f"grid mismatch: {self.grid} vs {other.grid}")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__


@dataclass
class VectorField:
    u1: SpectralField
    u2: SpectralField

    def __post_init__(self) -> None:
        if self.u1.grid != self.u2.grid:
            raise GridMismatchError("vector components live on different grids")

    @property
    def grid(self) -> Grid:
        return self.u1.grid

    def divergence_defect(self) -> float:
        """max_k |k . u(k)| relative to max_k |u(k)|."""
        g = self.grid
        div = np.abs(g.k1 * self.u1.coeffs + g.k2 * self.u2.coeffs).max()
        scale = max(np.abs(self.u1.coeffs).max(), np.abs(self.u2.coeffs).max())
        return float(div / scale) if scale > 0 else 0.0

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.u1 + other.u1, self.u2 + other.u2)


def _power(k: np.ndarray, p: float) -> np.ndarray:
    """|k|^p with the k = 0 entry set to 0."""
    out = np.zeros_like(k)
    nz = k > 0
    out[nz] = k[nz] ** p
    return out


def fractional_laplacian(
    f: SpectralField, a: float, sign: Literal["+", "-"] = "+"
) -> SpectralField:
    """Multiply by ``|k|^{+-2a}``; the zero mode is always mapped to 0."""
    if a < 0:
        raise ValueError(f"exponent must be non-negative, got {a}")
    if sign not in ("+", "-"):
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")
    if sign == "-" and not f.is_mean_zero():
        raise MeanError("inverse fractional Laplacian needs a zero-mean field")
    p = 2.0 * a if sign == "+" else -2.0 * a
    return SpectralField(f.grid, f.coeffs * _power(f.grid.kmag, p))


def velocity_from_scalar(t: SpectralField, exponent: float = -0.5) -> VectorField:
    """Perpendicular-gradient velocity ``u = grad_perp (-Lap)^exponent t``.

    With the default exponent the symbol ``(i k2, -i k1)/|k|`` has unit
    modulus away from k = 0, so ``||u||_L2 = ||t||_L2``.
    """
    if not t.is_mean_zero():
        raise MeanError("velocity map needs a zero-mean scalar")
    g = t.grid
    scaled = t.coeffs * g.kpow(2.0 * exponent)
    return VectorField(
        SpectralField(g, g.ik2_odd * scaled),
        SpectralField(g, -g.ik1_odd * scaled),
    )


def derivative(f: SpectralField, beta: tuple[int, int]) -> SpectralField:
    b1, b2 = beta
    if b1 < 0 or b2 < 0:
        raise ValueError(f"multi-index must be non-negative, got {beta}")
    g = f.grid
    if beta == (1, 0):
        return SpectralField(g, f.coeffs * g.ik1_odd)
    if beta == (0, 1):
        return SpectralField(g, f.coeffs * g.ik2_odd)
    k1 = g.k1_odd if b1 % 2 else g.k1
    k2 = g.k2_odd if b2 % 2 else g.k2
    mult = (1j * k1) ** b1 * (1j * k2) ** b2
    return SpectralField(g, f.coeffs * mult)


def gradient(f: SpectralField) -> VectorField:
    return VectorField(derivative(f, (1, 0)), derivative(f, (0, 1)))


def multi_indices(order: int) -> list[tuple[int, int]]:
    """All multi-indices with ``|beta| == order``."""
    return [(b1, order - b1) for b1 in range(order + 1)]


def sobolev_weight_at(k1: np.ndarray, k2: np.ndarray, m: int, skip_zero: bool = False) -> np.ndarray:
    """``w_m(k) = sum_{|beta|<=m} k1^{2 b1} k2^{2 b2}`` at arbitrary wavevectors."""
    a, b = np.asarray(k1) ** 2, np.asarray(k2) ** 2
    w = np.zeros(np.broadcast(a, b).shape)
    for order in range(1 if skip_zero else 0, m + 1):
        for b1, b2 in multi_indices(order):
            w += a**b1 * b**b2
    return w


@lru_cache(maxsize=32)
def sobolev_weight(grid: Grid, m: int, skip_zero: bool = False) -> np.ndarray:
    """Cached (read-only) ``w_m`` on the grid."""
    w = sobolev_weight_at(grid.k1, grid.k2, m, skip_zero)
    w.setflags(write=False)
    return w


def lebesgue_norm(f: SpectralField, p: float = 2, upsample: int = 1) -> float:
    """L2 norm by Parseval, or the sampled sup norm (a lower bound of the true sup)."""
    if p == 2:
        return float(np.sqrt(f.grid.area * np.sum(np.abs(f.coeffs) ** 2)))
    if p == np.inf or p == "inf":
        return float(np.abs(sample(f, upsample)).max())
    raise ValueError(f"unsupported p={p!r}; use 2 or inf")


def physical_l2(f: SpectralField) -> float:
    """L2 norm by physical-space quadrature."""
    v = f.to_physical()
    return float(np.sqrt(np.sum(v**2) * f.grid.dx**2))


def sobolev_norm(f: SpectralField, m: int = 3, alpha_shift: float = 0.0) -> float:
    """``(sum_{|beta|<=m} ||D^beta Lambda^s f||_L2^2)^{1/2}`` with ``s = alpha_shift``."""
    if m < 0 or alpha_shift < 0:
        raise ValueError("m and alpha_shift must be non-negative")
    g = f.grid
    w = sobolev_weight(g, m)
    if alpha_shift:
        w = w * g.kpow(2.0 * alpha_shift)
    return float(np.sqrt(g.area * np.sum(w * np.abs(f.coeffs) ** 2)))


def upsampled_coeffs(f: SpectralField, factor: int) -> np.ndarray:
    n = f.grid.n
    big = n * factor
    out = np.zeros((big, big), dtype=np.complex128)
    idx = f.grid.index % big
    out[np.ix_(idx, idx)] = f.coeffs
    return out


def sample(f: SpectralField, upsample: int = 1) -> np.ndarray:
    """Physical samples, optionally on a grid refined by zero padding."""
    if upsample == 1:
        return f.to_physical()
    big = f.grid.n * upsample
    return np.real(sfft.ifft2(upsampled_coeffs(f, upsample) * (big * big)))


def vector_sup(v: VectorField, upsample: int = 1) -> float:
    """Sampled sup of the Euclidean length |v(x)|."""
    return float(np.sqrt(sample(v.u1, upsample) ** 2 + sample(v.u2, upsample) ** 2).max())


def dealias(f: SpectralField) -> SpectralField:
    """2/3 rule: drop modes with |j1| > n/3 or |j2| > n/3."""
    return SpectralField(f.grid, np.where(f.grid.dealias_mask, f.coeffs, 0.0))


def pointwise_product(f: SpectralField, g: SpectralField) -> SpectralField:
    if f.grid != g.grid:
        raise GridMismatchError(f"grid mismatch: {f.grid} vs {g.grid}")
    prod = SpectralField.from_physical(f.grid, f.to_physical() * g.to_physical())
    return dealias(prod)


def advection(u: VectorField, f: SpectralField) -> SpectralField:
    """Dealiased coefficients of ``u . grad f``."""
    grid = f.grid
    df = gradient(f)
    phys = u.u1.to_physical() * df.u1.to_physical() + u.u2.to_physical() * df.u2.to_physical()
    return dealias(SpectralField.from_physical(grid, phys))


def inner(f: SpectralField, g: SpectralField, weight: np.ndarray | None = None) -> float:
    """``int f g dx`` by Parseval, optionally with a spectral weight."""
    prod = np.real(f.coeffs * np.conj(g.coeffs))
    if weight is not None:
        prod = prod * weight
    return float(f.grid.area * np.sum(prod))


def tail_fraction(f: SpectralField) -> float:
    e = np.abs(f.coeffs) ** 2
    total = e.sum()
    if total == 0:
        return 0.0
    return float(e[f.grid.tail_mask].sum() / total)


def random_field(
    grid: Grid,
    rng: np.random.Generator,
    mask: np.ndarray | None = None,
) -> SpectralField:
    """i.i.d. complex Gaussian coefficients on ``mask`` (default: the dealias block),
    made conjugate-symmetric and mean-zero."""
    if mask is None:
        mask = grid.dealias_mask
    mask = mask & mask[grid.neg_index] & ~grid.nyquist
    z = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    z = np.where(mask, z, 0.0)
    c = 0.5 * (z + np.conj(z[grid.neg_index]))
    c[0, 0] = 0.0
    return SpectralField(grid, c)


def disk_mask(grid: Grid, kmax: float, kmin: float = 0.0) -> np.ndarray:
    return (grid.kmag <= kmax) & (grid.kmag >= kmin) & grid.dealias_mask


def annulus_mask(grid: Grid) -> np.ndarray:
    return (grid.kmag >= ANNULUS_INNER) & (grid.kmag <= ANNULUS_OUTER)


def mode(grid: Grid, j: tuple[int, int], amplitude: complex = 1.0) -> SpectralField:
    """Real field ``2 Re(a exp(i k.x))`` for lattice index ``j`` (a conjugate pair)."""
    c = np.zeros(grid.shape, dtype=np.complex128)
    n = grid.n
    c[j[0] % n, j[1] % n] += amplitude
    c[-j[0] % n, -j[1] % n] += np.conj(amplitude)
    return SpectralField(grid, c)

"""Large-data family, linear background, smallness condition and norm bounds.

The continuum transform of a field is recovered from its box coefficients
as ``f_hat(k) = box_area * coeff(k)``, so lattice sums weighted by ``dk^2``
approximate the continuum integrals over wavenumber space.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from . import spectral as sp
from .quadrature import adaptive_simpson
from .spectral import ANNULUS_INNER, ANNULUS_OUTER, Grid, SpectralField, VectorField

_EDGE_TOL = 1e-9


class RecipeError(ValueError):
    pass


class ResolutionError(ValueError):
    pass


def amplitude_rule(delta: float) -> float:
    """``ln(ln(1/delta)) / delta``."""
    return np.log(np.log(1.0 / delta)) / delta


def loglog(delta: float) -> float:
    return float(np.log(abs(np.log(delta))))


@dataclass(frozen=True)
class DataRecipe:
    """Initial data ``theta_0 = Theta_0 + g_0``.

    ``background`` selects Theta_0: ``"corollary"`` (amplitude * chi),
    ``"modes"`` (sum of real mode pairs given as ``(j1, j2, amplitude)``)
    or ``"zero"``. ``g0`` is ``"zero"``, ``"modes"`` (taken from ``g0_modes``)
    or ``"random"``; a random seed is band-limited to ``|k| <= g0_kmax`` and
    rescaled to ``||g0||_{H^3}^2 = g0_h3_sq``.
    """

    delta: float = 0.05
    mu: float = 1.0
    alpha: float = 0.25
    amplitude: float | None = None
    background: str = "corollary"
    modes: tuple[tuple[int, int, float], ...] = ()
    g0: str = "zero"
    g0_h3_sq: float = 0.0
    g0_kmax: float = 0.5
    g0_seed: int = 0
    g0_modes: tuple[tuple[int, int, float], ...] = ()
    velocity_exponent: float = -0.5

    def __post_init__(self) -> None:
        if self.background not in ("corollary", "modes", "zero"):
            raise RecipeError(f"recipe.background: unknown kind {self.background!r}")
        if self.g0 not in ("zero", "random", "modes"):
            raise RecipeError(f"recipe.g0: unknown kind {self.g0!r}")
        if not self.delta > 0:
            raise RecipeError(f"recipe.delta: must be positive, got {self.delta}")
        if self.mu < 0:
            raise RecipeError(f"recipe.mu: must be non-negative, got {self.mu}")
        if not 0 <= self.alpha < 1:
            raise RecipeError(f"recipe.alpha: must lie in [0, 1), got {self.alpha}")
        if self.g0_h3_sq < 0:
            raise RecipeError("recipe.g0_h3_sq: must be non-negative")
        if self.background == "corollary" and not self.delta < 1.0 / np.e:
            raise RecipeError(
                f"recipe.delta: need delta < 1/e so that ln|ln delta| > 0, got {self.delta}"
            )
        object.__setattr__(self, "modes", tuple(tuple(m) for m in self.modes))
        object.__setattr__(self, "g0_modes", tuple(tuple(m) for m in self.g0_modes))

    @property
    def amp(self) -> float:
        return amplitude_rule(self.delta) if self.amplitude is None else float(self.amplitude)

    def check_theorem_hypotheses(self) -> None:
        """Raise unless 0 <= alpha < 1/2, mu > 0 and 0 < delta <= 1/10."""
        if not 0 <= self.alpha < 0.5:
            raise RecipeError(
                f"recipe.alpha: the global-regularity statement needs alpha in [0, 1/2), got {self.alpha}"
            )
        if not self.mu > 0:
            raise RecipeError(f"recipe.mu: must be positive, got {self.mu}")
        if self.background == "corollary" and not self.delta <= 0.1:
            raise RecipeError(f"recipe.delta: must lie in (0, 1/10], got {self.delta}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class VerificationParams:
    c_universal: float = 1.0
    epsilon: float = 0.1
    t_horizon: float | None = None
    quad_tol: float = 1e-8

    def __post_init__(self) -> None:
        if self.c_universal < 1:
            raise RecipeError(f"verify.c_universal: must be >= 1, got {self.c_universal}")
        if not self.epsilon > 0:
            raise RecipeError(f"verify.epsilon: must be positive, got {self.epsilon}")
        if not self.quad_tol > 0:
            raise RecipeError("verify.quad_tol: must be positive")


def corollary_grid(delta: float, refine: float = 6.0, kcover: float = 1.6) -> Grid:
    """Box with ``dk = delta/refine`` and the smallest power-of-two ``n`` with
    ``(n/2 - 1) dk >= kcover``."""
    dk = delta / refine
    n = 8
    while (n // 2 - 1) * dk < kcover:
        n *= 2
    return Grid(n, 2.0 * np.pi / dk)


def smoothstep(r: np.ndarray) -> np.ndarray:
    """``6r^5 - 15r^4 + 10r^3`` on [0, 1], clamped so rounding never leaves [0, 1]."""
    r = np.clip(r, 0.0, 1.0)
    return np.clip(r**3 * (10.0 - 15.0 * r + 6.0 * r**2), 0.0, 1.0)


def chi_hat(delta: float, grid: Grid) -> np.ndarray:
    """Lattice values of the cutoff: 1 on the inner strip of the annulus,
    0 off the outer strip, smoothstep in between."""
    strip = np.abs(grid.k1 - grid.k2)
    r = (strip - delta / 3.0) / (2.0 * delta / 3.0)
    r = np.where(strip <= delta / 3.0 * (1 + _EDGE_TOL), 0.0, r)
    ring = (grid.kmag >= ANNULUS_INNER * (1 - _EDGE_TOL)) & (
        grid.kmag <= ANNULUS_OUTER * (1 + _EDGE_TOL)
    )
    values = np.where(ring, 1.0 - smoothstep(r), 0.0)
    values[grid.nyquist] = 0.0
    return values


def strip_resolved(delta: float, grid: Grid) -> bool:
    return grid.dk <= delta / 6.0 * (1 + _EDGE_TOL)


def build_chi(recipe: DataRecipe, grid: Grid, strict: bool = False) -> SpectralField:
    """The cutoff as a field; coefficients are ``chi_hat / box_area``."""
    if strict and not strip_resolved(recipe.delta, grid):
        raise ResolutionError(
            f"grid.box_len: dk={grid.dk:.4g} exceeds delta/6={recipe.delta / 6:.4g}"
        )
    if (grid.n // 2 - 1) * grid.dk < ANNULUS_OUTER:
        raise ResolutionError(
            f"grid.n: the annulus |k| <= 3/2 does not fit in the lattice (kmax={(grid.n // 2 - 1) * grid.dk:.4g})"
        )
    values = chi_hat(recipe.delta, grid)
    if not (values == 1.0).any():
        raise ResolutionError(
            f"grid: no lattice point in the inner strip for delta={recipe.delta}, dk={grid.dk:.4g}"
        )
    return SpectralField(grid, values / grid.area)


class Family(NamedTuple):
    a0: SpectralField
    theta0: SpectralField
    u0: VectorField
    g0: SpectralField


def _modes_field(modes, grid: Grid, key: str = "recipe.modes") -> SpectralField:
    out = grid.zeros()
    for j1, j2, amp in modes:
        if (j1, j2) == (0, 0):
            raise RecipeError(f"{key}: the zero mode is not allowed")
        out = out + sp.mode(grid, (int(j1), int(j2)), amp)
    return out


def build_g0(recipe: DataRecipe, grid: Grid) -> SpectralField:
    if recipe.g0 == "modes":
        return _modes_field(recipe.g0_modes, grid, "recipe.g0_modes")
    if recipe.g0 == "zero" or recipe.g0_h3_sq == 0:
        return grid.zeros()
    mask = sp.disk_mask(grid, recipe.g0_kmax)
    mask[0, 0] = False
    if not mask.any():
        raise RecipeError(f"recipe.g0_kmax: no lattice modes within |k| <= {recipe.g0_kmax}")
    rng = np.random.default_rng(recipe.g0_seed)
    g = sp.random_field(grid, rng, mask)
    return g * (np.sqrt(recipe.g0_h3_sq) / sp.sobolev_norm(g, 3))


@lru_cache(maxsize=32)
def build_family(recipe: DataRecipe, grid: Grid) -> Family:
    if recipe.background == "corollary":
        a0 = build_chi(recipe, grid) * recipe.amp
    elif recipe.background == "modes":
        a0 = _modes_field(recipe.modes, grid)
    else:
        a0 = grid.zeros()
    theta0 = a0
    u0 = sp.velocity_from_scalar(theta0, recipe.velocity_exponent)
    return Family(a0, theta0, u0, build_g0(recipe, grid))


def decay_rates(grid: Grid, mu: float, alpha: float) -> np.ndarray:
    """Symbol ``mu |k|^{2 alpha}`` of the dissipation (``mu`` on every mode when alpha = 0)."""
    return mu * grid.kmag ** (2.0 * alpha)


def background_at(theta0: SpectralField, mu: float, alpha: float, t: float) -> SpectralField:
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    if t == 0:
        return theta0.copy()
    return SpectralField(theta0.grid, theta0.coeffs * np.exp(-decay_rates(theta0.grid, mu, alpha) * t))


class BackgroundFields(NamedTuple):
    """Physical samples of the background at one time."""

    theta: SpectralField
    u1: np.ndarray
    u2: np.ndarray
    d1: np.ndarray
    d2: np.ndarray


class Background:
    """Analytic linear background reconstructed from a recipe at any time.

    Physical samples and forcing are memoised for the few most recent
    times, since a Runge-Kutta step revisits its stage times.
    """

    _MEMO = 8

    def __init__(self, recipe: DataRecipe, grid: Grid):
        self.recipe = recipe
        self.grid = grid
        self.theta0 = build_family(recipe, grid).theta0
        self.rates = decay_rates(grid, recipe.mu, recipe.alpha)
        self.is_zero = not np.any(self.theta0.coeffs)
        self._fields: dict[float, BackgroundFields] = {}
        self._forcing: dict[float, SpectralField] = {}

    @staticmethod
    def _remember(memo: dict, t: float, value):
        if len(memo) >= Background._MEMO:
            memo.pop(next(iter(memo)))
        memo[t] = value
        return value

    def theta(self, t: float) -> SpectralField:
        if t == 0:
            return self.theta0.copy()
        return SpectralField(self.grid, self.theta0.coeffs * np.exp(-self.rates * t))

    def velocity(self, t: float) -> VectorField:
        return sp.velocity_from_scalar(self.theta(t), self.recipe.velocity_exponent)

    def fields(self, t: float) -> BackgroundFields:
        """Theta, U and grad Theta at time ``t`` (physical samples cached)."""
        if t in self._fields:
            return self._fields[t]
        th = self.theta(t)
        u = sp.velocity_from_scalar(th, self.recipe.velocity_exponent)
        d = sp.gradient(th)
        out = BackgroundFields(
            th, u.u1.to_physical(), u.u2.to_physical(), d.u1.to_physical(), d.u2.to_physical()
        )
        return self._remember(self._fields, t, out)

    def forcing(self, t: float) -> SpectralField:
        """Dealiased ``-U . grad Theta`` at time ``t``."""
        if self.is_zero:
            return self.grid.zeros()
        if t not in self._forcing:
            b = self.fields(t)
            f = -sp.dealias(SpectralField.from_physical(self.grid, b.u1 * b.d1 + b.u2 * b.d2))
            f.coeffs[0, 0] = 0.0
            self._remember(self._forcing, t, f)
        return self._forcing[t].copy()


def forcing_at(recipe: DataRecipe, grid: Grid, t: float) -> SpectralField:
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    return Background(recipe, grid).forcing(t)


class SparseBackground:
    """Exact wavenumber-space evaluation of ``U . grad Theta`` by direct
    convolution over the (small) support of Theta_0.

    The product of two band-limited fields needs no grid, so this stays
    exact for annulus data whose pointwise product would otherwise need a
    lattice far larger than the one that resolves the strip. The pair
    weight is symmetric in (p, q), so only p < q pairs are stored.
    """

    def __init__(self, recipe: DataRecipe, grid: Grid):
        theta0 = build_family(recipe, grid).theta0
        nz = np.nonzero(theta0.coeffs)
        self.grid = grid
        j = np.stack([grid.j1[nz], grid.j2[nz]], axis=1)
        self.c0 = theta0.coeffs[nz]
        k = j * grid.dk
        kmag = np.hypot(k[:, 0], k[:, 1])
        kpow = kmag ** (2.0 * recipe.velocity_exponent)
        self.rates = recipe.mu * kmag ** (2.0 * recipe.alpha)
        p, q = np.triu_indices(len(self.c0), 1)
        cross = k[p, 1] * k[q, 0] - k[p, 0] * k[q, 1]
        # symmetrised pair weight, doubled for the (q, p) ordering
        w = -cross * (kpow[p] - kpow[q])
        keep = w != 0
        self.p, self.q, self.w = p[keep].astype(np.int32), q[keep].astype(np.int32), w[keep]
        out = j[self.p] + j[self.q]
        self.out_j, self.inverse = np.unique(out, axis=0, return_inverse=True)
        self.inverse = self.inverse.reshape(-1)
        k1 = self.out_j[:, 0] * grid.dk
        k2 = self.out_j[:, 1] * grid.dk
        self.h3_weight = sp.sobolev_weight_at(k1, k2, 3)

    @property
    def size(self) -> int:
        return len(self.c0)

    def advection_coeffs(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(J, F)``: output lattice indices and coefficients of ``U . grad Theta``."""
        c = self.c0 * np.exp(-self.rates * t)
        val = self.w * c[self.p] * c[self.q]
        n_out = len(self.out_j)
        re = np.bincount(self.inverse, weights=val.real, minlength=n_out)
        im = np.bincount(self.inverse, weights=val.imag, minlength=n_out)
        return self.out_j, re + 1j * im

    def advection_h3(self, t: float) -> float:
        if len(self.w) == 0:
            return 0.0
        _, F = self.advection_coeffs(t)
        return float(np.sqrt(self.grid.area * np.sum(self.h3_weight * np.abs(F) ** 2)))


@dataclass
class ConditionReport:
    lhs: float
    eps: float
    passed: bool
    g0_h3_sq: float
    linf_u_integral: float
    linf_theta_integral: float
    forcing_integral: float
    c_universal: float
    t_horizon: float
    evaluations: int

    @property
    def linf_integral(self) -> float:
        return self.linf_u_integral + self.linf_theta_integral

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "eps": self.eps,
            "integrals": {
                "linf": self.linf_integral,
                "forcing": self.forcing_integral,
                "linf_u": self.linf_u_integral,
                "linf_theta": self.linf_theta_integral,
            },
            "pass": self.passed,
            "g0_h3_sq": self.g0_h3_sq,
            "c_universal": self.c_universal,
            "t_horizon": self.t_horizon,
            "evaluations": self.evaluations,
        }


def slowest_rate(recipe: DataRecipe, theta0: SpectralField) -> float:
    """Decay rate bounding every background mode: ``mu min(4/3, kmin)^{2 alpha}``."""
    support = theta0.coeffs != 0
    kmin = float(theta0.grid.kmag[support].min()) if support.any() else ANNULUS_INNER
    return recipe.mu * min(ANNULUS_INNER, kmin) ** (2.0 * recipe.alpha)


def evaluate_condition(
    recipe: DataRecipe, grid: Grid, vp: VerificationParams = VerificationParams()
) -> ConditionReport:
    """Left side of the smallness condition with time integrals over [0, inf).

    Quadrature runs on ``[0, t_horizon]``; the remainder is bounded by the
    exponential tail ``value(t_horizon) / rate`` (rate doubled for the
    quadratic forcing term).
    """
    fam = build_family(recipe, grid)
    g0_sq = sp.sobolev_norm(fam.g0, 3) ** 2
    c = vp.c_universal
    if not np.any(fam.theta0.coeffs):
        lhs = g0_sq
        return ConditionReport(lhs, vp.epsilon, lhs <= vp.epsilon, g0_sq, 0.0, 0.0, 0.0, c, 0.0, 0)
    if not recipe.mu > 0:
        raise RecipeError("recipe.mu: time integrals diverge without dissipation")
    rate = slowest_rate(recipe, fam.theta0)
    horizon = vp.t_horizon if vp.t_horizon is not None else 40.0 / (recipe.mu * ANNULUS_INNER ** (2 * recipe.alpha))
    bg = Background(recipe, grid)
    sparse = SparseBackground(recipe, grid)

    def integrand(t: float) -> np.ndarray:
        th = bg.theta(t)
        u = sp.velocity_from_scalar(th, recipe.velocity_exponent)
        return np.array([sp.vector_sup(u), sp.lebesgue_norm(th, np.inf), sparse.advection_h3(t)])

    body, evals = adaptive_simpson(integrand, 0.0, horizon, rtol=vp.quad_tol)
    tail = integrand(horizon) / np.array([rate, rate, 2.0 * rate])
    linf_u, linf_th, forcing = body + tail
    lhs = (g0_sq + forcing) * np.exp(c * (linf_u + linf_th + forcing))
    return ConditionReport(
        float(lhs), vp.epsilon, bool(lhs <= vp.epsilon), float(g0_sq),
        float(linf_u), float(linf_th), float(forcing), c, float(horizon), evals + 1,
    )


@dataclass
class BoundCheck:
    name: str
    computed: float
    required: float

    @property
    def passed(self) -> bool:
        return bool(self.computed >= self.required)

    def to_dict(self) -> dict:
        return {"name": self.name, "computed": self.computed, "required": self.required, "pass": self.passed}


@dataclass
class BoundsReport:
    delta: float
    amplitude: float
    strict_grid: bool
    strip_area_estimate: float
    bounds: list[BoundCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(b.passed for b in self.bounds)

    def get(self, name: str) -> BoundCheck:
        return next(b for b in self.bounds if b.name == name)

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "amplitude": self.amplitude,
            "strict_grid": self.strict_grid,
            "strip_area_estimate": self.strip_area_estimate,
            "bounds": [b.to_dict() for b in self.bounds],
            "pass": bool(self.passed),
        }


PRIMARY_BOUNDS = ("l1_hat_a0", "l2_hat_a0", "linf_a0_near_origin", "linf_d2_a0")


def corollary_bounds(
    recipe: DataRecipe, grid: Grid, upsample: int = 2, strict: bool = True
) -> BoundsReport:
    """Lower bounds on the norms of the large-data family.

    ``linf_d2_a0`` is the global sup of the x2-derivative (the annular
    region in the original estimate is empty as written).
    """
    if recipe.background != "corollary":
        raise RecipeError("recipe.background: bounds apply to the corollary family only")
    if strict:
        build_chi(recipe, grid, strict=True)
    fam = build_family(recipe, grid)
    a0 = fam.a0
    ll = loglog(recipe.delta)
    d = recipe.delta
    dk2 = grid.dk**2
    hat = np.abs(a0.coeffs) * grid.area

    l1 = float(hat.sum() * dk2)
    l2 = float(np.sqrt((hat**2).sum() * dk2))

    vals = sp.sample(a0, upsample)
    m = grid.n * upsample
    xs = np.arange(m) * (grid.box_len / m)
    xs = np.minimum(xs, grid.box_len - xs)
    near = (xs[:, None] ** 2 + xs[None, :] ** 2) <= (1.0 / 200.0) ** 2
    linf_local = float(np.abs(vals[near]).max())
    linf_d2 = sp.lebesgue_norm(sp.derivative(a0, (0, 1)), np.inf, upsample)

    report = BoundsReport(
        delta=d,
        amplitude=recipe.amp,
        strict_grid=bool(strip_resolved(d, grid)),
        strip_area_estimate=np.pi * (ANNULUS_OUTER**2 - ANNULUS_INNER**2) * d / 3.0 * recipe.amp,
    )
    report.bounds = [
        BoundCheck("l1_hat_a0", l1, ll / 100.0),
        BoundCheck("l2_hat_a0", l2, ll / (100.0 * np.sqrt(d))),
        BoundCheck("linf_a0_near_origin", linf_local, ll / 5000.0),
        BoundCheck("linf_d2_a0", linf_d2, ll / 5000.0),
        BoundCheck("linf_u0", sp.vector_sup(fam.u0, upsample), ll / 5000.0),
        BoundCheck("l2_u0", float(np.hypot(sp.lebesgue_norm(fam.u0.u1), sp.lebesgue_norm(fam.u0.u2))), ll / (100.0 * np.sqrt(d))),
        BoundCheck("linf_theta0", float(np.abs(vals).max()), ll / 5000.0),
        BoundCheck("l2_theta0", sp.lebesgue_norm(fam.theta0), ll / (100.0 * np.sqrt(d))),
    ]
    return report

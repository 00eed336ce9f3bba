"""Time integration of the full equation and of the perturbation equation.

The dissipation ``-mu |k|^{2 alpha}`` is treated exactly by exponential
integrating factors; the transport terms are dealiased pseudo-spectral
products. In perturbation mode the background is never stored: it is
rebuilt analytically at every stage time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import spectral as sp
from .data import Background, DataRecipe, build_family, decay_rates
from .diagnostics import DiagnosticsRecord, SamplingError, ledger_consistency, sample_record
from .spectral import Grid, SpectralField

log = logging.getLogger(__name__)

MODES = ("full", "perturbation", "paired")
SCHEMES = ("etdrk4", "imex_cnab2")


class BlowUpError(RuntimeError):
    def __init__(self, reason: str, t: float, step: int):
        super().__init__(f"{reason} at t={t:.6g} (step {step})")
        self.reason = reason
        self.t = t
        self.step = step


@dataclass(frozen=True)
class SimParams:
    dt_max: float = 0.01
    cfl: float = 0.5
    scheme: str = "etdrk4"
    t_end: float = 1.0
    sample_every: int = 1
    mode: str = "perturbation"
    linear_only: bool = False
    ledger: bool = True
    tail_tol: float = 1e-6
    tail_patience: int = 100
    blowup_factor: float = 1e8

    def __post_init__(self) -> None:
        if not self.dt_max > 0:
            raise ValueError(f"sim.dt_max: must be positive, got {self.dt_max}")
        if not 0 < self.cfl <= 1:
            raise ValueError(f"sim.cfl: must lie in (0, 1], got {self.cfl}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"sim.scheme: must be one of {SCHEMES}, got {self.scheme!r}")
        if self.mode not in MODES:
            raise ValueError(f"sim.mode: must be one of {MODES}, got {self.mode!r}")
        if self.t_end < 0:
            raise ValueError("sim.t_end: must be non-negative")
        if self.sample_every < 1:
            raise ValueError("sim.sample_every: must be >= 1")


@dataclass
class SimState:
    t: float
    mode: str  # "full_theta" or "perturbation_g"
    field: SpectralField
    recipe: DataRecipe
    step: int = 0


def nonlinear_full(th: SpectralField, exponent: float = -0.5) -> SpectralField:
    """``-u . grad theta`` with ``u`` the velocity of ``theta``."""
    u = sp.velocity_from_scalar(th, exponent)
    out = -sp.advection(u, th)
    out.coeffs[0, 0] = 0.0
    return out


def nonlinear_perturbation(
    g: SpectralField, recipe: DataRecipe, t: float, background: Background | None = None
) -> SpectralField:
    """``-(v . grad g + U . grad g + v . grad Theta)``; the forcing is excluded."""
    bg = background or Background(recipe, g.grid)
    b = bg.fields(t)
    v = sp.velocity_from_scalar(g, recipe.velocity_exponent)
    dg = sp.gradient(g)
    v1, v2 = v.u1.to_physical(), v.u2.to_physical()
    g1, g2 = dg.u1.to_physical(), dg.u2.to_physical()
    phys = (v1 + b.u1) * g1 + (v2 + b.u2) * g2 + v1 * b.d1 + v2 * b.d2
    out = -sp.dealias(SpectralField.from_physical(g.grid, phys))
    out.coeffs[0, 0] = 0.0
    return out


class ETDRK4:
    """Cox-Matthews ETDRK4 with contour-integral coefficients."""

    _shared: dict[tuple, dict] = {}

    def __init__(self, rates: np.ndarray, contour_points: int = 32):
        self.lin = -rates
        self.contour_points = contour_points
        # integrators over the same operator share coefficient tables
        key = (rates.shape, contour_points, hash(rates.tobytes()))
        if key not in ETDRK4._shared and len(ETDRK4._shared) >= 4:
            ETDRK4._shared.pop(next(iter(ETDRK4._shared)))
        self._cache: dict[float, tuple] = ETDRK4._shared.setdefault(key, {})

    def coefficients(self, h: float) -> tuple:
        if h not in self._cache:
            hl = h * self.lin
            m = self.contour_points
            roots = np.exp(1j * np.pi * (np.arange(1, m + 1) - 0.5) / m)
            lr = hl[..., None] + roots
            elr = np.exp(lr)
            q = h * np.real(np.mean((np.exp(lr / 2) - 1) / lr, axis=-1))
            f1 = h * np.real(np.mean((-4 - lr + elr * (4 - 3 * lr + lr**2)) / lr**3, axis=-1))
            f2 = h * np.real(np.mean((2 + lr + elr * (lr - 2)) / lr**3, axis=-1))
            f3 = h * np.real(np.mean((-4 - 3 * lr - lr**2 + elr * (4 - lr)) / lr**3, axis=-1))
            self._cache[h] = (np.exp(hl), np.exp(hl / 2), q, f1, f2, f3)
        return self._cache[h]

    def step(self, u: np.ndarray, t: float, h: float, rhs: Callable) -> np.ndarray:
        e, e2, q, f1, f2, f3 = self.coefficients(h)
        nu = rhs(u, t)
        a = e2 * u + q * nu
        na = rhs(a, t + h / 2)
        b = e2 * u + q * na
        nb = rhs(b, t + h / 2)
        c = e2 * a + q * (2 * nb - nu)
        nc = rhs(c, t + h)
        return e * u + f1 * nu + 2 * f2 * (na + nb) + f3 * nc


class IMEXCNAB2:
    """Crank-Nicolson on the dissipation, Adams-Bashforth 2 on the rest.

    The first step (and the first after a resume) uses AB1.
    """

    def __init__(self, rates: np.ndarray):
        self.lin = -rates
        self.prev: np.ndarray | None = None

    def step(self, u: np.ndarray, t: float, h: float, rhs: Callable) -> np.ndarray:
        nu = rhs(u, t)
        explicit = nu if self.prev is None else 1.5 * nu - 0.5 * self.prev
        self.prev = nu
        return ((1 + 0.5 * h * self.lin) * u + h * explicit) / (1 - 0.5 * h * self.lin)


def make_integrator(scheme: str, rates: np.ndarray):
    return ETDRK4(rates) if scheme == "etdrk4" else IMEXCNAB2(rates)


class _Route:
    """One formulation being integrated: the full scalar or the perturbation."""

    def __init__(self, kind: str, field: SpectralField, bg: Background, params: SimParams):
        self.kind = kind
        self.field = field
        self.bg = bg
        self.params = params
        self.grid = field.grid
        recipe = bg.recipe
        self.integrator = make_integrator(params.scheme, decay_rates(self.grid, recipe.mu, recipe.alpha))
        self.exponent = recipe.velocity_exponent
        self.tail_strikes = 0

    def rhs(self, coeffs: np.ndarray, t: float) -> np.ndarray:
        if self.params.linear_only:
            return np.zeros_like(coeffs)
        f = SpectralField(self.grid, coeffs)
        if self.kind == "full_theta":
            return nonlinear_full(f, self.exponent).coeffs
        out = nonlinear_perturbation(f, self.bg.recipe, t, self.bg)
        if not self.bg.is_zero:
            out = out + self.bg.forcing(t)
        return out.coeffs

    def theta(self, t: float) -> SpectralField:
        return self.field if self.kind == "full_theta" else self.bg.theta(t) + self.field

    def g(self, t: float) -> SpectralField:
        return self.field - self.bg.theta(t) if self.kind == "full_theta" else self.field

    def advance(self, t: float, h: float) -> None:
        new = self.integrator.step(self.field.coeffs, t, h, self.rhs)
        new[0, 0] = 0.0
        self.field = SpectralField(self.grid, new)


def cfl_dt(theta: SpectralField, params: SimParams, exponent: float) -> float:
    """``dt_max / 2^k`` for the smallest ``k`` with ``dt <= cfl dx / ||u||_inf``.

    The absolute coefficient sum bounds ``||u||_inf`` from above; when the
    bound already admits ``dt_max`` the sampled sup is not needed.
    """
    dt = params.dt_max
    grid = theta.grid
    symbol = grid.kmag * grid.kpow(2.0 * exponent)
    if params.cfl * grid.dx >= dt * float(np.sum(np.abs(theta.coeffs) * symbol)):
        return dt
    umax = sp.vector_sup(sp.velocity_from_scalar(theta, exponent))
    if umax == 0:
        return dt
    limit = params.cfl * grid.dx / umax
    while dt > limit:
        dt /= 2.0
        if dt < 1e-12 * params.dt_max:
            raise BlowUpError("time step collapsed under the CFL limit", 0.0, 0)
    return dt


def step(state: SimState, params: SimParams, dt: float | None = None) -> SimState:
    """Advance one step; ``dt`` defaults to the CFL-limited step."""
    bg = Background(state.recipe, state.field.grid)
    kind = state.mode
    route = _Route(kind, state.field, bg, params)
    if dt is None:
        dt = cfl_dt(route.theta(state.t), params, bg.recipe.velocity_exponent)
    route.advance(state.t, dt)
    if not np.all(np.isfinite(route.field.coeffs)):
        raise BlowUpError("non-finite coefficients", state.t + dt, state.step + 1)
    return SimState(state.t + dt, kind, route.field, state.recipe, state.step + 1)


@dataclass
class Trajectory:
    recipe: DataRecipe
    grid: Grid
    params: SimParams
    records: list[DiagnosticsRecord] = field(default_factory=list)
    final: dict[str, SimState] = field(default_factory=dict)
    blowup: dict | None = None
    dissipation_integral: float = 0.0
    steps: int = 0

    @property
    def max_paired_discrepancy(self) -> float | None:
        vals = [r.paired_discrepancy for r in self.records if r.paired_discrepancy is not None]
        return max(vals) if vals else None

    @property
    def max_h3_g_sq(self) -> float:
        return max((r.h3_g_sq for r in self.records), default=0.0)

    @property
    def max_tail_fraction(self) -> float:
        return max((r.tail_fraction for r in self.records), default=0.0)


def _initial_routes(recipe: DataRecipe, grid: Grid, params: SimParams, bg: Background) -> dict[str, SpectralField]:
    fam = build_family(recipe, grid)
    out = {}
    if params.mode in ("full", "paired"):
        out["full_theta"] = fam.theta0 + fam.g0
    if params.mode in ("perturbation", "paired"):
        out["perturbation_g"] = fam.g0.copy()
    return out


def run(
    recipe: DataRecipe,
    grid: Grid,
    params: SimParams,
    resume: dict[str, SimState] | None = None,
    dissipation_integral: float = 0.0,
    prior_records: list[DiagnosticsRecord] | None = None,
) -> Trajectory:
    """Integrate to ``params.t_end`` sampling diagnostics every ``sample_every`` steps.

    ``paired`` mode integrates both formulations in lockstep (shared time
    steps) and records ``||(theta - Theta) - g||_{H^3}`` per sample. A
    blow-up stops the run and leaves the last healthy state in ``final``.

    When resuming, the state's own sample is not repeated; ``prior_records``
    (the samples written before the checkpoint) are prepended so the ledger
    residuals are computed over the whole trajectory.
    """
    bg = Background(recipe, grid)
    if resume:
        t0 = next(iter(resume.values())).t
        step0 = next(iter(resume.values())).step
        fields_ = {k: s.field for k, s in resume.items()}
    else:
        t0, step0 = 0.0, 0
        fields_ = _initial_routes(recipe, grid, params, bg)
    routes = {k: _Route(k, f, bg, params) for k, f in fields_.items()}
    primary = routes.get("perturbation_g") or routes["full_theta"]
    traj = Trajectory(recipe, grid, params, dissipation_integral=dissipation_integral)
    traj.records.extend(prior_records or [])
    t, nstep = t0, step0
    exponent = recipe.velocity_exponent
    alpha = recipe.alpha
    half_mu = 0.5 * recipe.mu
    sup0 = sp.lebesgue_norm(primary.theta(t0), np.inf)
    limit = params.blowup_factor * sup0

    def record() -> None:
        g = primary.g(t)
        disc = None
        if len(routes) == 2:
            disc = sp.sobolev_norm(routes["full_theta"].g(t) - routes["perturbation_g"].field, 3)
        with_ledger = params.ledger and not params.linear_only
        traj.records.append(
            sample_record(t, g, bg, dissipation_integral=traj.dissipation_integral,
                          with_ledger=with_ledger, paired_discrepancy=disc)
        )

    def snapshot() -> dict[str, SimState]:
        return {k: SimState(t, k, r.field, recipe, nstep) for k, r in routes.items()}

    if not resume:
        record()
    healthy = snapshot()
    lam_prev = sp.sobolev_norm(primary.g(t), 3, alpha) ** 2
    eps_t = 1e-12 * max(1.0, params.t_end)
    while t < params.t_end - eps_t:
        try:
            dt = min(cfl_dt(r.theta(t), params, exponent) for r in routes.values())
            dt = min(dt, params.t_end - t)
            for r in routes.values():
                r.advance(t, dt)
            t_new = t + dt
            for name, r in routes.items():
                if not np.all(np.isfinite(r.field.coeffs)):
                    raise BlowUpError(f"non-finite coefficients ({name})", t_new, nstep + 1)
                th_new = r.theta(t_new)
                # the coefficient sum bounds the sup; sample only when it might exceed
                if float(np.abs(th_new.coeffs).sum()) > limit and sp.lebesgue_norm(th_new, np.inf) > limit:
                    raise BlowUpError(f"sup norm exceeded {params.blowup_factor:g} x initial ({name})", t_new, nstep + 1)
                if sp.tail_fraction(r.field) > params.tail_tol:
                    r.tail_strikes += 1
                    if r.tail_strikes >= params.tail_patience:
                        raise BlowUpError(
                            f"tail fraction above {params.tail_tol:g} for {params.tail_patience} steps ({name})",
                            t_new, nstep + 1,
                        )
                else:
                    r.tail_strikes = 0
        except BlowUpError as exc:
            log.warning("blow-up: %s", exc)
            traj.blowup = {"reason": exc.reason, "t": exc.t, "step": exc.step,
                           "last_healthy_t": healthy[next(iter(healthy))].t}
            traj.final = healthy
            traj.steps = nstep
            return traj
        lam = sp.sobolev_norm(primary.g(t_new), 3, alpha) ** 2
        traj.dissipation_integral += half_mu * 0.5 * dt * (lam_prev + lam)
        lam_prev = lam
        t, nstep = t_new, nstep + 1
        if nstep % params.sample_every == 0 or t >= params.t_end - eps_t:
            record()
        healthy = snapshot()
    traj.final = healthy
    traj.steps = nstep
    if params.ledger or params.linear_only:
        fill_ledger_residuals(traj)
    return traj


def fill_ledger_residuals(traj: Trajectory) -> None:
    try:
        rep = ledger_consistency(traj.records, traj.recipe.mu)
    except SamplingError:
        return
    for rec, res in zip(traj.records, rep.residual):
        rec.ledger_residual = float(res / rep.scale) if rep.scale else 0.0

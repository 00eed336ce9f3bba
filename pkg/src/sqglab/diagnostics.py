"""Energy ledger, a-priori bound check and per-sample diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import spectral as sp
from .data import Background, DataRecipe, VerificationParams
from .spectral import SpectralField

CSV_COLUMNS = (
    "t",
    "l2_g_sq",
    "h3_g_sq",
    "lam_alpha_h3_g_sq",
    "dissipation_integral",
    "linf_theta",
    "linf_u",
    "h3_forcing",
    "i1",
    "i2",
    "i3",
    "i4",
    "ledger_residual",
    "tail_fraction",
    "paired_discrepancy",
    "rhs_l2",
)


class SamplingError(ValueError):
    pass


@dataclass
class DiagnosticsRecord:
    t: float
    l2_g_sq: float
    h3_g_sq: float
    lam_alpha_h3_g_sq: float
    dissipation_integral: float
    linf_theta: float
    linf_u: float
    h3_forcing: float
    i1: float
    i2: float
    i3: float
    i4: float
    ledger_residual: float | None
    tail_fraction: float
    paired_discrepancy: float | None
    rhs_l2: float

    def row(self) -> list[str]:
        return ["" if getattr(self, c) is None else repr(float(getattr(self, c))) for c in CSV_COLUMNS]

    @classmethod
    def from_row(cls, row: dict) -> "DiagnosticsRecord":
        kw = {}
        for f in fields(cls):
            raw = row.get(f.name, "")
            kw[f.name] = None if raw in ("", None) else float(raw)
        return cls(**kw)


class LedgerTerms(NamedTuple):
    i1: float
    i2: float
    i3: float
    i4: float
    rhs_l2: float
    transport_v: float
    transport_u: float


def energy_ledger(
    g: SpectralField, recipe: DataRecipe, t: float, background: Background | None = None
) -> LedgerTerms:
    """Right side of the H^3 energy identity split into its four pieces.

    ``i1..i4`` sum over ``1 <= |beta| <= 3``; ``rhs_l2`` is the ``beta = 0``
    level, from which the two transport integrals (returned separately)
    cancel.
    """
    grid = g.grid
    bg = background or Background(recipe, grid)
    b = bg.fields(t)
    v = sp.velocity_from_scalar(g, recipe.velocity_exponent)
    dg = sp.gradient(g)
    v1, v2 = v.u1.to_physical(), v.u2.to_physical()
    g1, g2 = dg.u1.to_physical(), dg.u2.to_physical()
    w = sp.sobolev_weight(grid, 3, skip_zero=True)

    def product(phys: np.ndarray) -> SpectralField:
        return sp.dealias(SpectralField.from_physical(grid, phys))

    v_g = product(v1 * g1 + v2 * g2)
    u_g = product(b.u1 * g1 + b.u2 * g2)
    v_th = product(v1 * b.d1 + v2 * b.d2)
    u_th = -bg.forcing(t)
    return LedgerTerms(
        i1=-sp.inner(v_g, g, w),
        i2=-sp.inner(u_g, g, w),
        i3=-sp.inner(v_th, g, w),
        i4=-sp.inner(u_th, g, w),
        rhs_l2=-sp.inner(v_th + u_th, g),
        transport_v=sp.inner(v_g, g),
        transport_u=sp.inner(u_g, g),
    )


def sample_record(
    t: float,
    g: SpectralField,
    bg: Background,
    *,
    dissipation_integral: float,
    with_ledger: bool = True,
    paired_discrepancy: float | None = None,
) -> DiagnosticsRecord:
    recipe = bg.recipe
    b = bg.fields(t)
    forcing = bg.forcing(t)
    if with_ledger:
        led = energy_ledger(g, recipe, t, bg)
    else:
        led = LedgerTerms(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    return DiagnosticsRecord(
        t=t,
        l2_g_sq=sp.lebesgue_norm(g) ** 2,
        h3_g_sq=sp.sobolev_norm(g, 3) ** 2,
        lam_alpha_h3_g_sq=sp.sobolev_norm(g, 3, recipe.alpha) ** 2,
        dissipation_integral=dissipation_integral,
        linf_theta=float(np.abs(b.theta.to_physical()).max()),
        linf_u=float(np.sqrt(b.u1**2 + b.u2**2).max()),
        h3_forcing=sp.sobolev_norm(forcing, 3),
        i1=led.i1,
        i2=led.i2,
        i3=led.i3,
        i4=led.i4,
        ledger_residual=None,
        tail_fraction=sp.tail_fraction(g),
        paired_discrepancy=paired_discrepancy,
        rhs_l2=led.rhs_l2,
    )


@dataclass
class LedgerReport:
    max_rel: float
    mean_rel: float
    scale: float
    residual: np.ndarray
    spacing: float


def finite_difference(t: np.ndarray, y: np.ndarray, order: int = 4) -> np.ndarray:
    """First derivative of samples ``y(t)`` accurate to ``O(h^order)``.

    Each point uses the ``order + 1`` nearest samples: a centred stencil in
    the interior, shifted one-sided stencils at the ends. Weights come from
    the Taylor (Vandermonde) system, so uneven spacing is allowed.
    """
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    width = order + 1
    if len(t) < width:
        raise SamplingError(f"need at least {width} samples for an order-{order} derivative")
    rhs = np.zeros(width)
    rhs[1] = 1.0
    out = np.empty(len(t))
    for i in range(len(t)):
        lo = min(max(i - width // 2, 0), len(t) - width)
        idx = np.arange(lo, lo + width)
        d = t[idx] - t[i]
        h = np.abs(d).max()
        weights = np.linalg.solve(np.vander(d / h, width, increasing=True).T, rhs) / h
        out[i] = weights @ y[idx]
    return out


def ledger_consistency(
    records: Sequence[DiagnosticsRecord],
    mu: float,
    stride: int = 1,
    max_spacing: float = 0.01,
    order: int = 4,
) -> LedgerReport:
    """Residual of ``d/dt (1/2)||g||_{H^3}^2 + mu ||Lambda^alpha g||_{H^3}^2 = sum I + rhs_l2``.

    The time derivative is a finite difference of the given order over the
    samples (central inside, one-sided at the ends); ``order=2`` matches
    ``np.gradient(..., edge_order=2)``. Residuals are normalised by the
    largest magnitude of any single term over the whole trajectory.
    """
    recs = list(records)[::stride]
    if len(recs) < order + 1:
        raise SamplingError(f"need at least {order + 1} samples for the ledger check")
    t = np.array([r.t for r in recs])
    spacing = float(np.max(np.diff(t)))
    if spacing > max_spacing * (1 + 1e-9):
        raise SamplingError(f"sampling interval {spacing:.4g} exceeds {max_spacing}")
    energy = 0.5 * np.array([r.h3_g_sq for r in recs])
    ddt = finite_difference(t, energy, order)
    dissip = mu * np.array([r.lam_alpha_h3_g_sq for r in recs])
    terms = np.array([[r.i1, r.i2, r.i3, r.i4, r.rhs_l2] for r in recs])
    residual = np.abs(ddt + dissip - terms.sum(axis=1))
    scale = float(np.max(np.abs(np.column_stack([ddt, dissip, terms]))))
    if scale == 0:
        rel = np.zeros_like(residual)
    else:
        rel = residual / scale
    return LedgerReport(float(rel.max()), float(rel.mean()), scale, residual, spacing)


@dataclass
class BoundResult:
    passed: bool
    margin: float
    bound: float
    running_sup: np.ndarray


def bound_quantity(records: Iterable[DiagnosticsRecord]) -> np.ndarray:
    return np.array([r.h3_g_sq + r.dissipation_integral for r in records])


def theorem_bound_check(
    records: Sequence[DiagnosticsRecord], vp: VerificationParams = VerificationParams()
) -> BoundResult:
    """``||g||_{H^3}^2 + (mu/2) int ||Lambda^alpha g||_{H^3}^2 <= (C + 1) eps`` at every sample."""
    q = bound_quantity(records)
    bound = (vp.c_universal + 1.0) * vp.epsilon
    sup = np.maximum.accumulate(q) if len(q) else q
    worst = float(sup[-1]) if len(sup) else 0.0
    return BoundResult(worst <= bound, bound - worst, bound, sup)

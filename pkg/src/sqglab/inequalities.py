"""Empirical constants for the commutator and interpolation inequalities.

Every trial evaluates both sides of an inequality on band-limited fields and
reports the ratio ``lhs / rhs``. Inputs must live inside the dealias block,
so products are computed exactly on a grid refined by a factor of two
(zero padding) and all L2 norms there are exact. Sup norms are sampled on
the same refined grid.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import spectral as sp
from .spectral import Grid, SpectralField

LAB_GRID = Grid(128, 8.0 * np.pi)
KINDS = ("kato_ponce", "leibniz", "gn")
GN_ALPHAS = (0.0, 0.1, 0.25, 0.4)
PAD = 2


class DegenerateTrialError(ValueError):
    """Right-hand side vanishes, so no ratio can be formed."""


@dataclass(frozen=True)
class InequalityTrial:
    kind: str
    seed: int
    param: float
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs

    def row(self) -> list:
        return [self.kind, self.seed, repr(self.param), repr(self.lhs), repr(self.rhs), repr(self.ratio)]


CSV_HEADER = ("trial_kind", "seed", "m_or_alpha", "lhs", "rhs", "ratio")


def _require_band_limited(*fields: SpectralField) -> None:
    for f in fields:
        if np.any(f.coeffs[~f.grid.dealias_mask]):
            raise ValueError("trial fields must be supported inside the dealias block")


def _padded(f: SpectralField) -> SpectralField:
    big = Grid(f.grid.n * PAD, f.grid.box_len)
    return SpectralField(big, sp.upsampled_coeffs(f, PAD))


def _l2(phys: np.ndarray, grid: Grid) -> float:
    """Exact L2 norm of a trigonometric polynomial resolved by ``grid``."""
    return float(np.sqrt(np.sum(phys**2) * grid.dx**2))


def _sup_grad(f: SpectralField) -> float:
    return sp.vector_sup(sp.gradient(f), PAD)


def _sup_jet(f: SpectralField, order: int) -> float:
    """Sampled sup of ``(sum_{|beta|=order} |D^beta f|^2)^{1/2}``."""
    acc = 0.0
    for beta in sp.multi_indices(order):
        acc = acc + sp.sample(sp.derivative(f, beta), PAD) ** 2
    return float(np.sqrt(acc).max())


def _commutator_norms(
    h: SpectralField, f: SpectralField, betas: Iterable[tuple[int, int]], move_h: bool
) -> float:
    """Sum over ``betas`` of ``||D^b(hf) - X||_L2`` with ``X = (D^b h) f`` when
    ``move_h`` and ``X = h D^b f`` otherwise."""
    hp, fp = _padded(h), _padded(f)
    big = hp.grid
    h_phys, f_phys = hp.to_physical(), fp.to_physical()
    prod = SpectralField.from_physical(big, h_phys * f_phys)
    total = 0.0
    for beta in betas:
        full = sp.derivative(prod, beta).to_physical()
        if move_h:
            other = sp.derivative(hp, beta).to_physical() * f_phys
        else:
            other = h_phys * sp.derivative(fp, beta).to_physical()
        total += _l2(full - other, big)
    return total


def _check_rhs(rhs: float) -> float:
    if not rhs > 0 or not np.isfinite(rhs):
        raise DegenerateTrialError(f"degenerate right-hand side {rhs!r}")
    return rhs


def kato_ponce_lhs(h: SpectralField, f: SpectralField, m: int = 3) -> float:
    betas = [b for order in range(1, m + 1) for b in sp.multi_indices(order)]
    return _commutator_norms(h, f, betas, move_h=True)


def leibniz_lhs(h: SpectralField, f: SpectralField, m: int = 3) -> float:
    return _commutator_norms(h, f, sp.multi_indices(m), move_h=False)


def kato_ponce_trial(h: SpectralField, f: SpectralField, m: int = 3, seed: int = -1) -> InequalityTrial:
    """``sum_{|b|<=m} ||D^b(hf) - (D^b h) f||_L2`` against
    ``||h||_{H^{m-1}} ||grad f||_inf + ||h||_inf ||f||_{H^m}``.

    The ``b = 0`` commutator vanishes identically, so the sum starts at 1.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    _require_band_limited(h, f)
    lhs = kato_ponce_lhs(h, f, m)
    rhs = sp.sobolev_norm(h, m - 1) * _sup_grad(f) + sp.lebesgue_norm(h, np.inf, PAD) * sp.sobolev_norm(f, m)
    return InequalityTrial("kato_ponce", seed, float(m), lhs, _check_rhs(rhs))


def leibniz_commutator_trial(h: SpectralField, f: SpectralField, m: int = 3, seed: int = -1) -> InequalityTrial:
    """``sum_{|b|=m} ||D^b(hf) - h D^b f||_L2`` against
    ``(||grad h||_inf + ||grad^m h||_inf) ||f||_{H^{m-1}}``."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    _require_band_limited(h, f)
    lhs = leibniz_lhs(h, f, m)
    rhs = (_sup_grad(h) + _sup_jet(h, m)) * sp.sobolev_norm(f, m - 1)
    return InequalityTrial("leibniz", seed, float(m), lhs, _check_rhs(rhs))


def _lambda_l2(g: SpectralField, s: float) -> float:
    return float(np.sqrt(g.grid.area * np.sum(g.grid.kpow(2.0 * s) * np.abs(g.coeffs) ** 2)))


def gn_trial(g: SpectralField, alpha: float, seed: int = -1) -> tuple[InequalityTrial, InequalityTrial]:
    """Two interpolation ratios for ``g``.

    ``||grad g||_inf`` against ``||L^a g||^{(a+1)/3} ||L^{a+3} g||^{(2-a)/3}``
    and ``max_{|b|=3} ||D^b g||_L2`` against
    ``||L^a g||^{a/3} ||L^{a+3} g||^{1-a/3}`` where ``L = (-Lap)^{1/2}``.
    """
    if not 0.0 <= alpha < 0.5:
        raise ValueError(f"alpha must lie in [0, 1/2), got {alpha}")
    if not np.any(g.coeffs):
        raise DegenerateTrialError("gn_trial needs a nonzero field")
    _require_band_limited(g)
    low, high = _lambda_l2(g, alpha), _lambda_l2(g, alpha + 3.0)
    grad_rhs = low ** ((alpha + 1.0) / 3.0) * high ** ((2.0 - alpha) / 3.0)
    dbeta_rhs = low ** (alpha / 3.0) * high ** (1.0 - alpha / 3.0)
    dbeta = max(sp.lebesgue_norm(sp.derivative(g, b)) for b in sp.multi_indices(3))
    return (
        InequalityTrial("gn_grad", seed, alpha, _sup_grad(g), _check_rhs(grad_rhs)),
        InequalityTrial("gn_dbeta", seed, alpha, dbeta, _check_rhs(dbeta_rhs)),
    )


def trial_fields(kind: str, seed: int, grid: Grid = LAB_GRID) -> tuple[SpectralField, ...]:
    """Seeded random inputs: white coefficients on the dealias block, and an
    annulus-supported ``h`` for the Leibniz trial."""
    rng = np.random.default_rng(seed)
    if kind == "gn":
        return (sp.random_field(grid, rng),)
    h_mask = sp.annulus_mask(grid) if kind == "leibniz" else None
    return sp.random_field(grid, rng, h_mask), sp.random_field(grid, rng)


def run_trial(kind: str, seed: int, grid: Grid = LAB_GRID, m: int = 3, scale: float = 1.0) -> list[InequalityTrial]:
    """One seeded trial of ``kind``; ``scale`` multiplies every input."""
    inputs = [scale * f for f in trial_fields(kind, seed, grid)]
    if kind == "kato_ponce":
        return [kato_ponce_trial(*inputs, m=m, seed=seed)]
    if kind == "leibniz":
        return [leibniz_commutator_trial(*inputs, m=m, seed=seed)]
    if kind == "gn":
        out = []
        for alpha in GN_ALPHAS:
            out.extend(gn_trial(inputs[0], alpha, seed=seed))
        return out
    raise ValueError(f"unknown trial kind {kind!r}; choose from {KINDS}")


def rescale_defect(kind: str, seed: int, factor: float = 7.25, grid: Grid = LAB_GRID, m: int = 3) -> float:
    """Largest relative ratio change when every input is multiplied by ``factor``."""
    base = run_trial(kind, seed, grid, m)
    scaled = run_trial(kind, seed, grid, m, scale=factor)
    return max(abs(a.ratio - b.ratio) / abs(a.ratio) for a, b in zip(base, scaled))


def run_lab(
    kind: str,
    seeds: Sequence[int],
    grid: Grid = LAB_GRID,
    m: int = 3,
    check_rescale: bool = False,
    rescale_tol: float = 1e-12,
    progress: Callable[[int], None] | None = None,
) -> list[InequalityTrial]:
    """Run ``kind`` over ``seeds``; optionally assert rescale invariance per trial."""
    trials: list[InequalityTrial] = []
    for seed in seeds:
        got = run_trial(kind, seed, grid, m)
        if check_rescale:
            scaled = run_trial(kind, seed, grid, m, scale=7.25)
            for a, b in zip(got, scaled):
                drift = abs(a.ratio - b.ratio) / abs(a.ratio)
                if drift > rescale_tol:
                    raise AssertionError(
                        f"{a.kind} seed {seed}: ratio changed by {drift:.3g} under rescaling"
                    )
        trials.extend(got)
        if progress:
            progress(seed)
    return trials


def summarize(trials: Iterable[InequalityTrial]) -> dict[str, dict]:
    """Per ``kind`` (and per parameter) max, mean and standard deviation of ratios."""
    groups: dict[str, list[float]] = {}
    for t in trials:
        groups.setdefault(f"{t.kind}[{t.param:g}]", []).append(t.ratio)
    out = {}
    for key, vals in sorted(groups.items()):
        arr = np.array(vals)
        out[key] = {
            "count": int(arr.size),
            "max": float(arr.max()),
            "mean": float(arr.mean()),
            "std": float(arr.std()),
            "finite": bool(np.all(np.isfinite(arr))),
        }
    return out


def write_csv(path: str | Path, trials: Iterable[InequalityTrial]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for t in trials:
            w.writerow(t.row())


def write_summary(path: str | Path, trials: Iterable[InequalityTrial]) -> dict:
    summary = summarize(trials)
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def to_dict(trial: InequalityTrial) -> dict:
    d = asdict(trial)
    d["ratio"] = trial.ratio
    return d

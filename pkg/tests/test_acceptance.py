"""Acceptance criteria 1-10.

Each test prints a single ``criterion N: PASS|FAIL ...`` line and then
asserts. Criteria 4, 5 and 10 share one paired run; 8 and 10 share one
long perturbation run. The whole module takes roughly 25 minutes on one
core.
"""

import math
import time

import numpy as np
import pytest

from sqglab import cli
from sqglab import inequalities as ineq
from sqglab import spectral as sp
from sqglab.config import from_mapping
from sqglab.data import (
    PRIMARY_BOUNDS,
    DataRecipe,
    VerificationParams,
    build_family,
    corollary_bounds,
    corollary_grid,
    evaluate_condition,
)
from sqglab.diagnostics import ledger_consistency, theorem_bound_check
from sqglab.evolution import SimParams, nonlinear_full, nonlinear_perturbation, run
from sqglab.spectral import Grid

from conftest import band_limited, convolution_advection

pytestmark = pytest.mark.slow

PAIRED_RUN = {
    "grid.n": "256",
    "grid.box_len": "48*pi",
    "recipe.delta": "0.05",
    "recipe.alpha": "0.25",
    "recipe.mu": "1",
    "recipe.g0": "zero",
    "sim.mode": "paired",
    "sim.dt_max": "0.005",
    "sim.t_end": "10",
    "sim.sample_every": "1",
}

# dk = 1/56 keeps the annulus inside the dealiased band at n = 256 while
# admitting off-diagonal strip modes, so the background forcing is nonzero
LONG_RUN = {
    "grid.n": "256",
    "grid.box_len": "112*pi",
    "recipe.delta": "0.02",
    "recipe.alpha": "0.25",
    "recipe.mu": "1",
    "recipe.g0": "random",
    "recipe.g0_h3_sq": "0.05",
    "seed": "1",
    "sim.mode": "perturbation",
    "sim.dt_max": "0.01",
    "sim.t_end": "50",
    "sim.sample_every": "10",
}


@pytest.fixture
def verdict(capsys):
    def emit(number: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, f"criterion {number}: {detail}"

    return emit


def _timed_simulate(mapping, out):
    cfg = from_mapping({**mapping, "output_dir": str(out)})
    start = time.perf_counter()
    traj, meta = cli.simulate(cfg)
    return cfg, traj, meta, time.perf_counter() - start


@pytest.fixture(scope="module")
def paired_run(tmp_path_factory):
    return _timed_simulate(PAIRED_RUN, tmp_path_factory.mktemp("paired_a"))


@pytest.fixture(scope="module")
def long_run(tmp_path_factory):
    return _timed_simulate(LONG_RUN, tmp_path_factory.mktemp("long_a"))


def test_criterion_1_linear_exactness(verdict):
    grid = Grid(64, 2 * np.pi)
    worst, slowest = 0.0, 0.0
    for alpha in (0.0, 0.25, 0.4):
        recipe = DataRecipe(background="modes", modes=((3, 4, 0.2),), mu=0.3, alpha=alpha)
        start = time.perf_counter()
        params = SimParams(dt_max=0.01, t_end=5.0, mode="full", linear_only=True, sample_every=50)
        traj = run(recipe, grid, params)
        slowest = max(slowest, time.perf_counter() - start)
        got = traj.final["full_theta"].field.coeffs[3, 4]
        exact = 0.2 * math.exp(-0.3 * 5.0 ** (2 * alpha) * 5.0)
        worst = max(worst, abs(got - exact) / exact)
    verdict(1, worst <= 1e-8 and slowest < 1.0, f"max rel error {worst:.2e}, slowest run {slowest:.2f} s")


def test_criterion_2_nonlinearity_oracle(verdict):
    grid = Grid(32, 2 * np.pi)
    rng = np.random.default_rng(2024)
    worst = 0.0
    start = time.perf_counter()
    for _ in range(20):
        th = band_limited(grid, rng)
        u = sp.velocity_from_scalar(th)
        oracle = -convolution_advection(u.u1, u.u2, th).coeffs
        worst = max(worst, np.abs(nonlinear_full(th).coeffs - oracle).max() / np.abs(oracle).max())

        js = rng.integers(-10, 11, size=(4, 2))
        amps = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        modes = tuple((int(a), int(b), complex(c)) for (a, b), c in zip(js, amps) if (a, b) != (0, 0))
        recipe = DataRecipe(background="modes", modes=modes, mu=0.5)
        bg_theta = build_family(recipe, grid).theta0
        g = band_limited(grid, rng)
        v, U = sp.velocity_from_scalar(g), sp.velocity_from_scalar(bg_theta)
        oracle = -(
            convolution_advection(v.u1, v.u2, g)
            + convolution_advection(U.u1, U.u2, g)
            + convolution_advection(v.u1, v.u2, bg_theta)
        ).coeffs
        got = nonlinear_perturbation(g, recipe, 0.0).coeffs
        worst = max(worst, np.abs(got - oracle).max() / np.abs(oracle).max())
    elapsed = time.perf_counter() - start
    verdict(2, worst <= 1e-10 and elapsed < 30, f"max rel deviation {worst:.2e} over 20+20 states, {elapsed:.1f} s")


def test_criterion_3_conservation(verdict):
    grid = Grid(256, 2 * np.pi)
    modes = ((1, 2, 0.3), (-2, 1, 0.2), (3, 1, 0.1), (1, -3, 0.15), (4, 0, 0.1))
    recipe = DataRecipe(background="modes", modes=modes, mu=0.0)
    start = time.perf_counter()
    traj = run(recipe, grid, SimParams(dt_max=0.01, t_end=2.0, mode="full", ledger=False))
    elapsed = time.perf_counter() - start
    final = traj.final["full_theta"].field
    l2_0 = sp.lebesgue_norm(build_family(recipe, grid).theta0)
    drift = abs(sp.lebesgue_norm(final) / l2_0 - 1.0)
    zero_mode = final.coeffs[0, 0]
    ok = traj.blowup is None and drift <= 1e-6 and zero_mode == 0 and elapsed < 120
    verdict(3, ok, f"L2 drift {drift:.2e}, zero mode {abs(zero_mode)}, {elapsed:.1f} s")


def test_criterion_4_two_route_consistency(paired_run, verdict):
    _, traj, meta, elapsed = paired_run
    scale = math.sqrt(traj.max_h3_g_sq)
    disc = traj.max_paired_discrepancy
    ok = traj.blowup is None and disc <= 1e-6 * scale and elapsed < 300
    verdict(4, ok, f"max discrepancy {disc:.3e} vs 1e-6 x {scale:.3e}, {elapsed:.0f} s")


def test_criterion_5_ledger_identity(paired_run, verdict):
    cfg, traj, _, _ = paired_run
    mu = cfg.recipe.mu
    coarse = ledger_consistency(traj.records, mu, stride=2)  # interval 0.01
    fine = ledger_consistency(traj.records, mu, stride=1)  # interval 0.005
    gain = coarse.max_rel / fine.max_rel
    # second-order differencing, reported for comparison only
    c2 = ledger_consistency(traj.records, mu, stride=2, order=2).max_rel
    f2 = ledger_consistency(traj.records, mu, stride=1, order=2).max_rel
    ok = coarse.max_rel <= 1e-3 and gain >= 3.5
    verdict(5, ok, f"max rel residual {coarse.max_rel:.2e} at 0.01, {fine.max_rel:.2e} at 0.005 "
                   f"(gain {gain:.1f}); order-2 stencil: {c2:.2e} / {f2:.2e}")


def test_criterion_6_corollary_bounds(verdict):
    lines, ok = [], True
    for delta in (0.1, 0.05, 0.02):
        grid = corollary_grid(delta)
        start = time.perf_counter()
        rep = corollary_bounds(DataRecipe(delta=delta), grid, strict=True)
        elapsed = time.perf_counter() - start
        primary = [rep.get(name) for name in PRIMARY_BOUNDS]
        passed = all(b.passed for b in primary) and grid.dk <= delta / 6 * (1 + 1e-12)
        ok &= passed and elapsed < 10
        worst = min(b.computed / b.required for b in primary)
        lines.append(f"delta={delta}: min computed/required {worst:.3g}, {elapsed:.1f} s")
    verdict(6, ok, "; ".join(lines))


def test_criterion_7_condition_trend(verdict):
    deltas = (0.1, 0.05, 0.02, 0.01)
    vp = VerificationParams(c_universal=1.0)
    lhs = [evaluate_condition(DataRecipe(delta=d, g0="zero"), corollary_grid(d), vp).lhs for d in deltas]
    ok = all(b < a for a, b in zip(lhs, lhs[1:]))
    scaling = [math.sqrt(d) * math.log(d) ** 2 for d in deltas]
    # the reference profile itself peaks near delta = e^-4, so lhs / ref is reported as well
    detail = ", ".join(f"{d}: {v:.3e} (lhs/ref {v / s:.3e})" for d, v, s in zip(deltas, lhs, scaling))
    verdict(7, ok, f"lhs by delta {detail}")


def test_criterion_8_boundedness(long_run, verdict):
    cfg, traj, _, elapsed = long_run
    cond = evaluate_condition(cfg.recipe, cfg.grid, cfg.verify)
    bound = theorem_bound_check(traj.records, VerificationParams(c_universal=1.0, epsilon=cfg.verify.epsilon))
    worst = float(bound.running_sup[-1])
    tail = traj.max_tail_fraction
    forcing = max(r.h3_forcing for r in traj.records)
    ok = (cond.passed and traj.blowup is None and worst <= 2 * cfg.verify.epsilon
          and tail <= 1e-6 and elapsed < 1800)
    verdict(8, ok, f"condition lhs {cond.lhs:.3e}, sup bound quantity {worst:.3e} <= {2 * cfg.verify.epsilon}, "
                   f"max tail {tail:.1e}, max forcing {forcing:.2e}, {elapsed:.0f} s")


def test_criterion_9_inequality_lab(verdict):
    start = time.perf_counter()
    first = {k: ineq.run_lab(k, range(0, 100), check_rescale=True) for k in ineq.KINDS}
    second = {k: ineq.run_lab(k, range(100, 200), check_rescale=True) for k in ineq.KINDS}
    elapsed = time.perf_counter() - start
    a = ineq.summarize(t for v in first.values() for t in v)
    b = ineq.summarize(t for v in second.values() for t in v)
    spread = {key: abs(a[key]["max"] / b[key]["max"] - 1.0) for key in a}
    finite = all(s["finite"] for s in (*a.values(), *b.values()))
    worst_key = max(spread, key=spread.get)
    ok = finite and max(spread.values()) <= 0.2 and elapsed < 300
    verdict(9, ok, f"{len(a)} ratio groups finite and rescale-invariant, worst max spread "
                   f"{spread[worst_key]:.1%} ({worst_key}), {elapsed:.0f} s")


def test_criterion_10_determinism(paired_run, long_run, tmp_path, verdict):
    names = {
        "paired": ("trajectory.csv", "final_full_theta.sqgf", "final_perturbation_g.sqgf"),
        "long": ("trajectory.csv", "final_perturbation_g.sqgf"),
    }
    mismatched = []
    for key, first, mapping in (("paired", paired_run, PAIRED_RUN), ("long", long_run, LONG_RUN)):
        first_dir = first[0].output_dir
        again = tmp_path / key
        _timed_simulate(mapping, again)
        for name in names[key]:
            if (first_dir / name).read_bytes() != (again / name).read_bytes():
                mismatched.append(f"{key}/{name}")
    verdict(10, not mismatched, "bitwise identical CSVs and checkpoints" if not mismatched
            else f"differing files: {mismatched}")

"""Command-line front end.

Commands::

    sqglab verify-data  [-c FILE] [--key value ...]
    sqglab simulate     [-c FILE] [--resume DIR] [--figures] [--key value ...]
    sqglab sweep        SPEC [--no-simulate] [--figures] [--key value ...]
    sqglab ineq-lab     [-c FILE] --kind {kato_ponce,leibniz,gn} [--trials N]
    sqglab ledger       RUN_DIR [--stride K] [--order P] [--tol X]

Any dotted config key can be given as a flag (``--recipe.delta 0.02``).
Exit status: 0 pass, 1 condition or bound failure, 2 blow-up, 3 bad
configuration or input.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

from . import checkpoint
from . import inequalities as ineq
from .config import ConfigError, ExperimentConfig, from_mapping, load_config, load_sweep
from .data import RecipeError, ResolutionError, corollary_bounds, evaluate_condition
from .diagnostics import CSV_COLUMNS, DiagnosticsRecord, SamplingError, ledger_consistency, theorem_bound_check
from .evolution import SimState, Trajectory, run

log = logging.getLogger("sqglab")

EXIT_PASS, EXIT_FAIL, EXIT_BLOWUP, EXIT_CONFIG = 0, 1, 2, 3
ROUTES = {"full": ("full_theta",), "perturbation": ("perturbation_g",), "paired": ("full_theta", "perturbation_g")}


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors (exit 3), not blow-ups (2)."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def parse_overrides(extra: Sequence[str]) -> dict[str, str]:
    """Turn ``--a.b 1 --c=2`` into ``{"a.b": "1", "c": "2"}``."""
    out: dict[str, str] = {}
    items = list(extra)
    i = 0
    while i < len(items):
        tok = items[i]
        if not tok.startswith("--") or len(tok) == 2:
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            if i + 1 >= len(items):
                raise ConfigError(f"{key}: missing value")
            i += 1
            value = items[i]
        out[key] = value
        i += 1
    return out


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _say(line: str) -> None:
    print(line, flush=True)


# verify-data ---------------------------------------------------------------


def verify(cfg: ExperimentConfig) -> tuple[dict, dict | None]:
    cond = evaluate_condition(cfg.recipe, cfg.grid, cfg.verify)
    bounds = None
    if cfg.recipe.background == "corollary":
        bounds = corollary_bounds(cfg.recipe, cfg.grid, strict=False).to_dict()
    return cond.to_dict(), bounds


def cmd_verify_data(cfg: ExperimentConfig) -> int:
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    cond, bounds = verify(cfg)
    _write_json(out / "condition.json", cond)
    _say(f"condition: lhs={cond['lhs']:.6e} eps={cond['eps']:g} pass={cond['pass']}")
    if bounds is not None:
        _write_json(out / "bounds.json", bounds)
        for b in bounds["bounds"]:
            _say(f"bound {b['name']}: computed={b['computed']:.6e} required={b['required']:.6e} pass={b['pass']}")
    return EXIT_PASS if cond["pass"] else EXIT_FAIL


# simulate ------------------------------------------------------------------


def write_trajectory_csv(path: Path, records: Sequence[DiagnosticsRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow(r.row())


def read_trajectory_csv(path: Path) -> list[DiagnosticsRecord]:
    with open(path, newline="") as fh:
        return [DiagnosticsRecord.from_row(row) for row in csv.DictReader(fh)]


def _save_states(out: Path, states: dict[str, SimState], dissipation_integral: float, prefix: str) -> list[str]:
    names = []
    for route, st in sorted(states.items()):
        name = f"{prefix}_{route}.sqgf"
        meta = {"t": st.t, "step": st.step, "mode": route, "dissipation_integral": dissipation_integral}
        checkpoint.save(out / name, st.field, meta)
        names.append(name)
    return names


def load_resume(cfg: ExperimentConfig, src: Path) -> tuple[dict[str, SimState], float, list[DiagnosticsRecord]]:
    """States, dissipation integral and earlier samples from a run directory."""
    states: dict[str, SimState] = {}
    dissipation = 0.0
    for route in ROUTES[cfg.sim.mode]:
        path = src / f"final_{route}.sqgf"
        if not path.exists():
            raise ConfigError(f"--resume: {path} not found (sim.mode={cfg.sim.mode})")
        try:
            field, meta = checkpoint.load(path)
        except checkpoint.CheckpointError as exc:
            raise ConfigError(f"--resume: {path}: {exc}") from None
        if field.grid != cfg.grid:
            raise ConfigError(f"--resume: checkpoint grid {field.grid} differs from config grid {cfg.grid}")
        states[route] = SimState(float(meta["t"]), route, field, cfg.recipe, int(meta["step"]))
        dissipation = float(meta.get("dissipation_integral", 0.0))
    times = {s.t for s in states.values()}
    if len(times) != 1:
        raise ConfigError("--resume: checkpoints are at different times")
    t0 = times.pop()
    prior = []
    csv_path = src / "trajectory.csv"
    if csv_path.exists():
        prior = [r for r in read_trajectory_csv(csv_path) if r.t <= t0]
    return states, dissipation, prior


def simulate(cfg: ExperimentConfig, resume: Path | None = None) -> tuple[Trajectory, dict]:
    """Run and write ``trajectory.csv``, ``run.json`` and checkpoints."""
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    kwargs = {}
    if resume is not None:
        states, dissipation, prior = load_resume(cfg, resume)
        kwargs = {"resume": states, "dissipation_integral": dissipation, "prior_records": prior}
    traj = run(cfg.recipe, cfg.grid, cfg.sim, **kwargs)
    write_trajectory_csv(out / "trajectory.csv", traj.records)
    prefix = "healthy" if traj.blowup else "final"
    ckpts = _save_states(out, traj.final, traj.dissipation_integral, prefix)
    bound = theorem_bound_check(traj.records, cfg.verify) if traj.records else None
    meta = {
        "config": cfg.to_flat(),
        "mu": cfg.recipe.mu,
        "alpha": cfg.recipe.alpha,
        "steps": traj.steps,
        "samples": len(traj.records),
        "t_final": next(iter(traj.final.values())).t if traj.final else None,
        "dissipation_integral": traj.dissipation_integral,
        "max_h3_g_sq": traj.max_h3_g_sq,
        "max_tail_fraction": traj.max_tail_fraction,
        "max_paired_discrepancy": traj.max_paired_discrepancy,
        "bound_check": None if bound is None else {"pass": bound.passed, "margin": bound.margin, "bound": bound.bound},
        "blowup": traj.blowup,
        "checkpoints": ckpts,
    }
    _write_json(out / "run.json", meta)
    if traj.blowup:
        _write_json(out / "blowup.json", {**traj.blowup, "checkpoints": ckpts})
    return traj, meta


def cmd_simulate(cfg: ExperimentConfig, resume: Path | None, figures: bool) -> int:
    traj, meta = simulate(cfg, resume)
    out = cfg.output_dir
    _say(f"steps={meta['steps']} samples={meta['samples']} t_final={meta['t_final']}")
    _say(f"max h3_g_sq={meta['max_h3_g_sq']:.6e} max tail={meta['max_tail_fraction']:.3e}")
    if meta["max_paired_discrepancy"] is not None:
        _say(f"max paired discrepancy={meta['max_paired_discrepancy']:.3e}")
    if figures and traj.records:
        from .plotting import trajectory_figure

        bound = (cfg.verify.c_universal + 1.0) * cfg.verify.epsilon
        _say(f"figure: {trajectory_figure(traj.records, out / 'trajectory.png', bound)}")
    if traj.blowup:
        _say(f"blow-up: {traj.blowup['reason']} at t={traj.blowup['t']:.6g}")
        return EXIT_BLOWUP
    if cfg.theorem_mode and meta["bound_check"] and not meta["bound_check"]["pass"]:
        _say(f"bound check failed: margin={meta['bound_check']['margin']:.3e}")
        return EXIT_FAIL
    return EXIT_PASS


# sweep ---------------------------------------------------------------------


def _sweep_job(index: int, label: str, flat: dict[str, str], do_simulate: bool) -> dict:
    row: dict = {"index": index, "label": label, "lhs": "", "pass": "", "max_h3_g_sq": "", "blowup": "", "error": ""}
    try:
        cfg = from_mapping(flat)
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
        cond, bounds = verify(cfg)
        _write_json(cfg.output_dir / "condition.json", cond)
        if bounds is not None:
            _write_json(cfg.output_dir / "bounds.json", bounds)
        row["lhs"] = repr(cond["lhs"])
        row["pass"] = str(cond["pass"]).lower()
        if do_simulate:
            traj, meta = simulate(cfg)
            row["max_h3_g_sq"] = repr(meta["max_h3_g_sq"])
            row["blowup"] = str(traj.blowup is not None).lower()
    except Exception as exc:  # recorded per row; the sweep goes on
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def cmd_sweep(spec_path: Path, overrides: dict[str, str], do_simulate: bool, figures: bool) -> int:
    spec = load_sweep(spec_path, overrides)
    points = spec.points()
    axis_names = [p for p, _ in spec.axes]
    jobs = [(i, label, cfg.to_flat(), do_simulate) for i, (label, cfg) in enumerate(points)]
    if spec.max_parallel == 1:
        rows = [_sweep_job(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=spec.max_parallel) as pool:
            rows = list(pool.map(_sweep_job, *zip(*jobs)))
    for row, (_, cfg) in zip(rows, points):
        flat = cfg.to_flat()
        for name in axis_names:
            row[name] = flat[name]
    base = spec.base.output_dir
    base.mkdir(parents=True, exist_ok=True)
    header = ["index", "label", *axis_names, "lhs", "pass", "max_h3_g_sq", "blowup", "error"]
    with open(base / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=header)
        w.writeheader()
        for row in rows:
            w.writerow({k: row.get(k, "") for k in header})
    for row in rows:
        status = row["error"] or f"lhs={row['lhs']} pass={row['pass']}"
        _say(f"[{row['index']}] {row['label']}: {status}")
    if figures:
        from .plotting import sweep_figure

        _say(f"figure: {sweep_figure(rows, axis_names[0], base / 'sweep.png')}")
    if any(r["error"] for r in rows):
        return EXIT_FAIL
    if any(r["blowup"] == "true" for r in rows):
        return EXIT_BLOWUP
    return EXIT_PASS if all(r["pass"] == "true" for r in rows) else EXIT_FAIL


# ineq-lab ------------------------------------------------------------------


def cmd_ineq_lab(cfg: ExperimentConfig, kind: str, trials: int, rescale_check: bool, figures: bool) -> int:
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    seeds = range(cfg.seed, cfg.seed + trials)
    try:
        results = ineq.run_lab(kind, seeds, check_rescale=rescale_check)
    except AssertionError as exc:
        _say(f"rescale invariance failed: {exc}")
        return EXIT_FAIL
    ineq.write_csv(out / f"ineq_{kind}.csv", results)
    summary = ineq.write_summary(out / f"ineq_{kind}_summary.json", results)
    for key, s in summary.items():
        _say(f"{key}: max={s['max']:.6g} mean={s['mean']:.6g} std={s['std']:.3g} n={s['count']}")
    if figures:
        from .plotting import ratio_figure

        _say(f"figure: {ratio_figure(results, out / f'ineq_{kind}.png')}")
    return EXIT_PASS if all(s["finite"] for s in summary.values()) else EXIT_FAIL


# ledger --------------------------------------------------------------------


def cmd_ledger(run_dir: Path, stride: int, order: int, tol: float) -> int:
    try:
        meta = json.loads((run_dir / "run.json").read_text())
        records = read_trajectory_csv(run_dir / "trajectory.csv")
    except (OSError, ValueError) as exc:
        raise ConfigError(f"{run_dir}: cannot read run outputs ({exc})") from None
    try:
        rep = ledger_consistency(records, float(meta["mu"]), stride=stride, order=order)
    except SamplingError as exc:
        raise ConfigError(f"ledger: {exc}") from None
    report = {"max_rel": rep.max_rel, "mean_rel": rep.mean_rel, "scale": rep.scale,
              "spacing": rep.spacing, "stride": stride, "order": order, "tol": tol,
              "pass": rep.max_rel <= tol}
    _say(json.dumps(report, sort_keys=True))
    return EXIT_PASS if report["pass"] else EXIT_FAIL


# entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sqglab", description="Pseudo-spectral SQG solver and verification harness.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("verify-data", help="evaluate the smallness condition and norm bounds")
    s.add_argument("-c", "--config", type=Path, metavar="FILE", help="flat key = value config file")

    s = sub.add_parser("simulate", help="integrate and write trajectory CSV and checkpoints")
    s.add_argument("-c", "--config", type=Path, metavar="FILE", help="flat key = value config file")
    s.add_argument("--resume", type=Path, metavar="DIR", help="continue from the checkpoints in DIR")
    s.add_argument("--figures", action="store_true", help="also render PNG figures")

    s = sub.add_parser("sweep", help="cartesian sweep over config values")
    s.add_argument("spec", type=Path)
    s.add_argument("--no-simulate", action="store_true", help="only evaluate the condition per point")
    s.add_argument("--figures", action="store_true")

    s = sub.add_parser("ineq-lab", help="empirical inequality constants")
    s.add_argument("-c", "--config", type=Path, metavar="FILE", help="flat key = value config file")
    s.add_argument("--kind", choices=ineq.KINDS, required=True)
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--rescale-check", action="store_true", help="assert amplitude-rescale invariance per trial")
    s.add_argument("--figures", action="store_true")

    s = sub.add_parser("ledger", help="re-check the energy ledger of an existing run")
    s.add_argument("run_dir", type=Path)
    s.add_argument("--stride", type=int, default=1)
    s.add_argument("--order", type=int, default=4)
    s.add_argument("--tol", type=float, default=1e-3)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = parse_overrides(extra)
        if args.command == "sweep":
            return cmd_sweep(args.spec, overrides, not args.no_simulate, args.figures)
        if args.command == "ledger":
            if overrides:
                raise ConfigError(f"ledger takes no config keys, got {sorted(overrides)}")
            return cmd_ledger(args.run_dir, args.stride, args.order, args.tol)
        cfg = load_config(args.config, overrides)
        if args.command == "verify-data":
            return cmd_verify_data(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.resume, args.figures)
        return cmd_ineq_lab(cfg, args.kind, args.trials, args.rescale_check, args.figures)
    except (ConfigError, RecipeError, ResolutionError) as exc:
        print(f"sqglab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

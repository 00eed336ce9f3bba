"""Experiment configuration: flat ``key = value`` text with dotted keys.

Example::

    # corollary run
    grid.n = 256
    grid.box_len = 48*pi
    recipe.delta = 0.05
    sim.mode = paired
    sim.t_end = 10
    sweep.recipe.delta = 0.1, 0.05, 0.02

Numbers accept arithmetic with ``pi`` (``64*pi``, ``pi/2``). Mode lists use
``j1:j2:amp`` triples separated by commas. Every key is checked against the
dataclass it configures; unknown keys and invariant violations are reported
with their full dotted path.
"""

from __future__ import annotations

import ast
import itertools
import math
import operator
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

from .data import DataRecipe, RecipeError, VerificationParams
from .evolution import SimParams
from .spectral import Grid

SECTIONS = {"grid": Grid, "recipe": DataRecipe, "sim": SimParams, "verify": VerificationParams}
TOP_LEVEL = ("output_dir", "seed", "theorem_mode")
DEFAULT_SWEEP_CAP = 256


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending key path."""


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_NAMES = {"pi": math.pi, "e": math.e}


def parse_number(text: str) -> float:
    """Evaluate a small arithmetic expression over numbers, ``pi`` and ``e``."""

    def ev(node: ast.AST) -> float:
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](ev(node.operand))
        raise ValueError(f"not a numeric expression: {text!r}")

    try:
        return ev(ast.parse(text.strip(), mode="eval"))
    except SyntaxError as exc:
        raise ValueError(f"not a numeric expression: {text!r}") from exc


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_modes(text: str) -> tuple:
    out = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        parts = item.split(":")
        if len(parts) != 3:
            raise ValueError(f"mode {item!r} is not of the form j1:j2:amplitude")
        out.append((int(parts[0]), int(parts[1]), parse_number(parts[2])))
    return tuple(out)


def _coerce(kind: Any, default: Any, text: str, name: str) -> Any:
    """Convert ``text`` using the annotated type of a dataclass field."""
    ann = str(kind)
    if name in ("modes", "g0_modes"):
        return _parse_modes(text)
    if text.strip().lower() == "none" and "None" in ann:
        return None
    if "bool" in ann:
        return _parse_bool(text)
    if ann.startswith("int") or name in ("n", "g0_seed", "sample_every", "tail_patience"):
        value = parse_number(text)
        if value != int(value):
            raise ValueError(f"expected an integer, got {text!r}")
        return int(value)
    if "float" in ann:
        return float(parse_number(text))
    return text.strip()


def _field_map(cls: type) -> dict:
    return {f.name: f for f in fields(cls)}


@dataclass(frozen=True)
class ExperimentConfig:
    grid: Grid = field(default_factory=lambda: Grid(256))
    recipe: DataRecipe = field(default_factory=DataRecipe)
    sim: SimParams = field(default_factory=SimParams)
    verify: VerificationParams = field(default_factory=VerificationParams)
    output_dir: Path = field(default_factory=lambda: Path(os.environ.get("SQG_OUTPUT_DIR", "sqg_out")))
    seed: int = 0
    theorem_mode: bool = False

    def to_flat(self) -> dict[str, str]:
        """Inverse of :func:`from_mapping` (values rendered with ``repr``)."""
        flat: dict[str, str] = {}
        for section in SECTIONS:
            obj = getattr(self, section)
            for f in fields(obj):
                value = getattr(obj, f.name)
                if f.name in ("modes", "g0_modes"):
                    flat[f"{section}.{f.name}"] = ", ".join(f"{a}:{b}:{c!r}" for a, b, c in value)
                else:
                    flat[f"{section}.{f.name}"] = "none" if value is None else repr(value).strip("'")
        flat["output_dir"] = str(self.output_dir)
        flat["seed"] = str(self.seed)
        flat["theorem_mode"] = str(self.theorem_mode).lower()
        return flat

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.to_flat().items())


def parse_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Split config text into a ``{dotted_key: raw_value}`` mapping."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key] = value
    return out


def from_mapping(mapping: Mapping[str, str], base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Build a config from dotted keys, layering over ``base`` (or defaults)."""
    base = base or ExperimentConfig()
    updates: dict[str, dict[str, Any]] = {s: {} for s in SECTIONS}
    top: dict[str, Any] = {}
    for key, raw in mapping.items():
        if key.startswith("sweep."):
            continue
        section, _, name = key.partition(".")
        if section in SECTIONS and name:
            fmap = _field_map(SECTIONS[section])
            if name not in fmap:
                raise ConfigError(f"{key}: unknown key")
            f = fmap[name]
            try:
                updates[section][name] = _coerce(f.type, f.default, str(raw), name)
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from None
        elif key in TOP_LEVEL:
            try:
                if key == "seed":
                    top[key] = int(parse_number(str(raw)))
                elif key == "theorem_mode":
                    top[key] = _parse_bool(str(raw))
                else:
                    top[key] = Path(str(raw))
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from None
        else:
            raise ConfigError(f"{key}: unknown key")

    if "seed" in top and "g0_seed" not in updates["recipe"]:
        updates["recipe"]["g0_seed"] = top["seed"]
    built = {}
    for section, cls in SECTIONS.items():
        current = getattr(base, section)
        try:
            built[section] = replace(current, **updates[section]) if updates[section] else current
        except (ValueError, TypeError) as exc:
            msg = str(exc)
            if not msg.startswith(section + "."):
                msg = f"{section}: {msg}"
            raise ConfigError(msg) from None
    cfg = replace(base, **built, **top)
    if cfg.theorem_mode:
        try:
            cfg.recipe.check_theorem_hypotheses()
        except RecipeError as exc:
            raise ConfigError(str(exc)) from None
    return cfg


def load_config(path: str | Path | None = None, overrides: Mapping[str, str] | None = None) -> ExperimentConfig:
    mapping: dict[str, str] = {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"{p}: cannot read config ({exc.strerror})") from None
        mapping.update(parse_text(text, str(p)))
    mapping.update(overrides or {})
    return from_mapping(mapping)


@dataclass(frozen=True)
class SweepSpec:
    """Cartesian product of value lists over dotted parameter paths."""

    base: ExperimentConfig
    axes: tuple[tuple[str, tuple[str, ...]], ...]
    max_parallel: int = 1
    cap: int = DEFAULT_SWEEP_CAP

    def __post_init__(self) -> None:
        if not self.axes:
            raise ConfigError("sweep: at least one axis is required")
        if self.max_parallel < 1:
            raise ConfigError("sweep.max_parallel: must be >= 1")
        if self.size > self.cap:
            raise ConfigError(f"sweep: {self.size} points exceed the cap of {self.cap}")
        for path, values in self.axes:
            if not values:
                raise ConfigError(f"sweep.{path}: empty value list")
            for v in values:
                from_mapping({path: v}, self.base)

    @property
    def size(self) -> int:
        return math.prod(len(v) for _, v in self.axes)

    def points(self) -> list[tuple[str, ExperimentConfig]]:
        """``(label, config)`` per grid point in deterministic row-major order;
        each point writes to its own subdirectory of the base output_dir."""
        names = [p for p, _ in self.axes]
        out = []
        for i, combo in enumerate(itertools.product(*(v for _, v in self.axes))):
            label = f"{i:03d}_" + "_".join(f"{n.split('.')[-1]}={v}" for n, v in zip(names, combo))
            label = label.replace("/", "-").replace(" ", "")
            mapping = dict(zip(names, combo))
            mapping["output_dir"] = str(self.base.output_dir / label)
            out.append((label, from_mapping(mapping, self.base)))
        return out


def sweep_from_mapping(mapping: Mapping[str, str]) -> SweepSpec:
    base = from_mapping(mapping)
    axes = []
    max_parallel, cap = 1, DEFAULT_SWEEP_CAP
    for key, raw in mapping.items():
        if not key.startswith("sweep."):
            continue
        rest = key[len("sweep."):]
        try:
            if rest == "max_parallel":
                max_parallel = int(parse_number(raw))
                continue
            if rest == "cap":
                cap = int(parse_number(raw))
                continue
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
        section, _, name = rest.partition(".")
        if section not in SECTIONS or name not in _field_map(SECTIONS[section]):
            raise ConfigError(f"{key}: unknown sweep axis")
        if name in ("modes", "g0_modes"):
            raise ConfigError(f"{key}: mode lists cannot be swept")
        axes.append((rest, tuple(v.strip() for v in raw.split(",") if v.strip())))
    return SweepSpec(base, tuple(axes), max_parallel, cap)


def load_sweep(path: str | Path, overrides: Mapping[str, str] | None = None) -> SweepSpec:
    p = Path(path)
    try:
        mapping = parse_text(p.read_text(), str(p))
    except OSError as exc:
        raise ConfigError(f"{p}: cannot read sweep spec ({exc.strerror})") from None
    mapping.update(overrides or {})
    return sweep_from_mapping(mapping)

"""Run configuration: one TOML file, defaults matching the replication settings."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from rdlocal.data import DEFAULT_SCHEMA, Window
from rdlocal.errors import ConfigError, ValidationError
from rdlocal.inference import GridSpec
from rdlocal.sensitivity import PATTERNS
from rdlocal.stats import Mode, PermutationPlan, StatKind
from rdlocal.synth import CovariateCurve, OutcomeCurve, SynthSpec
from rdlocal.winselect import WindowScanSpec

ENV_OUT = "RDLOCAL_OUT"


def replication_config_path() -> Path:
    return Path(str(resources.files("rdlocal") / "resources" / "replication.toml"))


@dataclass(frozen=True)
class OutcomeSettings:
    tau_grid: GridSpec
    sensitivity_taus: tuple[float, ...]
    window: Window | None = None


@dataclass(frozen=True)
class RunConfig:
    data_path: Path
    cutoff_year: int
    outcomes: tuple[str, ...]
    covariates: tuple[str, ...]
    seed: int
    plan: PermutationPlan
    scan: WindowScanSpec | None
    outcome_settings: dict[str, OutcomeSettings]
    inference_stat: StatKind = StatKind.DIFF_MEANS
    poly_order: int = 0
    alpha: float = 0.05
    sensitivity_half_widths: tuple[float, ...] = (2.875, 3.0, 3.125, 3.25)
    sensitivity_stat: StatKind = StatKind.DIFF_MEANS
    gammas: tuple[float, ...] = (1.0, 1.5, 2.0)
    bounds_stat: StatKind = StatKind.DIFF_MEANS
    bounds_patterns: str = "blocks"
    bounds_window: Window | None = None
    default_window: Window | None = None
    schema: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_SCHEMA))
    output_dir: Path | None = None
    synth: SynthSpec = field(default_factory=SynthSpec)
    source: Path | None = None


class _Fields:
    """Collects field-level problems so they can be reported together."""

    def __init__(self):
        self.problems: list[str] = []

    def get(self, table: dict, key: str, kind, default=None, where: str = "", required=False):
        name = f"{where}{key}"
        if key not in table:
            if required:
                self.problems.append(f"{name}: missing")
            return default
        value = table[key]
        try:
            if kind is float:
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise TypeError
                value = float(value)
                if not math.isfinite(value):
                    raise TypeError
            elif kind is int:
                if isinstance(value, bool) or not isinstance(value, int):
                    raise TypeError
            elif kind is bool:
                if not isinstance(value, bool):
                    raise TypeError
            elif kind is str:
                if not isinstance(value, str):
                    raise TypeError
            elif kind is list:
                if not isinstance(value, list):
                    raise TypeError
            elif kind is dict:
                if not isinstance(value, dict):
                    raise TypeError
        except TypeError:
            self.problems.append(f"{name}: expected {kind.__name__}, got {value!r}")
            return default
        return value

    def check(self, ok: bool, message: str):
        if not ok:
            self.problems.append(message)

    def attempt(self, fn, name: str, default=None):
        try:
            return fn()
        except (ConfigError, ValidationError, ValueError, TypeError) as exc:
            self.problems.append(f"{name}: {exc}")
            return default


def _window(value, f: _Fields, name: str) -> Window | None:
    if value is None:
        return None
    if not (isinstance(value, list) and len(value) == 2 and all(isinstance(v, (int, float)) for v in value)):
        f.problems.append(f"{name}: expected [left, right]")
        return None
    return f.attempt(lambda: Window(float(value[0]), float(value[1])), name)


def _grid(value, f: _Fields, name: str) -> GridSpec | None:
    if not (isinstance(value, list) and len(value) == 3 and all(isinstance(v, (int, float)) for v in value)):
        f.problems.append(f"{name}: expected [lo, hi, step]")
        return None
    return f.attempt(lambda: GridSpec(*(float(v) for v in value)), name)


def _taus(value, f: _Fields, name: str) -> tuple[float, ...]:
    if isinstance(value, dict):
        g = _grid([value.get("lo"), value.get("hi"), value.get("step")], f, name)
        return tuple(float(t) for t in g.values()) if g else ()
    if isinstance(value, list) and len(value) == 3 and name.endswith("grid"):
        g = _grid(value, f, name)
        return tuple(float(t) for t in g.values()) if g else ()
    if isinstance(value, list) and value and all(isinstance(v, (int, float)) for v in value):
        return tuple(float(v) for v in value)
    f.problems.append(f"{name}: expected a list of numbers or {{lo, hi, step}}")
    return ()


def _synth(table: dict, f: _Fields) -> SynthSpec:
    kw: dict[str, Any] = {}
    for key, kind in (("n_units", int), ("year_start", int), ("year_end", int),
                      ("cutoff_year", int), ("seed", int)):
        v = f.get(table, key, kind, where="synth.")
        if v is not None:
            kw[key] = v
    for name in ("gini", "male_income", "female_income"):
        sub = table.get(name)
        if sub is not None:
            allowed = {x.name for x in fields(OutcomeCurve)}
            kw[name] = f.attempt(
                lambda: OutcomeCurve(**{k: float(v) for k, v in sub.items() if k in allowed}), f"synth.{name}"
            )
    if "pbf" in table:
        sub = table["pbf"]
        allowed = {x.name for x in fields(CovariateCurve)}
        kw["pbf"] = f.attempt(
            lambda: CovariateCurve(**{k: (int(v) if k == "stable_halfwidth" else float(v))
                                      for k, v in sub.items() if k in allowed}), "synth.pbf"
        )
    kw = {k: v for k, v in kw.items() if v is not None}
    return f.attempt(lambda: SynthSpec(**kw), "synth", SynthSpec())


def parse_config(doc: dict, base_dir: Path | None = None, seed_override: int | None = None) -> RunConfig:
    f = _Fields()
    base_dir = Path(base_dir or ".")

    seed = f.get(doc, "seed", int, 0)
    if seed_override is not None:
        seed = seed_override
    f.check(seed is not None and 0 <= seed < 2**64, f"seed: must be an unsigned 64-bit integer, got {seed}")

    data_path = f.get(doc, "data_path", str, None, required=True)
    cutoff_year = f.get(doc, "cutoff_year", int, 2011)
    outcomes = f.get(doc, "outcomes", list, [])
    covariates = f.get(doc, "covariates", list, [])
    f.check(bool(outcomes), "outcomes: must list at least one outcome")
    f.check(all(isinstance(o, str) for o in outcomes), "outcomes: entries must be strings")
    f.check(all(isinstance(c, str) for c in covariates), "covariates: entries must be strings")
    schema = dict(DEFAULT_SCHEMA)
    schema.update(f.get(doc, "schema", dict, {}))

    plan_t = f.get(doc, "plan", dict, {})
    mode = f.get(plan_t, "mode", str, "montecarlo", where="plan.")
    plan = f.attempt(
        lambda: PermutationPlan(
            Mode(mode.lower().replace("_", "").replace("-", "")),
            f.get(plan_t, "draws", int, 9999, where="plan."),
            seed if seed is not None else 0,
            f.get(plan_t, "exhaustive_cap", int, 100_000, where="plan."),
        ),
        "plan",
        PermutationPlan(),
    )

    scan_t = f.get(doc, "scan", dict, {})
    scan = None
    if f.get(scan_t, "enabled", bool, True, where="scan."):
        f.check(bool(covariates), "covariates: must be non-empty when the window scan is enabled")
        scan = f.attempt(
            lambda: WindowScanSpec(
                w_min=f.get(scan_t, "w_min", float, 1.0, where="scan."),
                w_max=f.get(scan_t, "w_max", float, 5.0, where="scan."),
                increment=f.get(scan_t, "increment", float, 0.125, where="scan."),
                stat=StatKind.parse(f.get(scan_t, "stat", str, "diffmeans", where="scan.")),
                plan=plan,
                threshold=f.get(scan_t, "threshold", float, 0.15, where="scan."),
                min_obs_per_side=f.get(scan_t, "min_obs_per_side", int, 10, where="scan."),
                snap_recommended=f.get(scan_t, "snap_recommended", bool, False, where="scan."),
            ),
            "scan",
        )

    inf_t = f.get(doc, "inference", dict, {})
    sens_t = f.get(doc, "sensitivity", dict, {})
    settings = {}
    for o in outcomes if isinstance(outcomes, list) else []:
        if not isinstance(o, str):
            continue
        o_inf = inf_t.get(o, {}) if isinstance(inf_t.get(o, {}), dict) else {}
        o_sens = sens_t.get(o, {}) if isinstance(sens_t.get(o, {}), dict) else {}
        if "tau_grid" not in o_inf:
            f.problems.append(f"inference.{o}.tau_grid: missing (tau grids are in outcome units)")
            continue
        grid = _grid(o_inf["tau_grid"], f, f"inference.{o}.tau_grid")
        if "taus" in o_sens:
            taus = _taus(o_sens["taus"], f, f"sensitivity.{o}.taus")
        else:
            taus = tuple(float(t) for t in grid.values()) if grid else ()
        settings[o] = OutcomeSettings(grid, taus, _window(o_inf.get("window"), f, f"inference.{o}.window"))

    bounds_t = f.get(doc, "bounds", dict, {})
    stats = {}
    for table, name in ((inf_t, "inference"), (sens_t, "sensitivity"), (bounds_t, "bounds")):
        stats[name] = f.attempt(lambda: StatKind.parse(table.get("stat", "diffmeans")), f"{name}.stat",
                                StatKind.DIFF_MEANS)
    alpha = f.get(inf_t, "alpha", float, 0.05, where="inference.")
    f.check(alpha is not None and 0 < alpha < 1, "inference.alpha: must lie in (0, 1)")
    poly = f.get(inf_t, "poly_order", int, 0, where="inference.")
    f.check(poly is not None and poly >= 0, "inference.poly_order: must be >= 0")
    half_widths = f.get(sens_t, "half_widths", list, [2.875, 3.0, 3.125, 3.25])
    f.check(all(isinstance(h, (int, float)) and h >= 0 for h in half_widths),
            "sensitivity.half_widths: must be non-negative numbers")
    gammas = f.get(bounds_t, "gammas", list, [1.0, 1.5, 2.0])
    f.check(all(isinstance(g, (int, float)) and g >= 1 for g in gammas), "bounds.gammas: must be numbers >= 1")
    patterns = f.get(bounds_t, "patterns", str, "blocks", where="bounds.")
    f.check(patterns in PATTERNS, f"bounds.patterns: must be one of {', '.join(PATTERNS)}")

    bounds_window = _window(bounds_t.get("window"), f, "bounds.window")
    default_window = _window(inf_t.get("window"), f, "inference.window")
    out = doc.get("output_dir")
    synth = _synth(f.get(doc, "synth", dict, {}), f)

    if f.problems:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(f.problems))
    data = Path(data_path)
    return RunConfig(
        data_path=data if data.is_absolute() else base_dir / data,
        cutoff_year=cutoff_year,
        outcomes=tuple(outcomes),
        covariates=tuple(covariates),
        seed=seed,
        plan=plan,
        scan=scan,
        outcome_settings=settings,
        inference_stat=stats["inference"],
        poly_order=poly,
        alpha=alpha,
        sensitivity_half_widths=tuple(float(h) for h in half_widths),
        sensitivity_stat=stats["sensitivity"],
        gammas=tuple(float(g) for g in gammas),
        bounds_stat=stats["bounds"],
        bounds_patterns=patterns,
        bounds_window=bounds_window,
        default_window=default_window,
        schema=schema,
        output_dir=Path(out) if isinstance(out, str) else None,
        synth=synth,
    )


def load_config(path=None, seed_override: int | None = None) -> RunConfig:
    path = Path(path) if path is not None else replication_config_path()
    try:
        with path.open("rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    cfg = parse_config(doc, path.parent, seed_override)
    return RunConfig(**{**cfg.__dict__, "source": path})

"""Batch orchestration: ingest, window scan, inference, sensitivity, bounds, report."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from rdlocal import figures
from rdlocal._parallel import pmap
from rdlocal.config import RunConfig
from rdlocal.data import Dataset, PanelRecord, Window, load_panel_csv, recenter
from rdlocal.errors import ConfigError, DataError, DegenerateError
from rdlocal.inference import InferenceResult, InferenceSpec, confidence_interval
from rdlocal.sensitivity import (
    GammaBoundsResult,
    GammaBoundsSpec,
    SensitivitySpec,
    SensitivitySurface,
    bounds_table,
    gamma_bounds,
    sensitivity_surface,
    surface_ci_table,
    surface_table,
)
from rdlocal.winselect import WindowScanResult, emit_scan_plot_data, scan_windows

log = logging.getLogger(__name__)

STAGES = ("winselect", "randinf", "sensitivity", "rbounds")
EFFECT_LABEL = "change at administration transition (post-2011 minus pre-2011)"


@dataclass
class Analysis:
    config: RunConfig
    datasets: dict[str, Dataset]
    scan: WindowScanResult | None = None
    window: Window | None = None
    inference: dict[str, InferenceResult] = field(default_factory=dict)
    surfaces: dict[str, SensitivitySurface] = field(default_factory=dict)
    bounds: dict[str, GammaBoundsResult] = field(default_factory=dict)
    notices: list[str] = field(default_factory=list)


@dataclass
class RunReport:
    summary: dict
    artifacts: list[Path]
    output_dir: Path


def ingest(cfg: RunConfig) -> list[PanelRecord]:
    schema = {"unit_id": cfg.schema.get("unit_id", "unit_id"), "year": cfg.schema.get("year", "year")}
    for name in (*cfg.outcomes, *cfg.covariates):
        schema[name] = cfg.schema.get(name, name)
    try:
        return load_panel_csv(cfg.data_path, schema, covariates=cfg.covariates)
    except FileNotFoundError:
        raise DataError(f"data file not found: {cfg.data_path}") from None
    except OSError as exc:
        raise DataError(f"cannot read {cfg.data_path}: {exc}") from None


def prepare_output(out_dir, force: bool = False) -> Path:
    """Create ``out_dir``; refuse a non-empty one unless ``force``."""
    out_dir = Path(out_dir)
    if out_dir.exists():
        if not out_dir.is_dir():
            raise ConfigError(f"output_dir: {out_dir} exists and is not a directory")
        if any(out_dir.iterdir()) and not force:
            raise ConfigError(f"output_dir: {out_dir} is not empty; pass --force to overwrite")
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _resolve_window(an: Analysis, override: Window | None, what: str) -> Window:
    if override is not None:
        return override
    if an.window is not None:
        return an.window
    raise DegenerateError(f"{what}: no window available (scan recommended none and no override is configured)")


def analyze(cfg: RunConfig, stages=STAGES, threads: int = 1) -> Analysis:
    records = ingest(cfg)
    datasets = {o: recenter(records, cfg.cutoff_year, o, cfg.covariates) for o in cfg.outcomes}
    an = Analysis(cfg, datasets)

    an.window = cfg.default_window
    needs_window = any(s in stages for s in ("randinf", "sensitivity", "rbounds"))
    if cfg.scan is not None and ("winselect" in stages or (needs_window and an.window is None)):
        an.scan = scan_windows(datasets[cfg.outcomes[0]], cfg.scan, threads)
        log.info("window scan stopped (%s); recommended %s", an.scan.stop_reason.value,
                 an.scan.recommended.label() if an.scan.recommended else "none")
        if an.window is None:
            an.window = an.scan.recommended

    def per_outcome(o: str):
        ds, st = datasets[o], cfg.outcome_settings[o]
        out = {"notices": []}
        if "randinf" in stages:
            spec = InferenceSpec(_resolve_window(an, st.window, f"inference for {o}"), cfg.inference_stat,
                                 cfg.poly_order, cfg.plan, cfg.alpha, st.tau_grid)
            out["inference"] = confidence_interval(ds, spec)
            out["notices"] += [f"{o}: {m}" for m in out["inference"].notices]
        if "sensitivity" in stages:
            spec = SensitivitySpec(tuple(Window.symmetric(h, ds.cutoff) for h in cfg.sensitivity_half_widths),
                                   st.sensitivity_taus, cfg.sensitivity_stat, cfg.plan, cfg.alpha, cfg.poly_order)
            out["surface"] = sensitivity_surface(ds, spec)
            out["notices"] += [f"{o}: {m}" for m in out["surface"].notices]
        if "rbounds" in stages:
            spec = GammaBoundsSpec(_resolve_window(an, cfg.bounds_window, f"bounds for {o}"), cfg.gammas,
                                   cfg.bounds_stat, cfg.plan, cfg.bounds_patterns)
            out["bounds"] = gamma_bounds(ds, spec)
        return out

    for o, res in zip(cfg.outcomes, pmap(per_outcome, cfg.outcomes, threads)):
        if "inference" in res:
            an.inference[o] = res["inference"]
        if "surface" in res:
            an.surfaces[o] = res["surface"]
        if "bounds" in res:
            an.bounds[o] = res["bounds"]
        an.notices.extend(res["notices"])
    return an


# -- tables -----------------------------------------------------------------

def _write_csv(path: Path, rows: list[dict], header: list[str] | None = None) -> Path:
    header = header or (list(rows[0]) if rows else [])
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _cell(v) for k, v in r.items()})
    return path


def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "NA"
    return v


def scan_rows(an: Analysis) -> list[dict]:
    return emit_scan_plot_data(an.scan) if an.scan else []


def inference_rows(an: Analysis) -> list[dict]:
    rows = []
    for o, r in an.inference.items():
        rows.append({
            "outcome": o, "window_left": an_window(an, o).left, "window_right": an_window(an, o).right,
            "estimate": r.point_estimate, "p_value": r.p_value.p, "statistic": r.p_value.statistic_observed,
            "draws": r.p_value.n_draws_effective, "exhaustive": r.p_value.exhaustive,
            "ci_low": r.ci_low, "ci_high": r.ci_high, "contiguous": r.accepted_taus_contiguous,
            "n_control": r.n_control, "n_treated": r.n_treated, "status": r.status,
        })
    return rows


def an_window(an: Analysis, outcome: str) -> Window:
    return an.config.outcome_settings[outcome].window or an.window


def inference_grid_rows(an: Analysis) -> list[dict]:
    return [{"outcome": o, "tau": t, "p": p}
            for o, r in an.inference.items() for t, p in zip(r.taus, r.tau_pvalues)]


def sensitivity_rows(an: Analysis) -> tuple[list[dict], list[dict]]:
    cells, cis = [], []
    for o, s in an.surfaces.items():
        cells += [{"outcome": o, **r} for r in surface_table(s)]
        cis += [{"outcome": o, **r} for r in surface_ci_table(s)]
    return cells, cis


def bounds_rows(an: Analysis) -> list[dict]:
    return [{"outcome": o, "window_left": b.window.left, "window_right": b.window.right, **r}
            for o, b in an.bounds.items() for r in bounds_table(b)]


def scatter_rows(an: Analysis) -> list[dict]:
    rows = []
    for o, ds in an.datasets.items():
        for obs in ds.observations:
            rows.append({"outcome": o, "unit_id": obs.unit_id, "running": obs.running, "value": obs.outcome,
                         "side": "treated" if obs.running >= ds.cutoff else "control"})
    return rows


# -- summary ----------------------------------------------------------------

def _significance(p: float) -> str:
    if p < 0.01:
        return "1%"
    if p < 0.05:
        return "5%"
    if p < 0.10:
        return "10%"
    return "not significant"


def build_summary(an: Analysis) -> dict:
    cfg = an.config
    out: dict = {
        "effect": EFFECT_LABEL,
        "cutoff_year": cfg.cutoff_year,
        "seed": cfg.seed,
        "alpha": cfg.alpha,
        "statistic": cfg.inference_stat.value,
        "plan": {"mode": cfg.plan.mode.value, "draws": cfg.plan.draws},
        "window_scan": None,
        "outcomes": {},
        "notices": list(an.notices),
    }
    if an.scan is not None:
        out["window_scan"] = {
            "recommended": None if an.scan.recommended is None
            else [an.scan.recommended.left, an.scan.recommended.right],
            "stop_reason": an.scan.stop_reason.value,
            "rows": len(an.scan.rows),
            "threshold": an.scan.threshold,
        }
    for o in cfg.outcomes:
        entry: dict = {}
        r = an.inference.get(o)
        if r is not None:
            w = an_window(an, o)
            entry["inference"] = {
                "window": [w.left, w.right], "estimate": r.point_estimate, "p_value": r.p_value.p,
                "significance": _significance(r.p_value.p), "reject_at_alpha": r.p_value.p <= cfg.alpha,
                "ci": None if r.ci_low is None else [r.ci_low, r.ci_high],
                "ci_contiguous": r.accepted_taus_contiguous, "n_control": r.n_control, "n_treated": r.n_treated,
                "status": r.status,
            }
        s = an.surfaces.get(o)
        if s is not None:
            entry["sensitivity"] = [
                {"window": [w.left, w.right], "ci": None if ci is None else list(ci)}
                for w, ci in zip(s.windows, s.per_window_ci)
            ]
        b = an.bounds.get(o)
        if b is not None:
            base_reject = b.rows[0].p_upper <= cfg.alpha if b.rows else False
            if r is not None:
                base_reject = r.p_value.p <= cfg.alpha
            unchanged = all((row.p_upper <= cfg.alpha) if base_reject else (row.p_lower > cfg.alpha)
                            for row in b.rows)
            entry["bounds"] = {
                "window": [b.window.left, b.window.right],
                "rows": [{"gamma": row.gamma, "p_lower": row.p_lower, "p_upper": row.p_upper} for row in b.rows],
                "decision_unchanged": unchanged,
            }
        out["outcomes"][o] = entry
    return out


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_outputs(an: Analysis, out_dir: Path, stages=STAGES, with_figures: bool = True) -> RunReport:
    cfg = an.config
    written: list[Path] = []
    windows = {}
    if "winselect" in stages and an.scan is not None:
        rows = scan_rows(an)
        written.append(_write_csv(out_dir / "scan.csv", rows,
                                  None if rows else ["half_width", "min_pvalue", "n_control", "n_treated"]))
        if with_figures and rows:
            p = out_dir / "fig1_window_scan.svg"
            p.write_text(figures.scan_figure(rows, an.scan.threshold), encoding="utf-8")
            written.append(p)
    if "randinf" in stages:
        written.append(_write_csv(out_dir / "inference.csv", inference_rows(an)))
        written.append(_write_csv(out_dir / "inference_grid.csv", inference_grid_rows(an)))
        scatter = scatter_rows(an)
        written.append(_write_csv(out_dir / "scatter.csv", scatter))
        if with_figures:
            for o in cfg.outcomes:
                w = an_window(an, o)
                windows[o] = (w.left, w.right)
                p = out_dir / f"fig2_rd_{o}.svg"
                p.write_text(figures.scatter_figure([r for r in scatter if r["outcome"] == o], o, windows[o]),
                             encoding="utf-8")
                written.append(p)
    if "sensitivity" in stages:
        cells, cis = sensitivity_rows(an)
        written.append(_write_csv(out_dir / "sensitivity.csv", cells))
        written.append(_write_csv(out_dir / "sensitivity_ci.csv", cis))
        if with_figures:
            for o in cfg.outcomes:
                p = out_dir / f"fig3_sensitivity_{o}.svg"
                p.write_text(figures.sensitivity_figure([r for r in cis if r["outcome"] == o], o), encoding="utf-8")
                written.append(p)
    if "rbounds" in stages:
        rows = bounds_rows(an)
        written.append(_write_csv(out_dir / "bounds.csv", rows))
        if with_figures:
            p = out_dir / "fig4_bounds.svg"
            p.write_text(figures.bounds_figure(rows, cfg.alpha), encoding="utf-8")
            written.append(p)

    summary = build_summary(an)
    summary["artifacts"] = [{"file": p.name, "sha256": _sha256(p)} for p in written]
    summary_path = out_dir / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=False) + "\n", encoding="utf-8")
    written.append(summary_path)
    return RunReport(summary, written, out_dir)


def run_pipeline(cfg: RunConfig, out_dir, force: bool = False, threads: int = 1,
                 stages=STAGES) -> RunReport:
    """Run the requested stages and write tables, figures and ``summary.json``.

    The output directory is checked before any computation so a populated
    directory is never touched without ``force``.
    """
    out_dir = prepare_output(out_dir, force)
    an = analyze(cfg, stages, threads)
    return write_outputs(an, out_dir, stages)

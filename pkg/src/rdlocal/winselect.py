"""Covariate-balance window selection.

Symmetric windows are grown from ``w_min`` in steps of ``increment``. Each
window gets one randomization balance p-value per covariate and the scan
stops at the first window whose smallest p-value drops below ``threshold``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from rdlocal._parallel import pmap
from rdlocal.data import Dataset, Window, split_window
from rdlocal.errors import ConfigError, ValidationError
from rdlocal.stats import PermutationPlan, StatKind, permutation_pvalue


class StopReason(enum.Enum):
    THRESHOLD_CROSSED = "ThresholdCrossed"
    MAX_WINDOW_REACHED = "MaxWindowReached"
    INSUFFICIENT_OBS = "InsufficientObs"


@dataclass(frozen=True)
class WindowScanSpec:
    w_min: float = 1.0
    w_max: float = 5.0
    increment: float = 0.125
    stat: StatKind = StatKind.DIFF_MEANS
    plan: PermutationPlan = field(default_factory=PermutationPlan)
    threshold: float = 0.15
    min_obs_per_side: int = 10
    #: report the smallest half-width whose window holds the same observations
    #: as the last passing window (matters for discrete running variables)
    snap_recommended: bool = False

    def __post_init__(self):
        object.__setattr__(self, "stat", StatKind.parse(self.stat))
        if not self.w_min > 0:
            raise ConfigError(f"w_min must be positive, got {self.w_min}")
        if not self.w_max >= self.w_min:
            raise ConfigError(f"w_max ({self.w_max}) must be >= w_min ({self.w_min})")
        if not (self.increment > 0 and math.isfinite(self.increment)):
            raise ConfigError(f"increment must be positive and finite, got {self.increment}")
        if not 0 < self.threshold < 1:
            raise ConfigError(f"threshold must lie in (0, 1), got {self.threshold}")
        if self.min_obs_per_side < 1:
            raise ConfigError("min_obs_per_side must be >= 1")

    def half_widths(self) -> list[float]:
        k = math.floor((self.w_max - self.w_min) / self.increment + 1e-9)
        return [self.w_min + i * self.increment for i in range(k + 1)]


@dataclass(frozen=True)
class WindowScanRow:
    window: Window
    covariate_pvalues: tuple[float, ...]
    min_pvalue: float
    n_control: int
    n_treated: int
    # identifies the observation set; equal keys mean identical samples
    sample_key: tuple[int, int, float, float] = (0, 0, 0.0, 0.0)


@dataclass(frozen=True)
class WindowScanResult:
    rows: tuple[WindowScanRow, ...]
    recommended: Window | None
    stop_reason: StopReason
    covariate_names: tuple[str, ...] = ()
    threshold: float = 0.15


def _scan_row(dataset: Dataset, spec: WindowScanSpec, w: float) -> WindowScanRow:
    window = Window.symmetric(w, dataset.cutoff)
    control, treated = split_window(dataset, window)
    pvals = []
    for j in range(len(dataset.covariate_names)):
        res = permutation_pvalue(
            spec.stat, [o.covariates[j] for o in treated], [o.covariates[j] for o in control], spec.plan
        )
        pvals.append(res.p)
    key = (
        len(control),
        len(treated),
        min(o.running for o in control),
        max(o.running for o in treated),
    )
    return WindowScanRow(window, tuple(pvals), min(pvals), len(control), len(treated), key)


def scan_windows(dataset: Dataset, spec: WindowScanSpec, threads: int = 1) -> WindowScanResult:
    """Scan nested symmetric windows and recommend the largest balanced one.

    Windows are evaluated in batches of ``threads`` (speculatively when
    threaded) but committed in order, so the stop point never depends on
    scheduling.
    """
    if not dataset.covariate_names:
        raise ValidationError("window selection needs at least one covariate")
    names = tuple(dataset.covariate_names)
    widths = spec.half_widths()

    control, treated = split_window(dataset, Window.symmetric(widths[0], dataset.cutoff))
    if min(len(control), len(treated)) < max(spec.min_obs_per_side, 1):
        return WindowScanResult((), None, StopReason.INSUFFICIENT_OBS, names, spec.threshold)

    rows: list[WindowScanRow] = []
    stop = StopReason.MAX_WINDOW_REACHED
    batch = max(threads, 1)
    for start in range(0, len(widths), batch):
        chunk = widths[start:start + batch]
        computed = pmap(lambda w: _scan_row(dataset, spec, w), chunk, threads)
        for row in computed:
            rows.append(row)
            if row.min_pvalue < spec.threshold:
                stop = StopReason.THRESHOLD_CROSSED
                break
        if stop is StopReason.THRESHOLD_CROSSED:
            break

    passing = rows[:-1] if stop is StopReason.THRESHOLD_CROSSED else rows
    recommended = None
    if passing:
        last = passing[-1]
        recommended = last.window
        if spec.snap_recommended:
            first_same = next(r for r in passing if r.sample_key == last.sample_key)
            recommended = first_same.window
    return WindowScanResult(tuple(rows), recommended, stop, names, spec.threshold)


def emit_scan_plot_data(result: WindowScanResult) -> list[dict]:
    """One record per scan row: half-width, min p-value and each covariate's p-value."""
    out = []
    for row in result.rows:
        rec = {"half_width": row.window.half_width, "min_pvalue": row.min_pvalue,
               "n_control": row.n_control, "n_treated": row.n_treated}
        for name, p in zip(result.covariate_names, row.covariate_pvalues):
            rec[f"p_{name}"] = p
        out.append(rec)
    return out

"""Local-randomization inference for regression discontinuity designs."""

from rdlocal.data import Dataset, Observation, PanelRecord, Window, load_panel_csv, recenter, subset_window
from rdlocal.inference import (
    GridSpec,
    InferenceResult,
    InferenceSpec,
    adjust_outcomes,
    confidence_interval,
    point_estimate,
    test_sharp_null,
)
from rdlocal.sensitivity import (
    GammaBoundsResult,
    GammaBoundsSpec,
    SensitivitySpec,
    SensitivitySurface,
    emit_sensitivity_tables,
    gamma_bounds,
    sensitivity_surface,
)
from rdlocal.stats import Mode, PermutationPlan, PValueResult, StatKind, compute_stat, permutation_pvalue
from rdlocal.winselect import WindowScanResult, WindowScanSpec, emit_scan_plot_data, scan_windows

__version__ = "0.1.0"

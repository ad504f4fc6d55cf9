"""Randomization inference inside a window under a constant-effect sharp null."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from rdlocal._parallel import pmap
from rdlocal.data import Dataset, Observation, Window, subset_window
from rdlocal.errors import ConfigError, RankDeficiencyError
from rdlocal.stats import PermutationPlan, PValueResult, StatKind, permutation_pvalue


class InferenceNotice(UserWarning):
    """Non-fatal condition worth surfacing (grid moved, empty CI)."""


@dataclass(frozen=True)
class GridSpec:
    lo: float
    hi: float
    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise ConfigError(f"tau grid step must be positive, got {self.step}")
        if not self.lo < self.hi:
            raise ConfigError(f"tau grid needs lo < hi, got [{self.lo}, {self.hi}]")
        if (self.hi - self.lo) / self.step > 1e6:
            raise ConfigError("tau grid has more than 1e6 points")

    def values(self) -> np.ndarray:
        k = math.floor((self.hi - self.lo) / self.step + 1e-9)
        # rounding keeps grid points like 0.1 * 3 readable and exactly reproducible
        return np.round(self.lo + self.step * np.arange(k + 1), 12)

    def centered_on(self, center: float) -> "GridSpec":
        half = (self.hi - self.lo) / 2.0
        return GridSpec(center - half, center + half, self.step)


@dataclass(frozen=True)
class InferenceSpec:
    window: Window
    stat: StatKind = StatKind.DIFF_MEANS
    poly_order: int = 0
    plan: PermutationPlan = field(default_factory=PermutationPlan)
    alpha: float = 0.05
    tau_grid: GridSpec = field(default_factory=lambda: GridSpec(-1.0, 1.0, 0.01))

    def __post_init__(self):
        object.__setattr__(self, "stat", StatKind.parse(self.stat))
        if self.poly_order < 0:
            raise ConfigError(f"poly_order must be >= 0, got {self.poly_order}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class InferenceResult:
    point_estimate: float
    p_value: PValueResult
    ci_low: float | None
    ci_high: float | None
    n_control: int
    n_treated: int
    accepted_taus_contiguous: bool
    status: str = "ok"
    taus: tuple[float, ...] = ()
    tau_pvalues: tuple[float, ...] = ()
    notices: tuple[str, ...] = ()

    @property
    def degenerate(self) -> bool:
        return self.status != "ok"


def _fit_residuals(x: np.ndarray, y: np.ndarray, order: int, side: str) -> np.ndarray:
    if np.unique(x).size < order + 1:
        raise RankDeficiencyError(
            f"{side} side has {np.unique(x).size} distinct running values; "
            f"a degree-{order} polynomial needs {order + 1}"
        )
    design = np.vander(x, order + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return y - design @ coef + y.mean()


def adjust_outcomes(
    control: Sequence[Observation],
    treated: Sequence[Observation],
    tau0: float,
    poly_order: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Impute null outcomes and optionally residualize each side on a polynomial.

    Treated outcomes are shifted by ``-tau0``. With ``poly_order >= 1`` each
    side is replaced by its least-squares residuals plus the side mean, so a
    difference in means of the adjusted values is the intercept gap.
    """
    y_c = np.array([o.outcome for o in control], dtype=np.float64)
    y_t = np.array([o.outcome for o in treated], dtype=np.float64) - tau0
    if poly_order < 0:
        raise ConfigError("poly_order must be >= 0")
    if poly_order == 0:
        return y_c, y_t
    x_c = np.array([o.running for o in control], dtype=np.float64)
    x_t = np.array([o.running for o in treated], dtype=np.float64)
    return (
        _fit_residuals(x_c, y_c, poly_order, "control"),
        _fit_residuals(x_t, y_t, poly_order, "treated"),
    )


def point_estimate(dataset: Dataset, window: Window) -> float:
    control, treated = subset_window(dataset, window)
    return float(np.mean([o.outcome for o in treated]) - np.mean([o.outcome for o in control]))


def test_sharp_null(dataset: Dataset, spec: InferenceSpec, tau0: float = 0.0) -> PValueResult:
    """Randomization p-value for H0: every treated outcome is its control outcome plus ``tau0``."""
    control, treated = subset_window(dataset, spec.window)
    y_c, y_t = adjust_outcomes(control, treated, tau0, spec.poly_order)
    return permutation_pvalue(spec.stat, y_t, y_c, spec.plan)


test_sharp_null.__test__ = False  # not a pytest test


def accepted_hull(taus: np.ndarray, pvals: np.ndarray, alpha: float) -> tuple[float | None, float | None, bool]:
    accepted = np.flatnonzero(pvals > alpha)
    if accepted.size == 0:
        return None, None, False
    contiguous = bool(accepted[-1] - accepted[0] + 1 == accepted.size)
    return float(taus[accepted[0]]), float(taus[accepted[-1]]), contiguous


def confidence_interval(dataset: Dataset, spec: InferenceSpec, threads: int = 1) -> InferenceResult:
    """Invert sharp-null tests over ``spec.tau_grid``.

    The interval is the hull of accepted grid points; ``accepted_taus_contiguous``
    flags a hull that contains rejected points. If the point estimate lies
    outside the grid the grid is re-centered on it (a notice is emitted).
    """
    control, treated = subset_window(dataset, spec.window)
    estimate = point_estimate(dataset, spec.window)
    notices = []
    grid = spec.tau_grid
    if not grid.lo <= estimate <= grid.hi:
        grid = grid.centered_on(estimate)
        msg = (f"point estimate {estimate:g} outside tau grid [{spec.tau_grid.lo:g}, "
               f"{spec.tau_grid.hi:g}]; grid re-centered to [{grid.lo:g}, {grid.hi:g}]")
        notices.append(msg)
        warnings.warn(msg, InferenceNotice, stacklevel=2)
    taus = grid.values()
    results = pmap(lambda tau: test_sharp_null(dataset, spec, float(tau)), taus, threads)
    pvals = np.array([r.p for r in results])
    lo, hi, contiguous = accepted_hull(taus, pvals, spec.alpha)
    status = "ok"
    if lo is None:
        status = "degenerate"
        msg = f"no tau on the grid is accepted at alpha={spec.alpha:g}"
        notices.append(msg)
        warnings.warn(msg, InferenceNotice, stacklevel=2)
    return InferenceResult(
        point_estimate=estimate,
        p_value=test_sharp_null(dataset, spec, 0.0),
        ci_low=lo,
        ci_high=hi,
        n_control=len(control),
        n_treated=len(treated),
        accepted_taus_contiguous=contiguous,
        status=status,
        taus=tuple(float(t) for t in taus),
        tau_pvalues=tuple(float(p) for p in pvals),
        notices=tuple(notices),
    )


def with_window(spec: InferenceSpec, window: Window) -> InferenceSpec:
    return replace(spec, window=window)

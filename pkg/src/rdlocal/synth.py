"""Synthetic state-year panel with a policy-timing discontinuity.

Stands in for administrative data that cannot be redistributed. Outcomes are
``unit effect + piecewise-linear trend in margin + noise``; the PBF covariate is
flat near the cutoff and falls away outside a stable band, so covariate balance
holds only in windows that stay inside that band.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from rdlocal.data import DEFAULT_SCHEMA, PanelRecord, write_panel_csv
from rdlocal.errors import ConfigError

STATES = (
    "Acre", "Alagoas", "Amapa", "Amazonas", "Bahia", "Ceara", "Distrito Federal",
    "Espirito Santo", "Goias", "Maranhao", "Mato Grosso", "Mato Grosso do Sul",
    "Minas Gerais", "Para", "Paraiba", "Parana", "Pernambuco", "Piaui",
    "Rio de Janeiro", "Rio Grande do Norte", "Rio Grande do Sul", "Rondonia",
    "Roraima", "Santa Catarina", "Sao Paulo", "Sergipe", "Tocantins",
)

PRECISION = {"gini": 6, "male_income": 2, "female_income": 2, "pbf": 0}


@dataclass(frozen=True)
class OutcomeCurve:
    """Mean path ``level + slope_pre*m`` before the cutoff, ``level + jump + slope_post*m`` after."""

    level: float
    slope_pre: float
    slope_post: float
    jump: float = 0.0
    unit_sd: float = 0.0
    noise_sd: float = 0.0

    def trend(self, margin: np.ndarray) -> np.ndarray:
        margin = np.asarray(margin, dtype=np.float64)
        return np.where(margin < 0, self.level + self.slope_pre * margin,
                        self.level + self.jump + self.slope_post * margin)


@dataclass(frozen=True)
class CovariateCurve:
    """Multiplicative path: ``1 + growth*m`` inside ``|m| <= stable_halfwidth``,
    shrinking geometrically by ``drift_pre`` (resp. ``drift_post``) per year beyond it."""

    log_mean: float = 12.0
    unit_log_sd: float = 0.0
    growth: float = 0.0
    stable_halfwidth: int = 3
    drift_pre: float = 0.0
    drift_post: float = 0.0
    noise_sd: float = 0.0

    def factor(self, margin: np.ndarray) -> np.ndarray:
        m = np.asarray(margin, dtype=np.float64)
        s = self.stable_halfwidth
        inner = 1.0 + self.growth * np.clip(m, -s, s)
        below = np.clip(-s - m, 0, None)
        above = np.clip(m - s, 0, None)
        return inner * (1.0 - self.drift_pre) ** below * (1.0 - self.drift_post) ** above


@dataclass(frozen=True)
class SynthSpec:
    n_units: int = 27
    year_start: int = 2004
    year_end: int = 2015
    cutoff_year: int = 2011
    seed: int = 0
    gini: OutcomeCurve = field(default_factory=lambda: OutcomeCurve(0.53, -0.008, -0.002))
    male_income: OutcomeCurve = field(default_factory=lambda: OutcomeCurve(2600.0, 90.0, 30.0))
    female_income: OutcomeCurve = field(default_factory=lambda: OutcomeCurve(1700.0, 80.0, 25.0))
    pbf: CovariateCurve = field(default_factory=CovariateCurve)

    def __post_init__(self):
        if self.year_end < self.year_start:
            raise ConfigError(f"empty year range {self.year_start}-{self.year_end}")
        if self.n_units < 1:
            raise ConfigError("n_units must be >= 1")
        for name in ("gini", "male_income", "female_income"):
            c = getattr(self, name)
            if c.unit_sd < 0 or c.noise_sd < 0:
                raise ConfigError(f"{name}: noise scales must be >= 0")
        if self.pbf.unit_log_sd < 0 or self.pbf.noise_sd < 0:
            raise ConfigError("pbf: noise scales must be >= 0")

    @property
    def years(self) -> range:
        return range(self.year_start, self.year_end + 1)

    def unit_names(self) -> list[str]:
        if self.n_units <= len(STATES):
            return list(STATES[: self.n_units])
        return [f"unit{i:03d}" for i in range(self.n_units)]


def _standardized(rng: np.random.Generator, n: int) -> np.ndarray:
    # unit effects are rescaled so their sample sd equals the configured one
    z = rng.standard_normal(n)
    if n < 2:
        return np.zeros(n)
    return (z - z.mean()) / z.std()


def synthesize(spec: SynthSpec) -> list[PanelRecord]:
    rng = np.random.default_rng(spec.seed)
    units = spec.unit_names()
    years = np.array(list(spec.years))
    margin = (years - spec.cutoff_year).astype(np.float64)
    n, t = len(units), len(years)

    values = {}
    for name in ("gini", "male_income", "female_income"):
        c: OutcomeCurve = getattr(spec, name)
        unit = c.unit_sd * _standardized(rng, n)
        noise = c.noise_sd * rng.standard_normal((n, t))
        values[name] = c.trend(margin)[None, :] + unit[:, None] + noise
    p = spec.pbf
    base = np.exp(p.log_mean + p.unit_log_sd * _standardized(rng, n))
    noise = 1.0 + p.noise_sd * rng.standard_normal((n, t))
    values["pbf"] = np.clip(np.round(base[:, None] * p.factor(margin)[None, :] * noise), 0, None)

    records = []
    for i, unit in enumerate(units):
        for j, year in enumerate(years):
            # round here so in-memory records equal what the CSV holds
            outcomes = {k: round(float(values[k][i, j]), PRECISION[k])
                        for k in ("gini", "male_income", "female_income")}
            records.append(PanelRecord(unit, int(year), outcomes, {"pbf": float(values["pbf"][i, j])}))
    return records


def generate_synthetic(spec: SynthSpec, out_path) -> Path:
    """Write the synthetic panel as CSV with the default column names."""
    out_path = Path(out_path)
    write_panel_csv(out_path, synthesize(spec), DEFAULT_SCHEMA, PRECISION)
    return out_path

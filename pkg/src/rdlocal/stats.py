"""Two-sample statistics and their randomization distributions.

Every statistic is evaluated on a matrix of assignments (one row per
assignment, one column per pooled unit, 1.0 = treated) so that exhaustive
enumeration, Monte Carlo permutations and Bernoulli draws share one code path.
The observed statistic is computed on the same path, which keeps exact ties
exact.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from rdlocal.errors import ConfigError, EmptySideError, PlanError, ValidationError

#: draws per counter block; each block has its own Philox key so blocks can be
#: generated in any order (or concurrently) with identical results
CHUNK = 1024

_FIXED_MARGINS = 0
_UNIFORMS = 1


class StatKind(enum.Enum):
    DIFF_MEANS = "diffmeans"
    RANK_SUM = "ranksum"
    KS = "ks"

    @classmethod
    def parse(cls, value) -> "StatKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "").replace("-", "")
        aliases = {"diffmeans": cls.DIFF_MEANS, "ranksum": cls.RANK_SUM,
                   "wilcoxon": cls.RANK_SUM, "ks": cls.KS, "kolmogorovsmirnov": cls.KS}
        try:
            return aliases[key]
        except KeyError:
            raise ConfigError(f"unknown statistic {value!r}; use diffmeans, ranksum or ks") from None


class Mode(enum.Enum):
    EXHAUSTIVE = "exhaustive"
    MONTE_CARLO = "montecarlo"


@dataclass(frozen=True)
class PermutationPlan:
    mode: Mode = Mode.MONTE_CARLO
    draws: int = 9999
    seed: int = 0
    exhaustive_cap: int = 100_000

    def __post_init__(self):
        if not isinstance(self.mode, Mode):
            object.__setattr__(self, "mode", Mode(str(self.mode).lower().replace("_", "").replace("-", "")))
        if self.draws < 1:
            raise PlanError(f"draws must be >= 1, got {self.draws}")
        if not 0 <= self.seed < 2**64:
            raise PlanError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.exhaustive_cap < 1:
            raise PlanError("exhaustive_cap must be positive")

    @classmethod
    def exhaustive(cls, cap: int = 100_000) -> "PermutationPlan":
        return cls(Mode.EXHAUSTIVE, exhaustive_cap=cap)

    @classmethod
    def monte_carlo(cls, draws: int = 9999, seed: int = 0) -> "PermutationPlan":
        return cls(Mode.MONTE_CARLO, draws=draws, seed=seed)


@dataclass(frozen=True)
class PValueResult:
    p: float
    statistic_observed: float
    n_draws_effective: int
    exhaustive: bool
    n_extreme: int = 0


def philox_stream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, *key)``."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def _validate(treated, control) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(treated, dtype=np.float64).ravel()
    c = np.asarray(control, dtype=np.float64).ravel()
    if t.size == 0 or c.size == 0:
        raise EmptySideError(f"empty side: {t.size} treated, {c.size} control values")
    if not (np.isfinite(t).all() and np.isfinite(c).all()):
        raise ValidationError("statistic inputs must be finite")
    return t, c


def compute_stat(kind: StatKind, treated: Sequence[float], control: Sequence[float]) -> float:
    """Raw two-sample statistic (rank sum is not centered)."""
    kind = StatKind.parse(kind)
    t, c = _validate(treated, control)
    if kind is StatKind.DIFF_MEANS:
        return float(t.mean() - c.mean())
    if kind is StatKind.RANK_SUM:
        ranks = rankdata(np.concatenate([t, c]))
        return float(ranks[: t.size].sum())
    pooled = np.unique(np.concatenate([t, c]))
    f_t = np.searchsorted(np.sort(t), pooled, side="right") / t.size
    f_c = np.searchsorted(np.sort(c), pooled, side="right") / c.size
    return float(np.abs(f_t - f_c).max())


def statistic_matrix(kind: StatKind, values: np.ndarray, assign: np.ndarray) -> np.ndarray:
    """Two-sided test statistic for each assignment row.

    ``values`` holds the pooled outcomes, ``assign`` is a ``(k, n)`` 0/1 float
    matrix. Rows must have at least one treated and one control unit. Returns
    ``|mean_t - mean_c|``, ``|ranksum_t - n_t (n + 1) / 2|`` or the KS distance.
    """
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    n_t = assign.sum(axis=1)
    n_c = n - n_t
    if kind is StatKind.DIFF_MEANS:
        s_t = assign @ values
        return np.abs(s_t / n_t - (values.sum() - s_t) / n_c)
    if kind is StatKind.RANK_SUM:
        ranks = rankdata(values)
        return np.abs(assign @ ranks - n_t * (n + 1) / 2.0)
    order = np.argsort(values, kind="stable")
    sv = values[order]
    # evaluate the step functions only at the last copy of each distinct value
    ends = np.flatnonzero(np.append(sv[1:] != sv[:-1], True))
    cum_t = np.cumsum(assign[:, order], axis=1)[:, ends]
    cum_c = (ends + 1)[None, :] - cum_t
    return np.abs(cum_t / n_t[:, None] - cum_c / n_c[:, None]).max(axis=1)


@lru_cache(maxsize=32)
def exhaustive_assignments(n: int, n_t: int) -> np.ndarray:
    """All ``C(n, n_t)`` fixed-margins assignments as a read-only 0/1 matrix."""
    combos = np.array(list(itertools.combinations(range(n), n_t)), dtype=np.intp)
    out = np.zeros((len(combos), n))
    np.put_along_axis(out, combos, 1.0, axis=1)
    out.setflags(write=False)
    return out


def _permutation_block(seed: int, n: int, n_t: int, block: int, size: int) -> np.ndarray:
    rng = philox_stream(seed, _FIXED_MARGINS, block)
    picks = np.argsort(rng.random((size, n)), axis=1)[:, :n_t]
    out = np.zeros((size, n))
    np.put_along_axis(out, picks, 1.0, axis=1)
    return out


@lru_cache(maxsize=32)
def monte_carlo_assignments(n: int, n_t: int, draws: int, seed: int) -> np.ndarray:
    """``draws`` random fixed-margins assignments, block-keyed by ``(seed, block)``."""
    blocks = [
        _permutation_block(seed, n, n_t, b, min(CHUNK, draws - b * CHUNK))
        for b in range(math.ceil(draws / CHUNK))
    ]
    out = np.vstack(blocks)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=32)
def uniform_block_matrix(n: int, draws: int, seed: int) -> np.ndarray:
    """Uniforms used to draw independent Bernoulli assignments."""
    blocks = [
        philox_stream(seed, _UNIFORMS, b).random((min(CHUNK, draws - b * CHUNK), n))
        for b in range(math.ceil(draws / CHUNK))
    ]
    out = np.vstack(blocks)
    out.setflags(write=False)
    return out


def assignments_for(plan: PermutationPlan, n: int, n_t: int) -> np.ndarray:
    if plan.mode is Mode.EXHAUSTIVE:
        total = math.comb(n, n_t)
        if total > plan.exhaustive_cap:
            raise PlanError(
                f"exhaustive enumeration needs C({n}, {n_t}) = {total} assignments, "
                f"above exhaustive_cap = {plan.exhaustive_cap}"
            )
        return exhaustive_assignments(n, n_t)
    return monte_carlo_assignments(n, n_t, plan.draws, plan.seed)


def tie_tolerance(observed: float) -> float:
    return 1e-12 * max(1.0, abs(observed))


def permutation_pvalue(
    kind: StatKind,
    treated: Sequence[float],
    control: Sequence[float],
    plan: PermutationPlan,
    alternative: str = "two-sided",
) -> PValueResult:
    """Fixed-margins randomization p-value.

    Exhaustive mode counts the enumerated assignments (observed one included)
    whose statistic is at least the observed one; Monte Carlo mode returns
    ``(1 + hits) / (1 + draws)``.
    """
    if alternative != "two-sided":
        raise ConfigError(f"only two-sided alternatives are supported, got {alternative!r}")
    kind = StatKind.parse(kind)
    t, c = _validate(treated, control)
    pooled = np.concatenate([t, c])
    n, n_t = pooled.size, t.size
    assign = assignments_for(plan, n, n_t)

    observed_row = np.zeros((1, n))
    observed_row[0, :n_t] = 1.0
    t_obs = statistic_matrix(kind, pooled, observed_row)[0]
    hits = int(np.count_nonzero(statistic_matrix(kind, pooled, assign) >= t_obs - tie_tolerance(t_obs)))

    if plan.mode is Mode.EXHAUSTIVE:
        total = assign.shape[0]
        return PValueResult(hits / total, compute_stat(kind, t, c), total, True, hits)
    return PValueResult((1 + hits) / (1 + plan.draws), compute_stat(kind, t, c), plan.draws, False, hits)

"""Window-by-effect p-value surfaces and bounds under departures from randomization.

Bounds model
------------
Each unit is treated independently with probability ``pi_i`` in
``[1/(1+G), G/(1+G)]``; assignments leaving a side empty are excluded
(conditioning). The tail probability of the two-sided statistic is a ratio of
functions that are affine in every ``pi_i``, so its extremes over the box are
attained at vertices ``pi_i in {pi_lo, pi_hi}``. ``patterns="all"`` searches
every vertex (exact, small samples only). ``patterns="blocks"`` searches the
vertices whose high-probability units form a contiguous run in outcome order,
plus their complements; ``patterns="monotone"`` keeps only the top-k /
bottom-k runs. Both contain the two constant-probability vertices. Block
patterns reach the upper extreme and come close to the lower one in small
exact checks; monotone patterns reach the upper extreme but leave the lower
bound almost at its equal-probability value. Searches other than "all" give
inner approximations of the true range. Since the boxes are nested in ``G``,
each bound is the running extreme over all gammas searched so far, starting
from the equal-probability point.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from rdlocal._parallel import pmap
from rdlocal.data import Dataset, Window, subset_window
from rdlocal.errors import ConfigError, EmptySideError, NumericalDegeneracyError, PlanError
from rdlocal.inference import InferenceSpec, accepted_hull, adjust_outcomes, test_sharp_null
from rdlocal.stats import (
    Mode,
    PermutationPlan,
    StatKind,
    statistic_matrix,
    tie_tolerance,
    uniform_block_matrix,
)

NA = "NA"
PATTERNS = ("blocks", "monotone", "all")


class SensitivityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SensitivitySpec:
    windows: tuple[Window, ...]
    taus: tuple[float, ...]
    stat: StatKind = StatKind.DIFF_MEANS
    plan: PermutationPlan = field(default_factory=PermutationPlan)
    alpha: float = 0.05
    poly_order: int = 0

    def __post_init__(self):
        object.__setattr__(self, "stat", StatKind.parse(self.stat))
        object.__setattr__(self, "windows", tuple(self.windows))
        object.__setattr__(self, "taus", tuple(float(t) for t in self.taus))
        if not self.windows or not self.taus:
            raise ConfigError("sensitivity needs at least one window and one tau")
        if any(b <= a for a, b in zip(self.taus, self.taus[1:])):
            raise ConfigError("taus must be strictly ascending")


@dataclass(frozen=True)
class SensitivitySurface:
    windows: tuple[Window, ...]
    taus: tuple[float, ...]
    p: tuple[tuple[float, ...] | None, ...]
    per_window_ci: tuple[tuple[float, float] | None, ...]
    contiguous: tuple[bool, ...]
    alpha: float = 0.05
    notices: tuple[str, ...] = ()


def sensitivity_surface(dataset: Dataset, spec: SensitivitySpec, threads: int = 1) -> SensitivitySurface:
    """p-value of the sharp null for every (window, tau) cell.

    A window with an empty side yields a not-computed row and a warning; the
    call fails only when every window is empty on some side.
    """
    usable, notices = [], []
    for i, w in enumerate(spec.windows):
        try:
            subset_window(dataset, w)
            usable.append(i)
        except EmptySideError as exc:
            msg = f"window {w.label()} skipped: {exc}"
            notices.append(msg)
            warnings.warn(msg, SensitivityWarning, stacklevel=2)
    if not usable:
        raise EmptySideError("every sensitivity window has an empty side")

    cells = [(i, t) for i in usable for t in spec.taus]

    def cell(it):
        i, tau = it
        ispec = InferenceSpec(spec.windows[i], spec.stat, spec.poly_order, spec.plan, spec.alpha)
        return test_sharp_null(dataset, ispec, tau).p

    values = pmap(cell, cells, threads)
    taus = np.array(spec.taus)
    rows, cis, contig = [], [], []
    k = 0
    for i in range(len(spec.windows)):
        if i not in usable:
            rows.append(None)
            cis.append(None)
            contig.append(False)
            continue
        row = tuple(values[k:k + len(taus)])
        k += len(taus)
        lo, hi, c = accepted_hull(taus, np.array(row), spec.alpha)
        rows.append(row)
        cis.append(None if lo is None else (lo, hi))
        contig.append(c)
    return SensitivitySurface(spec.windows, spec.taus, tuple(rows), tuple(cis), tuple(contig),
                              spec.alpha, tuple(notices))


@dataclass(frozen=True)
class GammaBoundsSpec:
    window: Window
    gammas: tuple[float, ...] = (1.0, 1.5, 2.0)
    stat: StatKind = StatKind.DIFF_MEANS
    plan: PermutationPlan = field(default_factory=PermutationPlan)
    patterns: str = "blocks"
    max_splits: int = 20

    def __post_init__(self):
        object.__setattr__(self, "stat", StatKind.parse(self.stat))
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        if not self.gammas:
            raise ConfigError("gammas must not be empty")
        if any(g < 1 for g in self.gammas):
            raise ConfigError("gammas must be >= 1")
        if any(b <= a for a, b in zip(self.gammas, self.gammas[1:])):
            raise ConfigError("gammas must be strictly ascending")
        if self.patterns not in PATTERNS:
            raise ConfigError(f"patterns must be one of {', '.join(PATTERNS)}, got {self.patterns!r}")


@dataclass(frozen=True)
class GammaRow:
    gamma: float
    p_lower: float
    p_upper: float
    se_lower: float = 0.0
    se_upper: float = 0.0


@dataclass(frozen=True)
class GammaBoundsResult:
    rows: tuple[GammaRow, ...]
    window: Window
    stat: StatKind
    exhaustive: bool
    n_patterns: int


def probability_vertices(values: np.ndarray, patterns: str, max_splits: int = 20) -> np.ndarray:
    """0/1 matrix of vertex patterns (1 = unit at the high treatment probability).

    Run boundaries are every rank when ``n <= 2 * max_splits`` and
    ``max_splits + 1`` evenly spaced ranks otherwise.
    """
    n = values.size
    if patterns == "all":
        return ((np.arange(2**n)[:, None] >> np.arange(n)) & 1).astype(np.float64)
    if n <= 2 * max_splits:
        cuts = np.arange(n + 1)
    else:
        cuts = np.unique(np.round(np.linspace(0, n, max_splits + 1)).astype(int))
    rank = np.empty(n, dtype=np.intp)
    rank[np.argsort(-values, kind="stable")] = np.arange(n)  # 0 = largest outcome
    if patterns == "monotone":
        starts, stops = np.r_[np.zeros_like(cuts), cuts], np.r_[cuts, np.full_like(cuts, n)]
    else:
        starts, stops = (g.ravel() for g in np.meshgrid(cuts, cuts, indexing="ij"))
        keep = starts <= stops
        starts, stops = starts[keep], stops[keep]
    runs = ((rank[None, :] >= starts[:, None]) & (rank[None, :] < stops[:, None])).astype(np.float64)
    return np.unique(np.vstack([runs, 1.0 - runs]), axis=0)


def _valid_probability(pi: np.ndarray) -> np.ndarray:
    # P(at least one treated and one control) for each row of probabilities
    all_t = np.exp(np.log(pi).sum(axis=1))
    all_c = np.exp(np.log1p(-pi).sum(axis=1))
    return 1.0 - all_t - all_c


def _bernoulli_tails_exact(kind, values, pis, t_obs, cap):
    n = values.size
    if 2**n > cap:
        raise PlanError(f"exact weighting needs 2^{n} = {2**n} assignments, above exhaustive_cap = {cap}")
    assign = ((np.arange(2**n)[:, None] >> np.arange(n)) & 1).astype(np.float64)
    ntr = assign.sum(axis=1)
    assign = assign[(ntr > 0) & (ntr < n)]
    hit = (statistic_matrix(kind, values, assign) >= t_obs - tie_tolerance(t_obs)).astype(np.float64)
    logw = assign @ np.log(pis).T + (1.0 - assign) @ np.log1p(-pis).T  # (assignments, patterns)
    w = np.exp(logw)
    total = w.sum(axis=0)
    # ratio of sums can exceed 1 by an ulp when every assignment is a hit
    return np.clip(hit @ w / total, 0.0, 1.0), np.zeros(len(pis))


def _bernoulli_tails_mc(kind, values, vertices, lo, hi, t_obs, plan):
    """Tail estimates for every vertex from one shared set of uniforms.

    Unit ``i`` is treated when ``u_i < pi_i``. Invalid draws (a side left
    empty) are discarded, so each estimate is hits / valid draws.
    """
    n = values.size
    u = uniform_block_matrix(n, plan.draws, plan.seed)
    below_lo = (u < lo).astype(np.float64)
    below_hi = (u < hi).astype(np.float64)
    tol = tie_tolerance(t_obs)
    if kind is StatKind.KS:
        hits, valid = [], []
        for v in vertices:
            d = np.where(v[None, :] > 0, below_hi, below_lo)
            ntr = d.sum(axis=1)
            ok = (ntr > 0) & (ntr < n)
            valid.append(int(ok.sum()))
            hits.append(int(np.count_nonzero(statistic_matrix(kind, values, d[ok]) >= t_obs - tol)) if ok.any() else 0)
        hits, valid = np.array(hits, dtype=np.float64), np.array(valid, dtype=np.float64)
    else:
        # both remaining statistics are linear in the assignment: batch all vertices
        w = values if kind is StatKind.DIFF_MEANS else rankdata(values)
        hi_part, lo_part = vertices.T, 1.0 - vertices.T
        ntr = below_lo @ lo_part + below_hi @ hi_part
        s_t = below_lo @ (w[:, None] * lo_part) + below_hi @ (w[:, None] * hi_part)
        ok = (ntr > 0) & (ntr < n)
        with np.errstate(divide="ignore", invalid="ignore"):
            if kind is StatKind.DIFF_MEANS:
                stat = np.abs(s_t / ntr - (w.sum() - s_t) / (n - ntr))
            else:
                stat = np.abs(s_t - ntr * (n + 1) / 2.0)
        hits = ((stat >= t_obs - tol) & ok).sum(axis=0).astype(np.float64)
        valid = ok.sum(axis=0).astype(np.float64)
    if (valid == 0).any():
        raise NumericalDegeneracyError("no Monte Carlo draw left both sides non-empty")
    p = hits / valid
    return p, np.sqrt(p * (1.0 - p) / valid)


def gamma_bounds(dataset: Dataset, spec: GammaBoundsSpec, threads: int = 1) -> GammaBoundsResult:
    """Lower/upper randomization p-values (sharp null of no effect) for each gamma."""
    control, treated = subset_window(dataset, spec.window)
    y_c, y_t = adjust_outcomes(control, treated, 0.0, 0)
    values = np.concatenate([y_t, y_c])
    n = values.size
    observed = np.zeros((1, n))
    observed[0, : y_t.size] = 1.0
    t_obs = statistic_matrix(spec.stat, values, observed)[0]

    if spec.patterns == "all" and 2**n > spec.plan.exhaustive_cap:
        raise PlanError(f"patterns='all' needs 2^{n} vertices, above exhaustive_cap = {spec.plan.exhaustive_cap}")
    vertices = probability_vertices(values, spec.patterns, spec.max_splits)
    exhaustive = spec.plan.mode is Mode.EXHAUSTIVE

    def one(gamma: float) -> GammaRow:
        lo, hi = 1.0 / (1.0 + gamma), gamma / (1.0 + gamma)
        verts = vertices if hi > lo else vertices[:1]
        pis = lo + (hi - lo) * verts
        if _valid_probability(pis).min() < 1e-9:
            raise NumericalDegeneracyError(
                f"gamma={gamma:g}: probability of an assignment with both sides non-empty is below 1e-9"
            )
        if exhaustive:
            tails, ses = _bernoulli_tails_exact(spec.stat, values, pis, t_obs, spec.plan.exhaustive_cap)
        else:
            tails, ses = _bernoulli_tails_mc(spec.stat, values, verts, lo, hi, t_obs, spec.plan)
        i_lo, i_hi = int(np.argmin(tails)), int(np.argmax(tails))
        return GammaRow(gamma, float(tails[i_lo]), float(tails[i_hi]), float(ses[i_lo]), float(ses[i_hi]))

    # box(G') is inside box(G) for G' <= G, so points searched at smaller gammas
    # (and the equal-probability point) stay feasible: carry running extremes
    searched = spec.gammas if spec.gammas[0] == 1.0 else (1.0, *spec.gammas)
    raw = pmap(one, searched, threads)
    rows, lo_row, hi_row = [], raw[0], raw[0]
    for r in raw:
        if r.p_lower < lo_row.p_lower:
            lo_row = r
        if r.p_upper > hi_row.p_upper:
            hi_row = r
        if r.gamma in spec.gammas:
            rows.append(GammaRow(r.gamma, lo_row.p_lower, hi_row.p_upper, lo_row.se_lower, hi_row.se_upper))
    return GammaBoundsResult(tuple(rows), spec.window, spec.stat, exhaustive, len(vertices))


def surface_table(surface: SensitivitySurface) -> list[dict]:
    """Long format: one record per (window, tau); not-computed cells carry ``NA``."""
    out = []
    for w, row in zip(surface.windows, surface.p):
        for j, tau in enumerate(surface.taus):
            out.append({"left": w.left, "right": w.right, "half_width": w.half_width,
                        "tau": tau, "p": NA if row is None else row[j]})
    return out


def surface_ci_table(surface: SensitivitySurface) -> list[dict]:
    out = []
    for w, ci, c in zip(surface.windows, surface.per_window_ci, surface.contiguous):
        out.append({"left": w.left, "right": w.right, "half_width": w.half_width,
                    "ci_low": NA if ci is None else ci[0], "ci_high": NA if ci is None else ci[1],
                    "contiguous": c if ci is not None else NA})
    return out


def bounds_table(result: GammaBoundsResult) -> list[dict]:
    return [{"gamma": r.gamma, "p_lower": r.p_lower, "p_upper": r.p_upper} for r in result.rows]


def emit_sensitivity_tables(obj) -> list[dict]:
    if isinstance(obj, SensitivitySurface):
        return surface_table(obj)
    if isinstance(obj, GammaBoundsResult):
        return bounds_table(obj)
    raise TypeError(f"cannot tabulate {type(obj).__name__}")


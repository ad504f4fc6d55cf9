import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from rdlocal.errors import ConfigError, EmptySideError, PlanError, ValidationError
from rdlocal.stats import (
    Mode,
    PermutationPlan,
    StatKind,
    compute_stat,
    exhaustive_assignments,
    monte_carlo_assignments,
    permutation_pvalue,
)


def oracle_p(kind, t, c):
    return oracles.exact_p(kind.value, t, c)


def test_diffmeans_value():
    assert compute_stat(StatKind.DIFF_MEANS, [2, 4], [1, 3]) == 1.0


def test_ks_disjoint():
    assert compute_stat(StatKind.KS, [4, 5, 6], [1, 2, 3]) == 1.0


def test_ranksum_midranks():
    oracle = sum(oracles.midranks([10, 20, 5, 20])[:2])
    assert oracle == 5.5
    assert compute_stat(StatKind.RANK_SUM, [10, 20], [5, 20]) == oracle


@pytest.mark.parametrize("text,kind", [("DiffMeans", StatKind.DIFF_MEANS), ("rank_sum", StatKind.RANK_SUM),
                                       ("KolmogorovSmirnov", StatKind.KS), ("ks", StatKind.KS)])
def test_parse_aliases(text, kind):
    assert StatKind.parse(text) is kind


def test_parse_unknown():
    with pytest.raises(ConfigError):
        StatKind.parse("t-test")


def test_empty_and_nonfinite():
    with pytest.raises(EmptySideError):
        compute_stat(StatKind.DIFF_MEANS, [], [1])
    with pytest.raises(ValidationError):
        compute_stat(StatKind.DIFF_MEANS, [math.inf], [1])


@pytest.mark.parametrize("kind", list(StatKind))
def test_identical_multisets(kind):
    assert permutation_pvalue(kind, [1, 2, 3], [1, 2, 3], PermutationPlan.exhaustive()).p == 1.0


def test_exhaustive_counts():
    r = permutation_pvalue(StatKind.DIFF_MEANS, [4, 5, 6], [1, 2, 3], PermutationPlan.exhaustive())
    assert (r.n_extreme, r.n_draws_effective, r.exhaustive) == (2, 20, True)
    assert r.statistic_observed == 3.0


@pytest.mark.parametrize("kind", list(StatKind))
@pytest.mark.parametrize("t,c", [
    ([1.5, 2.0, 7.0, 3.0], [0.5, 2.0, 1.0]),
    ([3, 3, 3, 1], [3, 1, 2, 2, 5]),
    ([0.1, 0.2], [0.3, 0.4, 0.5, 0.6, 0.05]),
])
def test_exhaustive_matches_bruteforce(kind, t, c):
    assert permutation_pvalue(kind, t, c, PermutationPlan.exhaustive()).p == pytest.approx(oracle_p(kind, t, c),
                                                                                             abs=1e-15)


@pytest.mark.parametrize("kind", list(StatKind))
@pytest.mark.parametrize("draws", [999, 9999])
def test_monte_carlo_agrees(kind, draws):
    t, c = [1.2, 3.4, 2.2, 5.0, 4.1], [0.3, 2.0, 1.1, 2.9, 0.7, 1.9]
    exact = oracle_p(kind, t, c)
    mc = permutation_pvalue(kind, t, c, PermutationPlan.monte_carlo(draws, 3)).p
    assert abs(mc - exact) <= 3 * math.sqrt(exact * (1 - exact) / draws) + 1 / (draws + 1)


def test_cap_error_names_count():
    with pytest.raises(PlanError, match="C\\(30, 15\\)"):
        permutation_pvalue(StatKind.DIFF_MEANS, range(15), range(15), PermutationPlan.exhaustive())


def test_two_sided_only():
    with pytest.raises(ConfigError):
        permutation_pvalue(StatKind.DIFF_MEANS, [1], [2], PermutationPlan(), alternative="greater")


def test_assignment_matrices():
    a = exhaustive_assignments(6, 3)
    assert a.shape == (20, 6) and (a.sum(axis=1) == 3).all()
    assert len({tuple(r) for r in a}) == 20
    m = monte_carlo_assignments(10, 4, 2500, 5)
    assert m.shape == (2500, 10) and (m.sum(axis=1) == 4).all()
    assert not m.flags.writeable


def test_monte_carlo_blocks_nest():
    # the first 1024 draws are the same whatever the total
    a = monte_carlo_assignments(8, 3, 1500, 9)
    b = monte_carlo_assignments(8, 3, 3000, 9)
    assert np.array_equal(a[:1024], b[:1024])


def test_plan_validation():
    with pytest.raises(ConfigError):
        PermutationPlan(Mode.MONTE_CARLO, draws=0)


samples = st.lists(st.integers(-20, 20).map(float), min_size=1, max_size=5)


@settings(max_examples=40, deadline=None)
@given(samples, samples, st.sampled_from(list(StatKind)), st.randoms(use_true_random=False))
def test_exchangeable_within_sides(t, c, kind, rnd):
    plan = PermutationPlan.exhaustive()
    base = permutation_pvalue(kind, t, c, plan)
    t2, c2 = t[:], c[:]
    rnd.shuffle(t2)
    rnd.shuffle(c2)
    assert permutation_pvalue(kind, t2, c2, plan).p == base.p


@settings(max_examples=40, deadline=None)
@given(samples, samples, st.sampled_from([StatKind.DIFF_MEANS, StatKind.KS]))
def test_swap_symmetry(t, c, kind):
    plan = PermutationPlan.exhaustive()
    assert permutation_pvalue(kind, t, c, plan).p == permutation_pvalue(kind, c, t, plan).p


@settings(max_examples=20, deadline=None)
@given(samples, samples, st.sampled_from(list(StatKind)), st.integers(0, 2**32))
def test_deterministic(t, c, kind, seed):
    plan = PermutationPlan.monte_carlo(199, seed)
    assert permutation_pvalue(kind, t, c, plan) == permutation_pvalue(kind, t, c, plan)

import itertools

import pytest

from conftest import make_dataset
from rdlocal.config import load_config
from rdlocal.data import Window, load_panel_csv, recenter
from rdlocal.errors import ConfigError, ValidationError
from rdlocal.stats import PermutationPlan, StatKind
from rdlocal.winselect import StopReason, WindowScanSpec, emit_scan_plot_data, scan_windows

EXACT = PermutationPlan.exhaustive()


def balance_break():
    run_c = [-2.125] * 4 + [-2.0, -1.0, -0.5]
    run_t = [0.25 * i for i in range(9)]
    return make_dataset([0.0] * 7, [0.0] * 9, run_c, run_t, [100.0] * 4 + [0.0] * 3, [0.0] * 9)


def constant_cov(n=20, step=0.25):
    return make_dataset([0.0] * n, [0.0] * n, [-step * (i + 1) for i in range(n)],
                        [step * i for i in range(n)], [7.0] * n, [7.0] * n)


def test_break_p_value_matches_enumeration():
    # 16 units, four carry 100 and all sit in control (7 of 16)
    obs = 400 / 7
    hits = total = 0
    for ctrl in itertools.combinations(range(16), 7):
        k = sum(1 for i in ctrl if i < 4)
        hits += abs(100 * (4 - k) / 9 - 100 * k / 7) >= obs - 1e-9
        total += 1
    assert (hits, total) == (220, 11440)
    res = scan_windows(balance_break(), WindowScanSpec(1.0, 5.0, 0.125, plan=EXACT, min_obs_per_side=2))
    crossed = res.rows[-1]
    assert crossed.window == Window(-2.125, 2.125)
    assert crossed.min_pvalue == pytest.approx(hits / total, abs=1e-15)
    assert res.recommended == Window(-2.0, 2.0)
    assert res.stop_reason is StopReason.THRESHOLD_CROSSED
    assert all(r.min_pvalue == 1.0 for r in res.rows[:-1])


def test_constant_covariate_reaches_max():
    res = scan_windows(constant_cov(), WindowScanSpec(plan=PermutationPlan.monte_carlo(99, 0), min_obs_per_side=2))
    assert res.recommended == Window(-5.0, 5.0)
    assert res.stop_reason is StopReason.MAX_WINDOW_REACHED
    assert all(r.min_pvalue == 1.0 for r in res.rows)
    assert len(emit_scan_plot_data(res)) == 33


def test_rows_increase_by_increment():
    res = scan_windows(constant_cov(), WindowScanSpec(1.0, 3.0, 0.25, plan=PermutationPlan.monte_carlo(99, 0),
                                                      min_obs_per_side=2))
    widths = [r.window.half_width for r in res.rows]
    assert all(b - a == 0.25 for a, b in zip(widths, widths[1:]))
    assert all(r.min_pvalue == min(r.covariate_pvalues) for r in res.rows)


def test_first_window_failing_gives_none():
    ds = make_dataset([0.0] * 4, [0.0] * 4, [-0.25, -0.5, -0.75, -1.0], [0, 0.25, 0.5, 0.75],
                      [50.0] * 4, [0.0, 0.1, 0.2, 0.3])
    res = scan_windows(ds, WindowScanSpec(1.0, 2.0, 0.5, plan=EXACT, min_obs_per_side=2))
    assert res.recommended is None and len(res.rows) == 1
    assert res.stop_reason is StopReason.THRESHOLD_CROSSED


def test_insufficient_obs():
    res = scan_windows(constant_cov(), WindowScanSpec(plan=EXACT, min_obs_per_side=10))
    assert res.stop_reason is StopReason.INSUFFICIENT_OBS and res.recommended is None and res.rows == ()


def test_needs_covariate():
    with pytest.raises(ValidationError):
        scan_windows(make_dataset([1.0], [2.0]), WindowScanSpec())


def test_invalid_settings_rejected():
    with pytest.raises(ConfigError):
        WindowScanSpec(w_min=2, w_max=1)
    with pytest.raises(ConfigError):
        WindowScanSpec(increment=0)


def test_plot_data_is_verbatim():
    res = scan_windows(balance_break(), WindowScanSpec(1.0, 5.0, 0.125, plan=EXACT, min_obs_per_side=2))
    table = emit_scan_plot_data(res)
    assert len(table) == len(res.rows) == 10
    for row, r in zip(table, res.rows):
        assert row["half_width"] == r.window.half_width and row["min_pvalue"] == r.min_pvalue
        assert row["p_x"] == r.covariate_pvalues[0]


def test_snap_to_tightest_equivalent_window():
    cfg = load_config()
    ds = recenter(load_panel_csv(cfg.data_path), cfg.cutoff_year, "gini", ["pbf"])
    plain = scan_windows(ds, WindowScanSpec(min_obs_per_side=2, plan=PermutationPlan.monte_carlo(999, 1)))
    snapped = scan_windows(ds, WindowScanSpec(min_obs_per_side=2, plan=PermutationPlan.monte_carlo(999, 1),
                                              snap_recommended=True))
    # annual data: [-3.875, 3.875] holds the same observations as [-3, 3]
    assert plain.recommended == Window(-3.875, 3.875)
    assert snapped.recommended == Window(-3.0, 3.0)


def test_threads_do_not_change_scan():
    ds = balance_break()
    spec = WindowScanSpec(1.0, 5.0, 0.125, plan=PermutationPlan.monte_carlo(499, 2), min_obs_per_side=2)
    assert scan_windows(ds, spec, threads=1) == scan_windows(ds, spec, threads=3)


@pytest.mark.parametrize("kind", list(StatKind))
def test_every_statistic_sees_the_break(kind):
    res = scan_windows(balance_break(), WindowScanSpec(1.0, 5.0, 0.125, kind, EXACT, min_obs_per_side=2))
    assert res.recommended.half_width <= 2.125

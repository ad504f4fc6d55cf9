import numpy as np
import pytest

from rdlocal.config import load_config, parse_config
from rdlocal.data import Window, load_panel_csv
from rdlocal.errors import ConfigError
from rdlocal.stats import Mode
from rdlocal.synth import CovariateCurve, OutcomeCurve, SynthSpec, generate_synthetic, synthesize


def minimal(**extra):
    doc = {"data_path": "x.csv", "outcomes": ["gini"], "covariates": ["pbf"],
           "inference": {"gini": {"tau_grid": [-0.1, 0.1, 0.01]}}}
    doc.update(extra)
    return doc


def test_packaged_config_loads():
    cfg = load_config()
    assert cfg.outcomes == ("gini", "male_income", "female_income")
    assert cfg.plan.mode is Mode.MONTE_CARLO and cfg.plan.draws == 9999 and cfg.plan.seed == 20111
    assert cfg.data_path.exists()
    assert cfg.scan.w_min == 1.0 and cfg.scan.w_max == 5.0 and cfg.scan.increment == 0.125


def test_seed_override():
    assert load_config(seed_override=7).plan.seed == 7


def test_empty_outcomes_named():
    with pytest.raises(ConfigError, match="outcomes"):
        parse_config(minimal(outcomes=[]))


def test_missing_tau_grid_named():
    doc = minimal()
    doc["inference"] = {}
    with pytest.raises(ConfigError, match="inference.gini.tau_grid"):
        parse_config(doc)


def test_all_problems_reported_together():
    doc = minimal(plan={"mode": "bogus"}, bounds={"gammas": [0.5]})
    with pytest.raises(ConfigError) as exc:
        parse_config(doc)
    msg = str(exc.value)
    assert "plan" in msg and "bounds.gammas" in msg


def test_bad_window_reported():
    doc = minimal()
    doc["inference"]["window"] = [1, -1]
    with pytest.raises(ConfigError, match="inference.window"):
        parse_config(doc)


def test_relative_data_path(tmp_path):
    assert parse_config(minimal(), tmp_path).data_path == tmp_path / "x.csv"


def test_missing_and_malformed_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "none.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("seed = [", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_explicit_window_parsed():
    doc = minimal()
    doc["inference"]["window"] = [-2, 2]
    assert parse_config(doc).default_window == Window(-2.0, 2.0)


def test_synth_counts_and_determinism(tmp_path):
    spec = load_config().synth
    a = generate_synthetic(spec, tmp_path / "a.csv")
    b = generate_synthetic(spec, tmp_path / "b.csv")
    assert a.read_bytes() == b.read_bytes()
    assert len(load_panel_csv(a)) == 324


def test_packaged_fixture_is_generator_output(tmp_path):
    cfg = load_config()
    out = generate_synthetic(cfg.synth, tmp_path / "panel.csv")
    assert out.read_bytes() == cfg.data_path.read_bytes()


def test_zero_noise_on_trend():
    spec = SynthSpec(n_units=3, gini=OutcomeCurve(0.5, -0.01, -0.002, 0.0),
                     male_income=OutcomeCurve(2000.0, 50.0, 20.0, 10.0),
                     female_income=OutcomeCurve(1500.0, 40.0, 10.0),
                     pbf=CovariateCurve(10.0, 0.0, 0.0, 3, 0.0, 0.0, 0.0))
    recs = synthesize(spec)
    for r in recs:
        m = r.year - 2011
        assert r.value("gini") == round(0.5 + (-0.01 if m < 0 else -0.002) * m, 6)
        assert r.value("male_income") == round(2000.0 + (50.0 * m if m < 0 else 10.0 + 20.0 * m), 2)
        assert r.value("pbf") == round(np.exp(10.0))


def test_pbf_flat_inside_band_and_lower_outside():
    f = CovariateCurve(growth=0.0, stable_halfwidth=3, drift_pre=0.5, drift_post=0.1).factor(np.arange(-7, 5))
    assert np.all(f[4:11] == 1.0)
    assert f[0] == pytest.approx(0.5**4) and f[-1] == pytest.approx(0.9)


def test_income_ordering_in_fixture():
    recs = load_panel_csv(load_config().data_path)
    male = np.mean([r.value("male_income") for r in recs])
    female = np.mean([r.value("female_income") for r in recs])
    assert male > female


def test_synth_validation():
    with pytest.raises(ConfigError):
        SynthSpec(year_start=2015, year_end=2004)
    with pytest.raises(ConfigError):
        SynthSpec(gini=OutcomeCurve(0.5, 0, 0, noise_sd=-1))

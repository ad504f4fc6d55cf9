import math

import pytest

from rdlocal.config import load_config
from rdlocal.data import (
    DEFAULT_SCHEMA,
    Dataset,
    Observation,
    PanelRecord,
    Window,
    load_panel_csv,
    recenter,
    split_window,
    subset_window,
    write_panel_csv,
)
from rdlocal.errors import EmptySideError, ParseError, SchemaError, ValidationError

HEADER = "unit_id,year,gini,male_income,female_income,pbf\n"


def write(tmp_path, body, header=HEADER):
    p = tmp_path / "panel.csv"
    p.write_text(header + body, encoding="utf-8")
    return p


def test_row_maps_to_record(tmp_path):
    recs = load_panel_csv(write(tmp_path, "Acre,2004,0.52,900,700,41000\n"))
    assert len(recs) == 1
    r = recs[0]
    assert (r.unit_id, r.year) == ("Acre", 2004)
    assert r.value("gini") == 0.52 and r.value("male_income") == 900.0
    assert r.value("female_income") == 700.0 and r.covariate_values == {"pbf": 41000.0}


def test_missing_column_names_it(tmp_path):
    p = write(tmp_path, "Acre,2004,900,700,41000\n", header="unit_id,year,male_income,female_income,pbf\n")
    with pytest.raises(SchemaError) as exc:
        load_panel_csv(p)
    assert exc.value.column == "gini" and "gini" in str(exc.value)


def test_unparsable_cell_reports_row_and_column(tmp_path):
    p = write(tmp_path, "Acre,2004,0.5,900,700,1\nAcre,2005,0.5,abc,700,1\n")
    with pytest.raises(ParseError) as exc:
        load_panel_csv(p)
    assert exc.value.row == 3 and exc.value.column == "male_income"


def test_empty_cell_is_not_imputed(tmp_path):
    with pytest.raises(ParseError):
        load_panel_csv(write(tmp_path, "Acre,2004,,900,700,1\n"))


def test_duplicate_unit_year(tmp_path):
    with pytest.raises(ValidationError, match="duplicate"):
        load_panel_csv(write(tmp_path, "Acre,2004,0.5,1,1,1\nAcre,2004,0.5,1,1,1\n"))


def test_missing_file():
    with pytest.raises(OSError):
        load_panel_csv("/nonexistent/panel.csv")


def test_custom_schema(tmp_path):
    p = write(tmp_path, "X,2010,0.4,1,2,3\n", header="uf,ano,g,m,f,bolsa\n")
    schema = dict(zip(DEFAULT_SCHEMA, ["uf", "ano", "g", "m", "f", "bolsa"]))
    assert load_panel_csv(p, schema)[0].value("pbf") == 3.0


def test_gini_range_enforced():
    with pytest.raises(ValidationError):
        PanelRecord("A", 2004, {"gini": 1.2})


def test_row_order_preserved(tmp_path):
    recs = load_panel_csv(write(tmp_path, "B,2005,0.5,1,1,1\nA,2004,0.5,1,1,1\n"))
    assert [r.unit_id for r in recs] == ["B", "A"]


def test_roundtrip_is_exact(tmp_path):
    p = write(tmp_path, "Acre,2004,0.523411,901.25,700.5,41000\nAcre,2005,0.5,900,700.01,0\n")
    recs = load_panel_csv(p)
    out = tmp_path / "again.csv"
    write_panel_csv(out, recs, precision={"gini": 6, "male_income": 2, "female_income": 2, "pbf": 0})
    assert load_panel_csv(out) == recs


def test_fixture_has_324_records():
    recs = load_panel_csv(load_config().data_path)
    assert len(recs) == 27 * 12
    assert {r.year for r in recs} == set(range(2004, 2016))


@pytest.mark.parametrize("year,running", [(2004, -7), (2011, 0), (2015, 4)])
def test_recenter(year, running):
    ds = recenter([PanelRecord("A", year, {"gini": 0.5}, {"pbf": 1.0})], 2011, "gini", ["pbf"])
    assert ds.observations[0].running == running and ds.cutoff == 0.0


def test_recenter_missing_field():
    with pytest.raises(ValidationError, match="A"):
        recenter([PanelRecord("A", 2004, {"gini": 0.5})], 2011, "male_income")


def _annual(years):
    return recenter([PanelRecord("A", y, {"gini": 0.5}) for y in years], 2011, "gini")


def test_subset_boundary():
    c, t = subset_window(_annual([2010, 2011, 2012]), Window(-1, 1))
    assert [o.running for o in c] == [-1.0] and [o.running for o in t] == [0.0, 1.0]


def test_subset_empty_side():
    with pytest.raises(EmptySideError):
        subset_window(_annual([2010, 2011, 2012]), Window(0, 0))
    assert split_window(_annual([2010, 2011, 2012]), Window(0, 0))[0] == []


def test_fixture_counts_at_five():
    cfg = load_config()
    ds = recenter(load_panel_csv(cfg.data_path), cfg.cutoff_year, "gini", ["pbf"])
    c, t = subset_window(ds, Window(-5, 5))
    assert len(c) == 135 and len(t) == 135
    assert sorted({o.running for o in c}) == [-5, -4, -3, -2, -1]
    assert sorted({o.running for o in t}) == [0, 1, 2, 3, 4]


@pytest.mark.parametrize("w", [0.5, 1, 2.5, 3, 7])
def test_subset_matches_year_filter(w):
    ds = _annual(range(2004, 2016))
    c, t = split_window(ds, Window(-w, w))
    expect = [y - 2011 for y in range(2004, 2016) if abs(y - 2011) <= w]
    got = sorted(o.running for o in c + t)
    assert got == expect
    assert all(o.running < 0 for o in c) and all(o.running >= 0 for o in t)


def test_window_invariants():
    with pytest.raises(ValidationError):
        Window(1, -1)
    with pytest.raises(ValidationError):
        Window(1, 2).check(0.0)
    assert Window.symmetric(2.5).half_width == 2.5


def test_dataset_covariate_arity():
    with pytest.raises(ValidationError):
        Dataset((Observation("a", 0.0, 1.0, (1.0,)),), 0.0, "y", ())


def test_nonfinite_running():
    with pytest.raises(ValidationError):
        Observation("a", math.nan, 1.0)

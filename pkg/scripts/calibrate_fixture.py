"""Regenerate the packaged replication panel and check its calibration targets.

Usage:
    python scripts/calibrate_fixture.py           # verify only
    python scripts/calibrate_fixture.py --write   # overwrite the packaged CSV first

Targets: recommended window [-3, 3]; gini and female_income p < 0.05;
male_income p in [0.05, 0.10); at half-width 2.875 every income tau in
[90, 200] accepted at alpha; gamma bounds leave every decision unchanged.
"""

import argparse
import sys
import tempfile
from pathlib import Path

from rdlocal.config import load_config
from rdlocal.pipeline import analyze, build_summary
from rdlocal.synth import generate_synthetic


def check(cfg) -> list[tuple[str, bool, str]]:
    an = analyze(cfg)
    s = build_summary(an)
    out = []
    rec = s["window_scan"]["recommended"]
    out.append(("recommended window [-3, 3]", rec == [-3.0, 3.0], str(rec)))
    p = {o: e["inference"]["p_value"] for o, e in s["outcomes"].items()}
    out.append(("gini p < 0.05", p["gini"] < 0.05, f"{p['gini']:.4f}"))
    out.append(("female_income p < 0.05", p["female_income"] < 0.05, f"{p['female_income']:.4f}"))
    out.append(("male_income 0.05 <= p < 0.10", 0.05 <= p["male_income"] < 0.10, f"{p['male_income']:.4f}"))
    for o in ("male_income", "female_income"):
        surf = an.surfaces[o]
        row = surf.p[[w.half_width for w in surf.windows].index(2.875)]
        band = [v for t, v in zip(surf.taus, row) if 90 <= t <= 200]
        ci = surf.per_window_ci[[w.half_width for w in surf.windows].index(2.875)]
        out.append((f"{o} accepts [90, 200] at 2.875", bool(band) and min(band) > cfg.alpha, f"hull {ci}"))
    for o, e in s["outcomes"].items():
        rows = e["bounds"]["rows"]
        out.append((f"{o} gamma decisions unchanged", e["bounds"]["decision_unchanged"],
                    " ".join(f"G{r['gamma']:g}:[{r['p_lower']:.4f},{r['p_upper']:.4f}]" for r in rows)))
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--write", action="store_true", help="overwrite the packaged panel with fresh output")
    args = ap.parse_args(argv)

    cfg = load_config()
    with tempfile.TemporaryDirectory() as tmp:
        fresh = generate_synthetic(cfg.synth, Path(tmp) / "panel.csv").read_bytes()
    same = fresh == cfg.data_path.read_bytes()
    print(f"packaged panel matches generator output: {same}")
    if args.write and not same:
        cfg.data_path.write_bytes(fresh)
        print(f"wrote {cfg.data_path}")

    results = check(cfg)
    for name, ok, detail in results:
        print(f"{'ok  ' if ok else 'FAIL'} {name}: {detail}")
    return 0 if all(ok for _, ok, _ in results) and (same or args.write) else 1


if __name__ == "__main__":
    sys.exit(main())

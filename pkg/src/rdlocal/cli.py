"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 inference
degeneracy (empty window side, rank deficiency, no usable window).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from rdlocal.config import ENV_OUT, load_config
from rdlocal.errors import ConfigError, RDError
from rdlocal.pipeline import STAGES, ingest, prepare_output, run_pipeline
from rdlocal.synth import generate_synthetic

log = logging.getLogger("rdlocal")


def _u64(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help="TOML run configuration (default: packaged replication config)")
    common.add_argument("--seed", type=_u64, default=None, help="override the configured seed")
    common.add_argument("--out", type=Path, default=None,
                        help=f"output directory (default: ${ENV_OUT}, then config output_dir)")
    common.add_argument("--force", action="store_true", help="allow writing into a non-empty output directory")
    common.add_argument("--threads", type=_positive, default=1, help="worker threads (results do not depend on it)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="rdlocal",
        description="Local-randomization inference for regression discontinuity designs on panel data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="write the synthetic panel described by the config")
    sub.add_parser("ingest", parents=[common], help="validate the configured data file")
    sub.add_parser("winselect", parents=[common], help="covariate-balance window scan")
    sub.add_parser("randinf", parents=[common], help="point estimates, p-values and confidence intervals")
    sub.add_parser("sensitivity", parents=[common], help="p-value surfaces over windows and effects")
    sub.add_parser("rbounds", parents=[common], help="p-value bounds under unequal assignment odds")
    sub.add_parser("pipeline", parents=[common], help="run every stage and render figures")
    return parser


def _output_dir(args, cfg) -> Path:
    if args.out is not None:
        return args.out
    env = os.environ.get(ENV_OUT)
    if env:
        return Path(env)
    if cfg.output_dir is not None:
        return cfg.output_dir
    raise ConfigError(f"output_dir: not set (use --out, ${ENV_OUT} or output_dir in the config)")


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    cfg = load_config(args.config, args.seed)

    if args.command == "ingest":
        records = ingest(cfg)
        units = sorted({r.unit_id for r in records})
        years = sorted({r.year for r in records})
        print(json.dumps({"records": len(records), "units": len(units),
                          "years": [years[0], years[-1]] if years else None}))
        return 0

    out = _output_dir(args, cfg)
    if args.command == "synth":
        spec = cfg.synth if args.seed is None else type(cfg.synth)(**{**cfg.synth.__dict__, "seed": args.seed})
        out = prepare_output(out, args.force)
        path = generate_synthetic(spec, out / "panel.csv")
        print(path)
        return 0

    stages = STAGES if args.command == "pipeline" else (args.command,)
    report = run_pipeline(cfg, out, force=args.force, threads=args.threads, stages=stages)
    for path in report.artifacts:
        print(path)
    return 0


def main(argv=None) -> int:
    try:
        return run(argv)
    except RDError as exc:
        print(f"rdlocal: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())

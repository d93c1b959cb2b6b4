"""Command-line entry point: ``daud <command> [flags]``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import load_config
from .errors import DaudError
from .pipeline import REPORT_JSON, run_pipeline
from .report import parse_report, render_report
from .synth import SyntheticSpec, generate_synthetic, write_world

log = logging.getLogger("daud")

STAGE_OF = {"ingest": "ingest", "enrich": "enrich", "profiles": "profiles", "augment": "augment",
            "train": "train", "eval": "evaluate", "run": "evaluate"}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="pipeline config file (JSON or YAML)")
    p.add_argument("--backend", choices=("mock", "http"))
    p.add_argument("--setting", choices=("general", "unseen"))
    p.add_argument("--target", help="target domain")
    p.add_argument("--seed", type=int, help="run a single seed instead of the configured list")
    p.add_argument("--variant", choices=("full", "wo_ldae", "wo_dsra"))
    p.add_argument("--cache-dir", dest="cache_dir")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="daud", description="Cross-domain fake news detection pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGE_OF:
        p = sub.add_parser(name, help=f"run the pipeline through the {STAGE_OF[name]} stage")
        _common(p)
        p.add_argument("--corpus", help="corpus JSONL file")
    p = sub.add_parser("report", help="render the saved run report")
    _common(p)
    p.add_argument("--format", choices=("md", "markdown", "json"), default="md")
    p = sub.add_parser("synth", help="write a synthetic corpus, mock rules and a matching config")
    _common(p)
    p.add_argument("--spec", help="SyntheticSpec JSON file; defaults when absent")
    return parser


def _config(args):
    cfg = load_config(args.config)
    return cfg.with_overrides(corpus=getattr(args, "corpus", None), cache_dir=args.cache_dir,
                              out_dir=args.out_dir, backend=args.backend, setting=args.setting,
                              target=args.target, seed=args.seed, variant=args.variant)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            spec = SyntheticSpec.load(args.spec) if args.spec else SyntheticSpec()
            if args.seed is not None:
                spec.seed = args.seed
            paths = write_world(generate_synthetic(spec), args.out_dir or "daud-synth")
            for name, path in paths.items():
                print(f"{name}: {path}")
            return 0
        cfg = _config(args)
        if args.command == "report":
            text = (Path(cfg.paths.out_dir) / REPORT_JSON).read_text()
            fmt = "json" if args.format == "json" else "markdown"
            sys.stdout.write(render_report(parse_report(text), fmt))
            return 0
        report = run_pipeline(cfg, STAGE_OF[args.command])
        if report is not None:
            sys.stdout.write(render_report(report, "markdown"))
        return 0
    except DaudError as exc:
        stage = getattr(exc, "stage", None)
        where = f"stage {stage} failed: " if stage else ""
        print(f"daud: {where}{type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"daud: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

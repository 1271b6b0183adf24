"""Command line interface.

Subcommands cover the pipeline end to end::

    sceneqa synth     --out out --seed 7           # synthetic scenes + truth
    sceneqa extract   --out out --jobs 2           # scenes -> ground-truth tables
    sceneqa generate  --out out --stub-llm         # tables -> dataset.jsonl
    sceneqa selfcheck --out out                    # audit the dataset
    sceneqa score     --out out --predictions p.jsonl

Exit codes: 0 success, 1 unexpected failure, 2 configuration problem,
3 unreadable or malformed inputs, 4 generation shortfall (not enough valid
candidates or rewrite attempts), 5 self-check failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import (
    ConfigError,
    DegenerateInputError,
    ExhaustedAttemptsError,
    InconsistentTripletError,
    InsufficientCandidatesError,
    InvalidSpecError,
    MalformedFileError,
    SceneQaError,
    SchemaViolationError,
    ServiceUnavailableError,
)
from .pipeline import (
    PipelineConfig,
    apply_overrides,
    load_config,
    run_extract,
    run_generate,
    run_score,
    run_selfcheck,
    run_synth,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_SHORTFALL = 4
EXIT_SELFCHECK = 5

_INPUT_ERRORS = (
    FileNotFoundError,
    MalformedFileError,
    SchemaViolationError,
    InconsistentTripletError,
    InvalidSpecError,
    DegenerateInputError,
)
_SHORTFALL_ERRORS = (
    InsufficientCandidatesError,
    ExhaustedAttemptsError,
    ServiceUnavailableError,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sceneqa",
        description="Numerical question answering over annotated 3D scenes: "
                    "ground-truth extraction, dataset generation, and scoring.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--seed", type=int, help="master seed override")
        sp.add_argument("--out", help="output directory override")
        sp.add_argument("--jobs", type=int, help="worker processes for geometry")

    sp = sub.add_parser("synth", help="write synthetic scenes with analytic ground truth")
    add_common(sp)
    sp.add_argument("--count", type=int, help="number of scenes to synthesize")

    sp = sub.add_parser("extract", help="extract ground-truth tables from scenes")
    add_common(sp)
    sp.add_argument("--scenes", help="glob of scene JSON files")
    sp.add_argument("--ngt-dir", help="directory for ground-truth tables")

    sp = sub.add_parser("generate", help="generate the question-answer dataset")
    add_common(sp)
    sp.add_argument("--ngt-dir", help="directory of ground-truth tables")
    sp.add_argument("--stub-llm", action="store_true", default=None,
                    help="use the offline rewrite stub instead of a service")

    sp = sub.add_parser("score", help="score model predictions against a dataset")
    add_common(sp)
    sp.add_argument("--dataset", help="dataset JSONL (default: <out>/dataset.jsonl)")
    sp.add_argument("--predictions", required=True,
                    help="predictions JSONL with qa_id and output fields")
    sp.add_argument("--report", help="also write the JSON report here")

    sp = sub.add_parser("selfcheck", help="audit a generated dataset")
    add_common(sp)
    sp.add_argument("--dataset", help="dataset JSONL (default: <out>/dataset.jsonl)")
    sp.add_argument("--ngt-dir", help="tables for ground-truth agreement "
                                      "(default: <out>/ngt when present)")

    return parser


def _configure(args: argparse.Namespace) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    overrides = {
        "seed": args.seed,
        "out_dir": args.out,
        "jobs": args.jobs,
    }
    if getattr(args, "scenes", None) is not None:
        overrides["scenes"] = args.scenes
    if getattr(args, "ngt_dir", None) is not None:
        overrides["ngt_dir"] = args.ngt_dir
    if getattr(args, "stub_llm", None) is not None:
        overrides["stub_llm"] = args.stub_llm
    if getattr(args, "count", None) is not None:
        overrides["synth_scenes"] = args.count
    return apply_overrides(cfg, **overrides)


def _dataset_path(args: argparse.Namespace, cfg: PipelineConfig) -> Path:
    if getattr(args, "dataset", None):
        return Path(args.dataset)
    return Path(cfg.out_dir) / "dataset.jsonl"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _configure(args)
        if args.command == "synth":
            paths = run_synth(cfg)
            print(f"wrote {len(paths)} scenes to {cfg.synth_path}")
        elif args.command == "extract":
            paths = run_extract(cfg)
            print(f"wrote {len(paths)} ground-truth tables to {cfg.ngt_path}")
        elif args.command == "generate":
            result = run_generate(cfg)
            counts = ", ".join(f"{k}={v}" for k, v in sorted(result.task_counts.items()))
            print(f"wrote {result.n_records} records to {result.dataset_path} ({counts})")
        elif args.command == "score":
            report_path = Path(args.report) if args.report else None
            _, _, table = run_score(_dataset_path(args, cfg), args.predictions,
                                    out_path=report_path)
            print(table)
            if report_path is not None:
                print(f"report written to {report_path}")
        elif args.command == "selfcheck":
            ngt_dir = args.ngt_dir
            if ngt_dir is None and cfg.ngt_path.is_dir():
                ngt_dir = cfg.ngt_path
            result = run_selfcheck(_dataset_path(args, cfg), ngt_dir=ngt_dir)
            for line in result.summary_lines():
                print(line)
            if not result.ok:
                return EXIT_SELFCHECK
        else:  # pragma: no cover - argparse enforces the choices
            raise ConfigError(f"unknown command {args.command!r}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _SHORTFALL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SHORTFALL
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SceneQaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

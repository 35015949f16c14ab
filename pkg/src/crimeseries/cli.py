"""Command-line driver: one subcommand per pipeline stage.

Exit codes: 0 success, 1 stage failure, 2 missing input artifact, 3 invalid configuration.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import pipeline
from .config import PipelineConfig
from .errors import CrimeSeriesError, InvalidConfigError, MissingArtifactError

EXIT_FAILURE = 1
EXIT_MISSING = 2
EXIT_CONFIG = 3


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML pipeline config")
    common.add_argument("--seed", type=int, help="global seed, overrides the config")
    common.add_argument("--out-dir", type=Path, default=Path("run"), help="artifact directory (default: run)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="crimeseries", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="generate the synthetic labeled corpus")
    p = sub.add_parser("build-vocab", parents=[common], help="tokenize records and build the vocabulary")
    p.add_argument("--records", type=Path, help="JSONL/CSV records to import instead of the synthetic corpus")
    sub.add_parser("featurize", parents=[common], help="count matrix and TF-IDF matrix")
    sub.add_parser("train", parents=[common], help="train the GBRBM on the TF-IDF matrix")
    for name, helptext in (("embed", "write embeddings"), ("project", "t-SNE projection of embeddings")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--method", choices=pipeline.METHODS, default="gbrbm")
    sub.add_parser("evaluate", parents=[common], help="kNN purity and silhouette for every embedding present")
    sub.add_parser("report", parents=[common], help="aggregate manifests and metrics")
    p = sub.add_parser("pipeline", parents=[common], help="run every stage in order")
    p.add_argument("--records", type=Path, help="JSONL/CSV records; skips synth")
    p.add_argument("--no-lda", action="store_true", help="skip the LDA baseline")
    return parser


def load_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    cfg = cfg.seeded()
    cfg.validate()
    return cfg


def dispatch(args: argparse.Namespace, ws: pipeline.Workspace) -> None:
    cmd = args.command
    if cmd == "synth":
        pipeline.stage_synth(ws)
    elif cmd == "build-vocab":
        pipeline.stage_build_vocab(ws, args.records)
    elif cmd == "featurize":
        pipeline.stage_featurize(ws)
    elif cmd == "train":
        pipeline.stage_train(ws)
    elif cmd == "embed":
        pipeline.stage_embed(ws, args.method)
    elif cmd == "project":
        pipeline.stage_project(ws, args.method)
    elif cmd == "evaluate":
        pipeline.stage_evaluate(ws)
    elif cmd == "report":
        pipeline.stage_report(ws)
    elif cmd == "pipeline":
        pipeline.run_all(ws, args.records, with_lda=not args.no_lda)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
    except (InvalidConfigError, FileNotFoundError, TypeError, ValueError) as exc:
        print(f"crimeseries: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    ws = pipeline.Workspace(args.out_dir, cfg)
    try:
        dispatch(args, ws)
    except MissingArtifactError as exc:
        print(f"crimeseries: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (CrimeSeriesError, OSError, ValueError) as exc:
        print(f"crimeseries: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return 0


if __name__ == "__main__":
    sys.exit(main())

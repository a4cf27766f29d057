"""Command line entry point: generate / evaluate / report.

One JSON config file drives everything; flags override file values, and
the ALERTSIFT defaults reproduce the reference run with zero arguments.
Exit codes are a stable contract: 0 success, 2 input validation failure,
3 I/O failure, 4 golden-metrics mismatch.

The VERITAS_SEED environment variable overrides the config seed (command
line --seed wins over both).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .evaluate import (
    DatasetTaxonomyMismatch,
    check_golden,
    evaluate,
    load_dataset,
    render_report_text,
    validate_report_payload,
    write_decision_log,
)
from .meta import MetaConfig
from .model import EnumParseError, InvariantViolation
from .sentinel import SentinelConfig
from .specialists import SpecialistConfig
from .synthgen import (
    InvalidEntry,
    TaxonomyInvariantViolation,
    default_taxonomy_path,
    generate_dataset,
    load_taxonomy,
    write_dataset,
)

__all__ = ["PipelineConfig", "main"]

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_IO = 3
EXIT_GOLDEN = 4

SEED_ENV_VAR = "VERITAS_SEED"
DEFAULT_SEED = 42


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a run needs: thresholds, rule parameters, seed, paths."""

    sentinel: SentinelConfig = field(default_factory=SentinelConfig)
    specialists: SpecialistConfig = field(default_factory=SpecialistConfig)
    meta: MetaConfig = field(default_factory=MetaConfig)
    seed: int = DEFAULT_SEED
    taxonomy_path: Path = field(default_factory=default_taxonomy_path)
    dataset_dir: Path = Path("dataset")
    report_dir: Path = Path("report")

    def __post_init__(self) -> None:
        if self.seed < 0:
            raise InvariantViolation("seed must be a non-negative integer")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PipelineConfig":
        paths = data.get("paths", {})
        taxonomy = paths.get("taxonomy")
        return cls(
            sentinel=SentinelConfig.from_dict(data.get("sentinel", {})),
            specialists=SpecialistConfig.from_dict(data.get("specialists", {})),
            meta=MetaConfig.from_dict(data.get("meta", {})),
            seed=int(data.get("seed", DEFAULT_SEED)),
            taxonomy_path=Path(taxonomy) if taxonomy else default_taxonomy_path(),
            dataset_dir=Path(paths.get("dataset_dir", "dataset")),
            report_dir=Path(paths.get("report_dir", "report")),
        )


def _replace(cfg: PipelineConfig, **overrides: Any) -> PipelineConfig:
    values = {
        "sentinel": cfg.sentinel,
        "specialists": cfg.specialists,
        "meta": cfg.meta,
        "seed": cfg.seed,
        "taxonomy_path": cfg.taxonomy_path,
        "dataset_dir": cfg.dataset_dir,
        "report_dir": cfg.report_dir,
    }
    values.update(overrides)
    return PipelineConfig(**values)


def load_config(args: argparse.Namespace) -> PipelineConfig:
    """Resolve the effective config: file < environment seed < flags."""
    if args.config:
        with open(args.config, encoding="utf-8") as fp:
            cfg = PipelineConfig.from_dict(json.load(fp))
    else:
        cfg = PipelineConfig()
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        cfg = _replace(cfg, seed=int(env_seed))
    if args.seed is not None:
        cfg = _replace(cfg, seed=args.seed)
    return cfg


def cmd_generate(cfg: PipelineConfig, jobs: int) -> int:
    try:
        taxonomy = load_taxonomy(cfg.taxonomy_path)
    except (FileNotFoundError, TaxonomyInvariantViolation, InvalidEntry,
            EnumParseError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: taxonomy validation failed: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        dataset = generate_dataset(taxonomy, cfg.seed, jobs=jobs)
        write_dataset(dataset, cfg.dataset_dir)
    except OSError as exc:
        print(f"error: could not write dataset: {exc}", file=sys.stderr)
        return EXIT_IO
    print(
        f"{dataset.manifest['case_count']} cases, "
        f"{dataset.manifest['epoch_count']} epochs"
    )
    print(f"dataset written to {cfg.dataset_dir} (seed {cfg.seed})")
    return EXIT_OK


def cmd_evaluate(cfg: PipelineConfig, jobs: int, golden_check: bool, json_only: bool) -> int:
    try:
        taxonomy = load_taxonomy(cfg.taxonomy_path)
        dataset = load_dataset(cfg.dataset_dir)
    except FileNotFoundError as exc:
        print(f"error: missing input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (TaxonomyInvariantViolation, InvalidEntry, EnumParseError,
            InvariantViolation, json.JSONDecodeError, ValueError) as exc:
        print(f"error: input validation failed: {exc}", file=sys.stderr)
        return EXIT_INPUT

    started = time.perf_counter()
    try:
        report = evaluate(
            dataset,
            taxonomy,
            sentinel_cfg=cfg.sentinel,
            specialist_cfg=cfg.specialists,
            meta_cfg=cfg.meta,
            jobs=jobs,
        )
    except DatasetTaxonomyMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    elapsed = time.perf_counter() - started

    try:
        cfg.report_dir.mkdir(parents=True, exist_ok=True)
        payload = report.to_json_dict()
        with open(cfg.report_dir / "report.json", "w", encoding="utf-8") as fp:
            fp.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        write_decision_log(report, cfg.report_dir / "decisions.jsonl")
        if not json_only:
            with open(cfg.report_dir / "report.txt", "w", encoding="utf-8") as fp:
                fp.write(render_report_text(payload))
    except OSError as exc:
        print(f"error: could not write report: {exc}", file=sys.stderr)
        return EXIT_IO

    print(
        f"TSR {100 * report.tsr:.1f}% FER {100 * report.fer:.1f}% "
        f"INDR {100 * report.indr:.1f}%"
    )
    print(
        f"{report.cases} cases, {report.epochs} epochs evaluated in {elapsed:.2f}s "
        f"({1000 * elapsed / report.epochs:.2f} ms/epoch)"
    )
    if golden_check:
        problems = check_golden(report)
        if problems:
            for problem in problems:
                print(f"golden mismatch: {problem}", file=sys.stderr)
            return EXIT_GOLDEN
        print("golden check: ok")
    return EXIT_OK


def cmd_report(cfg: PipelineConfig) -> int:
    report_path = cfg.report_dir / "report.json"
    try:
        with open(report_path, encoding="utf-8") as fp:
            payload = validate_report_payload(json.load(fp))
    except FileNotFoundError as exc:
        print(f"error: missing report: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InvariantViolation, EnumParseError, json.JSONDecodeError) as exc:
        print(f"error: report payload invalid: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = render_report_text(payload)
    try:
        with open(cfg.report_dir / "report.txt", "w", encoding="utf-8") as fp:
            fp.write(text)
    except OSError as exc:
        print(f"error: could not write report.txt: {exc}", file=sys.stderr)
        return EXIT_IO
    print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alertsift",
        description="False-positive alert suppression pipeline: synthetic "
        "dataset generation and evaluation.",
    )
    parser.add_argument("--config", type=Path, default=None, help="JSON config file")
    parser.add_argument("--seed", type=int, default=None, help="override the RNG seed")
    parser.add_argument(
        "--jobs", type=int, default=1, help="worker parallelism for generation/evaluation"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", help="write epochs.jsonl, contexts.json, manifest.json")
    evaluate_parser = sub.add_parser("evaluate", help="run the pipeline and write reports")
    evaluate_parser.add_argument(
        "--golden-check",
        action="store_true",
        help="exit 4 unless metrics match the shipped-catalogue expectations",
    )
    evaluate_parser.add_argument(
        "--json-only", action="store_true", help="skip the text report"
    )
    sub.add_parser("report", help="re-render report.txt from report.json")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except FileNotFoundError as exc:
        print(f"error: missing config: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InvariantViolation, EnumParseError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: config invalid: {exc}", file=sys.stderr)
        return EXIT_INPUT

    if args.command == "generate":
        return cmd_generate(cfg, args.jobs)
    if args.command == "evaluate":
        return cmd_evaluate(cfg, args.jobs, args.golden_check, args.json_only)
    if args.command == "report":
        return cmd_report(cfg)
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())

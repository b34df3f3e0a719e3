#!/usr/bin/env python3
"""
procbench - command-line entry point

Subcommands:
    storyboard  compose a timestamped storyboard from a frame directory
    perturb     synthesize masked / swapped / shifted / kept samples
    infer       render prompts and query a chat-completions endpoint
    evaluate    score prediction dumps and write the report tables

Logs go to stderr; data goes to files (dry-run prompts go to stdout).
"""

import argparse
import asyncio
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import structlog
from pydantic import BaseModel, Field, ValidationError, field_validator

from .config.logging_config import configure_logging
from .config.settings import Settings, get_settings
from .core.errors import (
    EXIT_INTERNAL,
    EXIT_OK,
    EXIT_USAGE,
    InputError,
    NetworkFailure,
    ParseFailure,
    ProcBenchError,
    UsageError,
)
from .core.models.perturbation import ManifestHeader, MaskGroundTruth, OrderGroundTruth, PerturbationKind
from .core.models.report import MetricsReport
from .core.models.responses import Task
from .core.services.annotations import parse_annotations
from .core.services.evaluation import (
    evaluate_dense_captions,
    evaluate_missing_events,
    evaluate_order_corrections,
    evaluate_procedure,
)
from .core.services.inference import dry_run, load_dump, run_batch
from .core.services.media import OverlayStyle, encode_png, save_storyboard, storyboard_for_directory
from .core.services.perturbation import materialize_samples, read_manifest, synthesize_dataset, write_manifest
from .core.services.prompts import PromptBuilder
from .core.services.report_generator import REPORT_FORMATS, write_report

logger = structlog.get_logger(__name__)

MANIFEST_NAME = "manifest.jsonl"


class RunConfig(BaseModel):
    """Validated view of the flags of one run, after merging with settings"""

    subcommand: str
    inputs: Dict[str, Path] = Field(default_factory=dict)
    out: Path
    fps: float = Field(default=1.0, gt=0)
    seed: int = Field(default=0, ge=0)
    iou_thresholds: List[float] = Field(default_factory=lambda: [0.3, 0.5, 0.7])
    hit_tolerances: List[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0])
    missing_tolerances: List[float] = Field(default_factory=lambda: [0.5, 1.0])
    caption_threshold: float = Field(default=0.3, gt=0, le=1)
    report_format: str = "markdown"

    @field_validator("iou_thresholds")
    @classmethod
    def _thresholds_in_unit(cls, value: List[float]) -> List[float]:
        if not value or any(not 0 < t <= 1 for t in value):
            raise ValueError(f"thresholds must be non-empty and lie in (0, 1]: {value}")
        return value

    @field_validator("hit_tolerances", "missing_tolerances")
    @classmethod
    def _tolerances_positive(cls, value: List[float]) -> List[float]:
        if not value or any(t <= 0 for t in value):
            raise ValueError(f"tolerances must be non-empty and positive: {value}")
        return value


def _float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def _overlay_style(settings: Settings, scale: Optional[int] = None) -> OverlayStyle:
    return OverlayStyle(
        scale=scale or settings.media.overlay_scale,
        max_box_fraction=settings.media.overlay_max_fraction,
        timestamp_format=settings.media.timestamp_format,
    )


def cmd_storyboard(args: argparse.Namespace, settings: Settings) -> int:
    config = RunConfig(subcommand="storyboard", inputs={"frames_dir": args.frames_dir}, out=args.out, fps=args.fps)
    storyboard = storyboard_for_directory(
        config.inputs["frames_dir"],
        fps=config.fps,
        style=_overlay_style(settings, args.overlay_scale),
        max_width=args.max_width or settings.media.storyboard_max_width,
    )
    save_storyboard(storyboard, config.out)
    return EXIT_OK


def _parse_counts(kinds: str, counts: str) -> Dict[PerturbationKind, int]:
    try:
        kind_list = [PerturbationKind(k.strip()) for k in kinds.split(",") if k.strip()]
    except ValueError as e:
        raise UsageError(f"unknown perturbation kind: {e}")
    try:
        count_list = [int(c) for c in counts.split(",") if c.strip()]
    except ValueError:
        raise UsageError(f"counts must be integers, got {counts!r}")
    if len(kind_list) != len(count_list):
        raise UsageError(f"{len(kind_list)} kinds but {len(count_list)} counts")
    if len(set(kind_list)) != len(kind_list):
        raise UsageError("each kind may be listed once")
    if any(c < 0 for c in count_list):
        raise UsageError("counts must be non-negative")
    return dict(zip(kind_list, count_list))


def cmd_perturb(args: argparse.Namespace, settings: Settings) -> int:
    counts = _parse_counts(args.kinds, args.counts)
    seed = settings.perturbation.root_seed if args.seed is None else args.seed
    config = RunConfig(
        subcommand="perturb", inputs={"annotations": args.annotations}, out=args.out, fps=args.fps, seed=seed
    )

    records = parse_annotations(config.inputs["annotations"])
    samples = synthesize_dataset(
        records, counts, config.seed, config.fps, placeholder=settings.perturbation.mask_placeholder
    )
    header = ManifestHeader(
        root_seed=config.seed, fps=config.fps, kinds=list(counts), counts=list(counts.values())
    )
    manifest = write_manifest(config.out / MANIFEST_NAME, header, samples)
    logger.info("manifest_written", path=str(manifest), samples=len(samples), seed=config.seed)

    if args.frames_root is not None:
        materialize_samples(
            samples,
            args.frames_root,
            config.out / "frames",
            workers=args.workers or settings.worker.workers,
            style=_overlay_style(settings),
            overlay_timestamps=args.overlay_timestamps,
        )
    return EXIT_OK


def _endpoint(args: argparse.Namespace, settings: Settings):
    overrides = {
        "base_url": args.base_url,
        "model_name": args.model,
        "max_parallel": args.max_parallel,
        "request_timeout": args.timeout,
        "max_retries": args.max_retries,
    }
    return settings.endpoint.model_copy(update={k: v for k, v in overrides.items() if v is not None})


def cmd_infer(args: argparse.Namespace, settings: Settings) -> int:
    task = Task(args.task)
    config = RunConfig(subcommand="infer", out=args.out, fps=args.fps)
    builder = PromptBuilder(settings.prompts_dir, fps=config.fps)
    style = _overlay_style(settings)

    def storyboard_png(item_id: str) -> Optional[bytes]:
        if args.frames_root is None:
            return None
        frames_dir = Path(args.frames_root) / item_id
        board = storyboard_for_directory(frames_dir, config.fps, style, settings.media.storyboard_max_width)
        return encode_png(board.image)

    requests = []
    if task.uses_samples:
        if args.manifest is None:
            raise UsageError(f"--manifest is required for task {task.value}")
        _, samples = read_manifest(args.manifest)
        for sample in samples:
            if task is Task.MISSING_EVENT:
                eligible = isinstance(sample.ground_truth, MaskGroundTruth) or sample.kind is PerturbationKind.KEEP
            else:
                eligible = isinstance(sample.ground_truth, OrderGroundTruth)
            if eligible:
                requests.append(
                    builder.build_prompt(task, sample=sample, storyboard_png=storyboard_png(sample.sample_id))
                )
    else:
        if args.annotations is None:
            raise UsageError(f"--annotations is required for task {task.value}")
        for record in parse_annotations(args.annotations):
            requests.append(builder.build_prompt(task, record=record, storyboard_png=storyboard_png(record.video_id)))

    if not requests:
        raise InputError(f"no items to query for task {task.value}")

    if args.dry_run:
        sys.stdout.write(dry_run(requests))
        return EXIT_OK

    endpoint = _endpoint(args, settings)
    responses = asyncio.run(run_batch(requests, endpoint, config.out, resume=not args.no_resume))
    failed = [r.request_id for r in responses if not r.ok]
    if failed:
        raise NetworkFailure(f"{len(failed)} of {len(responses)} requests failed: {', '.join(failed[:5])}")
    return EXIT_OK


def _parse_predictions(values: Sequence[str]) -> List[Tuple[str, Path]]:
    pairs = []
    for value in values:
        label, sep, path = value.partition("=")
        if not sep or not label.strip() or not path.strip():
            raise UsageError(f"--predictions expects LABEL=PATH, got {value!r}")
        pairs.append((label.strip(), Path(path.strip())))
    labels = [label for label, _ in pairs]
    if len(set(labels)) != len(labels):
        raise UsageError("model labels must be unique")
    return pairs


def cmd_evaluate(args: argparse.Namespace, settings: Settings) -> int:
    evaluation = settings.evaluation
    config = RunConfig(
        subcommand="evaluate",
        out=args.out,
        iou_thresholds=args.thresholds or evaluation.iou_thresholds,
        hit_tolerances=args.tolerances or evaluation.hit_tolerances,
        missing_tolerances=args.missing_tolerances or evaluation.missing_tolerances,
        caption_threshold=args.caption_threshold or evaluation.caption_threshold,
        report_format=args.format,
    )
    predictions = _parse_predictions(args.predictions)

    if args.task:
        tasks = [Task(t) for t in args.task]
    else:
        tasks = []
        if args.annotations is not None:
            tasks += [Task.PROCEDURE_ID, Task.DENSE_CAPTION]
        if args.manifest is not None:
            tasks += [Task.MISSING_EVENT, Task.ORDER_CORRECTION]
    if not tasks:
        raise UsageError("nothing to evaluate: pass --annotations and/or --manifest")

    records = samples = None
    header: Optional[ManifestHeader] = None
    if any(not t.uses_samples for t in tasks):
        if args.annotations is None:
            raise UsageError("--annotations is required for procedure_id and dense_caption")
        records = parse_annotations(args.annotations)
    if any(t.uses_samples for t in tasks):
        if args.manifest is None:
            raise UsageError("--manifest is required for missing_event and order_correction")
        header, samples = read_manifest(args.manifest)

    report = MetricsReport(
        seed=header.root_seed if header else None,
        iou_thresholds=config.iou_thresholds,
        hit_tolerances=config.hit_tolerances,
        missing_tolerances=config.missing_tolerances,
    )
    exclude = args.exclude_abstentions or evaluation.exclude_abstentions

    for label, path in predictions:
        responses = load_dump(path)
        for task in tasks:
            if task is Task.PROCEDURE_ID:
                outcome = evaluate_procedure(label, records, responses, config.iou_thresholds, config.hit_tolerances)
                report.procedure.append(outcome.row)
            elif task is Task.DENSE_CAPTION:
                outcome = evaluate_dense_captions(
                    label, records, responses, config.iou_thresholds, config.caption_threshold
                )
                report.dense_caption.append(outcome.row)
            elif task is Task.MISSING_EVENT:
                outcome = evaluate_missing_events(label, samples, responses, config.missing_tolerances)
                report.missing_event.append(outcome.row)
            else:
                outcome = evaluate_order_corrections(
                    label, samples, responses, config.hit_tolerances, exclude_abstentions=exclude
                )
                report.order_correction.append(outcome.row)
            report.failures.extend(outcome.failures)

    write_report(report, config.report_format, config.out, sort_by=args.sort_by, descending=args.descending)

    if args.strict and report.failures:
        raise ParseFailure(f"{len(report.failures)} predictions could not be scored (see the failures table)")
    return EXIT_OK


COMMANDS = {
    "storyboard": cmd_storyboard,
    "perturb": cmd_perturb,
    "infer": cmd_infer,
    "evaluate": cmd_evaluate,
}


def build_parser(settings: Settings) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="procbench", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--log-level", default=None, help="override LOG_LEVEL")
    parser.add_argument("--log-format", choices=["json", "console"], default=None, help="override LOG_FORMAT")
    sub = parser.add_subparsers(dest="command", required=True)

    fps_default = settings.media.fps

    p = sub.add_parser("storyboard", help="compose a storyboard PNG and JSON sidecar")
    p.add_argument("frames_dir", type=Path)
    p.add_argument("--out", type=Path, required=True, help="output PNG path")
    p.add_argument("--fps", type=float, default=fps_default)
    p.add_argument("--max-width", type=_positive_int, default=None)
    p.add_argument("--overlay-scale", type=_positive_int, default=None)

    p = sub.add_parser("perturb", help="synthesize a perturbed dataset manifest")
    p.add_argument("--annotations", type=Path, required=True)
    p.add_argument("--kinds", required=True, help="comma-separated: mask,swap,shift,keep")
    p.add_argument("--counts", required=True, help="comma-separated sample count per kind")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--fps", type=float, default=fps_default)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--frames-root", type=Path, default=None, help="source frames, one directory per video id")
    p.add_argument("--overlay-timestamps", action="store_true", help="burn timestamps into output frames")
    p.add_argument("--workers", type=_positive_int, default=None)

    p = sub.add_parser("infer", help="query an OpenAI-compatible endpoint")
    p.add_argument("--task", choices=[t.value for t in Task], required=True)
    p.add_argument("--annotations", type=Path, default=None)
    p.add_argument("--manifest", type=Path, default=None)
    p.add_argument("--frames-root", type=Path, default=None, help="frames per item id, attached as storyboards")
    p.add_argument("--fps", type=float, default=fps_default)
    p.add_argument("--out", type=Path, required=True, help="prediction dump (JSON Lines, appended)")
    p.add_argument("--base-url", default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--max-parallel", type=_positive_int, default=None)
    p.add_argument("--timeout", type=float, default=None)
    p.add_argument("--max-retries", type=int, default=None)
    p.add_argument("--dry-run", action="store_true", help="print rendered prompts, send nothing")
    p.add_argument("--no-resume", action="store_true", help="re-send requests already in the dump")

    p = sub.add_parser("evaluate", help="score prediction dumps and write report tables")
    p.add_argument("--task", action="append", choices=[t.value for t in Task], default=None)
    p.add_argument("--annotations", type=Path, default=None)
    p.add_argument("--manifest", type=Path, default=None)
    p.add_argument("--predictions", action="append", required=True, metavar="LABEL=PATH")
    p.add_argument("--out", type=Path, required=True, help="report directory")
    p.add_argument("--format", choices=REPORT_FORMATS, default="markdown")
    p.add_argument("--thresholds", type=_float_list, default=None, help="IoU thresholds, e.g. 0.3,0.5,0.7")
    p.add_argument("--tolerances", type=_float_list, default=None, help="hit tolerances in seconds")
    p.add_argument("--missing-tolerances", type=_float_list, default=None)
    p.add_argument("--caption-threshold", type=float, default=None)
    p.add_argument("--sort-by", default=None, help="report column to sort rows by, e.g. F1@0.5")
    p.add_argument("--descending", action="store_true")
    p.add_argument("--exclude-abstentions", action="store_true")
    p.add_argument("--strict", action="store_true", help="exit 4 when any prediction is unparseable")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point"""
    settings = get_settings()
    parser = build_parser(settings)
    args = parser.parse_args(argv)

    logging_settings = settings.logging.model_copy(
        update={k: v for k, v in {"level": args.log_level, "format": args.log_format}.items() if v}
    )
    configure_logging(logging_settings)

    try:
        return COMMANDS[args.command](args, settings)
    except ValidationError as e:
        logger.error("invalid_arguments", command=args.command, error=str(e))
        return EXIT_USAGE
    except ProcBenchError as e:
        logger.error("command_failed", command=args.command, error=str(e), exit_code=e.exit_code)
        return e.exit_code
    except Exception:
        logger.exception("internal_error", command=args.command)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

"""
Report tables for every task block, written as CSV, markdown or JSON
"""

from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import pandas as pd
import structlog

from ..errors import InputError
from ..models.report import HitRatioResult, MetricsReport, ThresholdedPRF

logger = structlog.get_logger(__name__)

REPORT_FORMATS = ("csv", "markdown", "structured")

BLOCK_TITLES = {
    "dense_captioning": "Dense captioning",
    "procedure_identification": "Procedure identification",
    "coarse_segmentation": "Coarse segmentation",
    "missing_action": "Missing action detection",
    "order_errors": "Order error localization",
    "failures": "Failures",
}


def threshold_label(threshold: float) -> str:
    return f"{threshold:g}"


def tolerance_label(tolerance: float) -> str:
    return f"Hit@{tolerance:.1f}s"


def _prf_columns(prf: Sequence[ThresholdedPRF], metrics: Sequence[str] = ("P", "R", "F1")) -> Dict[str, float]:
    values = {"P": "precision", "R": "recall", "F1": "f1"}
    return {
        f"{metric}@{threshold_label(row.threshold)}": getattr(row, values[metric])
        for row in prf
        for metric in metrics
    }


def _hit_columns(hits: Sequence[HitRatioResult]) -> Dict[str, float]:
    return {tolerance_label(h.tolerance): h.ratio for h in hits}


class ReportGenerator:
    """Builds one DataFrame per report block, then renders them.

    Numbers stay floats until rendering; sorting happens on the raw values.
    """

    def __init__(self, report: MetricsReport, sort_by: Optional[str] = None, descending: bool = False):
        self.report = report
        self.sort_by = sort_by
        self.descending = descending

    def dense_captioning(self) -> pd.DataFrame:
        rows = []
        for row in self.report.dense_caption:
            record = {"Model": row.model, **_prf_columns(row.prf)}
            record["RougeL"] = row.caption.rouge_l
            record["TokenF1"] = row.caption.token_f1
            rows.append(record)
        return self._frame(rows)

    def procedure_identification(self) -> pd.DataFrame:
        rows = [
            {"Model": row.model, "Top-1 Accuracy(%)": 100.0 * row.top1_accuracy}
            for row in self.report.procedure
        ]
        return self._frame(rows)

    def coarse_segmentation(self) -> pd.DataFrame:
        rows = [
            {
                "Model": row.model,
                **_prf_columns(row.prf, ("F1",)),
                "Avg. Cov.": row.avg_coverage,
                "Avg. Hit": row.avg_hit,
            }
            for row in self.report.procedure
        ]
        return self._frame(rows)

    def missing_action(self) -> pd.DataFrame:
        rows = [
            {
                "Model": row.model,
                "P": row.detection.precision,
                "R": row.detection.recall,
                "F1": row.detection.f1,
                **_hit_columns(row.hit_ratios),
            }
            for row in self.report.missing_event
        ]
        return self._frame(rows)

    def order_errors(self) -> pd.DataFrame:
        rows = [{"Model": row.model, **_hit_columns(row.hit_ratios)} for row in self.report.order_correction]
        return self._frame(rows)

    def failures(self) -> pd.DataFrame:
        rows = [
            {"Model": f.model, "Task": f.task, "Item": f.item_id, "Reason": f.reason}
            for f in self.report.failures
        ]
        return pd.DataFrame(rows, columns=["Model", "Task", "Item", "Reason"])

    def blocks(self) -> Dict[str, pd.DataFrame]:
        """Non-empty blocks in fixed order"""
        builders: Dict[str, Callable[[], pd.DataFrame]] = {
            "dense_captioning": self.dense_captioning,
            "procedure_identification": self.procedure_identification,
            "coarse_segmentation": self.coarse_segmentation,
            "missing_action": self.missing_action,
            "order_errors": self.order_errors,
            "failures": self.failures,
        }
        built = {name: build() for name, build in builders.items()}
        return {name: frame for name, frame in built.items() if not frame.empty}

    def _frame(self, rows: List[dict]) -> pd.DataFrame:
        frame = pd.DataFrame(rows)
        if frame.empty:
            return frame
        keys = ["Model"]
        ascending = [True]
        if self.sort_by and self.sort_by in frame.columns and self.sort_by != "Model":
            keys.insert(0, self.sort_by)
            ascending.insert(0, not self.descending)
        return frame.sort_values(keys, ascending=ascending, kind="mergesort").reset_index(drop=True)

    @staticmethod
    def formatted(frame: pd.DataFrame) -> pd.DataFrame:
        """Numbers as fixed-point text: 3 decimals, accuracy percentages 1"""
        out = frame.copy()
        for column in out.columns:
            if column in ("Model", "Task", "Item", "Reason"):
                continue
            digits = 1 if column.endswith("(%)") else 3
            out[column] = out[column].map(lambda v, d=digits: f"{v:.{d}f}")
        return out

    def to_markdown(self) -> str:
        report = self.report
        parts = ["# Evaluation report", ""]
        if report.seed is not None:
            parts.append(f"Seed: {report.seed}")
        if report.iou_thresholds:
            parts.append("IoU thresholds: " + ", ".join(threshold_label(t) for t in report.iou_thresholds))
        if report.hit_tolerances:
            parts.append("Hit tolerances (s): " + ", ".join(f"{t:.1f}" for t in report.hit_tolerances))
        parts.append("")
        for name, frame in self.blocks().items():
            parts.append(f"## {BLOCK_TITLES[name]}")
            parts.append("")
            parts.append(self.formatted(frame).to_markdown(index=False, disable_numparse=True))
            parts.append("")
        return "\n".join(parts)


def write_report(
    report: MetricsReport,
    fmt: str,
    out_dir: Path,
    sort_by: Optional[str] = None,
    descending: bool = False,
) -> List[Path]:
    """Write the report; same report in, byte-identical files out"""
    if fmt not in REPORT_FORMATS:
        raise ValueError(f"unknown report format {fmt!r}, expected one of {REPORT_FORMATS}")
    generator = ReportGenerator(report, sort_by=sort_by, descending=descending)
    out_dir = Path(out_dir)

    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        written: List[Path] = []
        if fmt == "csv":
            for name, frame in generator.blocks().items():
                path = out_dir / f"{name}.csv"
                generator.formatted(frame).to_csv(path, index=False, lineterminator="\r\n")
                written.append(path)
        elif fmt == "markdown":
            path = out_dir / "report.md"
            path.write_text(generator.to_markdown(), encoding="utf-8")
            written.append(path)
        else:
            path = out_dir / "report.json"
            path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
            written.append(path)
    except OSError as e:
        raise InputError(f"cannot write report to {out_dir}: {e}") from e

    logger.info("report_written", format=fmt, files=[str(p) for p in written])
    return written

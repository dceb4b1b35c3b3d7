import logging
from pathlib import Path
from typing import Optional

import pandas as pd
from rich.console import Console
from rich.table import Table

from peerfx_kit.connectors.local_path.models import LocalPathTarget
from peerfx_kit.connectors.local_path.target_processor import LocalPathTargetProcessor
from peerfx_kit.datamodel.result import BenchmarkReport, EstimationResult

_log = logging.getLogger(__name__)

AGGREGATE_FILE = "aggregate.csv"
RUNS_FILE = "runs.csv"
LONG_FILE = "long.csv"
RESULT_FILE = "result.json"
PER_NODE_FILE = "per_node_pe.csv"

AGGREGATE_COLUMNS = [
    "estimator",
    "label",
    "sweep_value",
    "n_seeds",
    "mean_abs_bias",
    "std_abs_bias",
    "mean_rel_bias",
    "std_rel_bias",
    "mean_pe",
    "std_pe",
]
LONG_COLUMNS = ["estimator", "sweep_value", "seed", "abs_bias", "rel_bias", "pe"]


def aggregate_frame(report: BenchmarkReport) -> pd.DataFrame:
    return pd.DataFrame(
        [row.model_dump() for row in report.rows], columns=AGGREGATE_COLUMNS
    )


def runs_frame(report: BenchmarkReport) -> pd.DataFrame:
    columns = list(report.runs[0].model_dump()) if report.runs else []
    return pd.DataFrame([run.model_dump() for run in report.runs], columns=columns)


def long_frame(report: BenchmarkReport) -> pd.DataFrame:
    frame = runs_frame(report).rename(columns={"pe_hat": "pe"})
    return frame.reindex(columns=LONG_COLUMNS)


def write_report(
    report: BenchmarkReport, directory: Path, float_format: str = "%.17g"
) -> list[Path]:
    """Write the aggregate, per-run and long-format tables into ``directory``."""
    with LocalPathTargetProcessor(LocalPathTarget(path=directory)) as target:
        target.write_frame(aggregate_frame(report), AGGREGATE_FILE, float_format)
        target.write_frame(runs_frame(report), RUNS_FILE, float_format)
        target.write_frame(long_frame(report), LONG_FILE, float_format)
    paths = [directory / name for name in (AGGREGATE_FILE, RUNS_FILE, LONG_FILE)]
    _log.info(f"Wrote benchmark tables to {directory}")
    return paths


def write_result(
    result: EstimationResult, directory: Path, float_format: str = "%.17g"
) -> list[Path]:
    """Write ``result.json`` and, when available, the per-node derivatives."""
    with LocalPathTargetProcessor(LocalPathTarget(path=directory)) as target:
        target.write_json(result.model_dump(mode="json"), RESULT_FILE)
        written = [directory / RESULT_FILE]
        if result.per_node_pe is not None:
            frame = pd.DataFrame(
                {"node": range(len(result.per_node_pe)), "pe": result.per_node_pe}
            )
            target.write_frame(frame, PER_NODE_FILE, float_format)
            written.append(directory / PER_NODE_FILE)
    return written


def _fmt(value: Optional[float], digits: int = 4) -> str:
    return "-" if value is None else f"{value:.{digits}f}"


def render_report(report: BenchmarkReport, console: Console) -> None:
    title = "Bias comparison"
    if report.sweep_kind:
        title += f" ({report.sweep_kind} sweep)"
    table = Table(title=f"{title}, {report.n_seeds} seeds")
    table.add_column("Estimator")
    if report.sweep_kind:
        table.add_column(report.sweep_kind, justify="right")
    table.add_column("Absolute bias", justify="right")
    table.add_column("Relative bias (%)", justify="right")
    table.add_column("PE", justify="right")

    for row in report.rows:
        cells = [row.label]
        if report.sweep_kind:
            cells.append(_fmt(row.sweep_value, 3))
        cells.append(
            "-"
            if row.mean_abs_bias is None
            else f"{_fmt(row.mean_abs_bias)} ± {_fmt(row.std_abs_bias)}"
        )
        cells.append(
            "-"
            if row.mean_rel_bias is None
            else f"{_fmt(row.mean_rel_bias)} ± {_fmt(row.std_rel_bias)}"
        )
        cells.append(f"{_fmt(row.mean_pe)} ± {_fmt(row.std_pe)}")
        table.add_row(*cells)
    console.print(table)

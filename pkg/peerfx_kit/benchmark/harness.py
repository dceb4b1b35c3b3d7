"""Repeated fits over seeds and sweep grids.

Every function builds a list of :class:`BenchmarkCell` in declared order, runs
them through the local orchestrator and aggregates per (estimator, sweep value)
in that same order, so reports do not depend on execution order.
"""

import logging
import threading
from collections.abc import Sequence
from typing import Optional, Union

import numpy as np

from peerfx_kit.benchmark.errors import BenchmarkConfigError
from peerfx_kit.datamodel.dataset import Dataset
from peerfx_kit.datamodel.result import BenchmarkReport, BenchmarkRow, RunRecord
from peerfx_kit.datamodel.run_config import EstimationSettings
from peerfx_kit.datamodel.specs import DatasetSpec, EstimatorName
from peerfx_kit.datamodel.task import BenchmarkCell
from peerfx_kit.datamodel.task_meta import SweepKind
from peerfx_kit.estimators import parse_estimator, run_estimator
from peerfx_kit.orchestrators.local import run_cells
from peerfx_kit.simulate import dataset_from_spec, dataset_hash

_log = logging.getLogger(__name__)

EstimatorLike = Union[str, EstimatorName]


def check_seeds(seeds: Sequence[int]) -> list[int]:
    if len(seeds) < 2:
        raise BenchmarkConfigError(
            f"At least 2 seeds are needed for a standard deviation, got {list(seeds)}"
        )
    if len(set(seeds)) != len(seeds):
        raise BenchmarkConfigError(f"Seeds must be distinct, got {list(seeds)}")
    return list(seeds)


def check_grid(values: Sequence[float], name: str) -> list[float]:
    if not values:
        raise BenchmarkConfigError(f"The {name} grid is empty")
    negative = [v for v in values if v < 0]
    if negative:
        raise BenchmarkConfigError(f"The {name} grid has negative values {negative}")
    return [float(v) for v in values]


class CellRunner:
    """Fits one cell; simulated datasets are cached per (spec, seed)."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._datasets: dict[tuple[str, int], tuple[Dataset, str]] = {}

    def dataset_for(self, cell: BenchmarkCell) -> tuple[Dataset, str]:
        if cell.dataset is not None:
            return cell.dataset, dataset_hash(cell.dataset)
        if cell.dataset_spec is None:
            raise BenchmarkConfigError(f"{cell.description} has no dataset")
        key = (cell.dataset_spec.model_dump_json(), cell.seed)
        with self._lock:
            if key not in self._datasets:
                ds = dataset_from_spec(cell.dataset_spec, cell.seed)
                self._datasets[key] = (ds, dataset_hash(ds))
            return self._datasets[key]

    def __call__(self, cell: BenchmarkCell) -> RunRecord:
        ds, digest = self.dataset_for(cell)
        result = run_estimator(cell.estimator, ds, cell.settings, cell.seed)
        return RunRecord(
            estimator=cell.estimator.value,
            label=cell.estimator.label,
            sweep_kind=None if cell.sweep_kind is None else cell.sweep_kind.value,
            sweep_value=cell.sweep_value,
            seed=cell.seed,
            dataset_hash=digest,
            pe_hat=result.pe_hat,
            abs_bias=result.abs_bias,
            rel_bias=result.rel_bias,
            stage1_r2=result.diagnostics.stage1_r2,
            discriminator_r2=result.diagnostics.discriminator_r2,
            confounder_corr=result.diagnostics.confounder_corr,
        )


def _mean_std(values: list[Optional[float]]) -> tuple[Optional[float], Optional[float]]:
    if any(v is None for v in values):
        return None, None
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std(ddof=1))


def aggregate(runs: Sequence[RunRecord]) -> list[BenchmarkRow]:
    """Mean and sample standard deviation per (estimator, sweep value)."""
    groups: dict[tuple[str, Optional[float]], list[RunRecord]] = {}
    for run in runs:
        groups.setdefault((run.estimator, run.sweep_value), []).append(run)

    rows = []
    for (estimator, sweep_value), members in groups.items():
        if len(members) < 2:
            raise BenchmarkConfigError(
                f"{estimator} at {sweep_value} has {len(members)} run; "
                "the standard deviation is undefined"
            )
        mean_abs, std_abs = _mean_std([m.abs_bias for m in members])
        mean_rel, std_rel = _mean_std([m.rel_bias for m in members])
        mean_pe, std_pe = _mean_std([m.pe_hat for m in members])
        assert mean_pe is not None and std_pe is not None
        rows.append(
            BenchmarkRow(
                estimator=estimator,
                label=members[0].label,
                sweep_value=sweep_value,
                n_seeds=len(members),
                mean_abs_bias=mean_abs,
                std_abs_bias=std_abs,
                mean_rel_bias=mean_rel,
                std_rel_bias=std_rel,
                mean_pe=mean_pe,
                std_pe=std_pe,
            )
        )
    return rows


def _cell(
    estimator: EstimatorName,
    seed: int,
    settings: EstimationSettings,
    dataset_spec: Optional[DatasetSpec] = None,
    dataset: Optional[Dataset] = None,
    sweep_kind: Optional[SweepKind] = None,
    sweep_value: Optional[float] = None,
) -> BenchmarkCell:
    point = "" if sweep_value is None else f":{sweep_value!r}"
    return BenchmarkCell(
        cell_id=f"{estimator.value}{point}:{seed}",
        estimator=estimator,
        seed=seed,
        settings=settings,
        dataset_spec=dataset_spec,
        dataset=dataset,
        sweep_kind=sweep_kind,
        sweep_value=sweep_value,
    )


def run_benchmark_cells(
    cells: Sequence[BenchmarkCell],
    seeds: Sequence[int],
    sweep_kind: Optional[SweepKind] = None,
    num_workers: int = 1,
    config: Optional[dict] = None,
) -> BenchmarkReport:
    _log.info(f"Running {len(cells)} benchmark cells on {num_workers} worker(s)")
    runs = run_cells(cells, CellRunner(), num_workers=num_workers)
    return BenchmarkReport(
        rows=aggregate(runs),
        runs=runs,
        n_seeds=len(seeds),
        sweep_kind=None if sweep_kind is None else sweep_kind.value,
        config=config or {},
    )


def benchmark(
    estimators: Sequence[EstimatorLike],
    dataset_spec: DatasetSpec,
    seeds: Sequence[int],
    settings: Optional[EstimationSettings] = None,
    num_workers: int = 1,
) -> BenchmarkReport:
    """One row per estimator; each seed regenerates the dataset and refits."""
    seeds = check_seeds(seeds)
    names = [parse_estimator(e) for e in estimators]
    if not names:
        raise BenchmarkConfigError("No estimators requested")
    settings = settings or EstimationSettings()
    cells = [
        _cell(name, seed, settings, dataset_spec=dataset_spec)
        for name in names
        for seed in seeds
    ]
    return run_benchmark_cells(cells, seeds, num_workers=num_workers)


def repeat(
    estimator: EstimatorLike,
    dataset_spec: DatasetSpec,
    seeds: Sequence[int],
    settings: Optional[EstimationSettings] = None,
    num_workers: int = 1,
) -> BenchmarkReport:
    """A one-row report for a single estimator."""
    return benchmark([estimator], dataset_spec, seeds, settings, num_workers)


def repeat_fixed(
    estimators: Union[EstimatorLike, Sequence[EstimatorLike]],
    dataset: Dataset,
    seeds: Sequence[int],
    settings: Optional[EstimationSettings] = None,
    num_workers: int = 1,
) -> BenchmarkReport:
    """Refit on one fixed dataset with different training seeds.

    Bias columns are empty when the dataset carries no ground truth.
    """
    seeds = check_seeds(seeds)
    if isinstance(estimators, (str, EstimatorName)):
        estimators = [estimators]
    settings = settings or EstimationSettings()
    cells = [
        _cell(parse_estimator(name), seed, settings, dataset=dataset)
        for name in estimators
        for seed in seeds
    ]
    return run_benchmark_cells(cells, seeds, num_workers=num_workers)


def lambda_sweep(
    dataset_spec: DatasetSpec,
    grid: Sequence[float],
    seeds: Sequence[int],
    settings: Optional[EstimationSettings] = None,
    num_workers: int = 1,
) -> BenchmarkReport:
    """DIG2RSI at each adversarial weight; grid points share per-seed datasets."""
    grid = check_grid(grid, "lambda_a")
    seeds = check_seeds(seeds)
    settings = settings or EstimationSettings()
    cells = []
    for value in grid:
        point = settings.model_copy(
            update={
                "stage2_options": settings.stage2_options.model_copy(
                    update={"lambda_a": value}
                )
            }
        )
        cells.extend(
            _cell(
                EstimatorName.DIG2RSI,
                seed,
                point,
                dataset_spec=dataset_spec,
                sweep_kind=SweepKind.LAMBDA_A,
                sweep_value=value,
            )
            for seed in seeds
        )
    return run_benchmark_cells(
        cells, seeds, sweep_kind=SweepKind.LAMBDA_A, num_workers=num_workers
    )


def confounder_sweep(
    dataset_spec: DatasetSpec,
    strengths: Sequence[float],
    estimators: Sequence[EstimatorLike],
    seeds: Sequence[int],
    settings: Optional[EstimationSettings] = None,
    num_workers: int = 1,
) -> BenchmarkReport:
    """Every estimator at each confounding strength ``lambda_u = omega``."""
    strengths = check_grid(strengths, "confounder strength")
    seeds = check_seeds(seeds)
    names = [parse_estimator(e) for e in estimators]
    if not names:
        raise BenchmarkConfigError("No estimators requested")
    settings = settings or EstimationSettings()
    cells = []
    for strength in strengths:
        spec = dataset_spec.model_copy(
            update={"params": dataset_spec.params.with_confounding(strength)}
        )
        cells.extend(
            _cell(
                name,
                seed,
                settings,
                dataset_spec=spec,
                sweep_kind=SweepKind.CONFOUNDER,
                sweep_value=strength,
            )
            for name in names
            for seed in seeds
        )
    return run_benchmark_cells(
        cells, seeds, sweep_kind=SweepKind.CONFOUNDER, num_workers=num_workers
    )


def ig_ablation(
    dataset_spec: DatasetSpec,
    seeds: Sequence[int],
    settings: Optional[EstimationSettings] = None,
    num_workers: int = 1,
) -> BenchmarkReport:
    """DIG2RSI with (sweep value 1) and without (0) the (I − G) transform."""
    seeds = check_seeds(seeds)
    settings = settings or EstimationSettings()
    cells = []
    for use_ig in (True, False):
        point = settings.model_copy(update={"use_ig": use_ig})
        cells.extend(
            _cell(
                EstimatorName.DIG2RSI,
                seed,
                point,
                dataset_spec=dataset_spec,
                sweep_kind=SweepKind.IG_ABLATION,
                sweep_value=float(use_ig),
            )
            for seed in seeds
        )
    return run_benchmark_cells(
        cells, seeds, sweep_kind=SweepKind.IG_ABLATION, num_workers=num_workers
    )

import logging
from collections.abc import Callable
from pathlib import Path
from typing import Annotated, Optional

import typer
from pydantic import BaseModel, ValidationError
from rich.console import Console

from peerfx_kit.benchmark.harness import (
    benchmark as run_benchmark,
    confounder_sweep,
    ig_ablation,
    lambda_sweep,
    repeat_fixed,
)
from peerfx_kit.benchmark.results import render_report, write_report, write_result
from peerfx_kit.config.settings import PeerfxSettings
from peerfx_kit.connectors.dataset_io import read_dataset, write_dataset
from peerfx_kit.connectors.local_path.models import LocalPathTarget
from peerfx_kit.connectors.local_path.target_processor import LocalPathTargetProcessor
from peerfx_kit.datamodel.result import BenchmarkReport
from peerfx_kit.datamodel.run_config import RunConfig
from peerfx_kit.datamodel.specs import DatasetSpec
from peerfx_kit.datamodel.task_meta import SweepKind
from peerfx_kit.estimators import parse_estimator, run_estimator
from peerfx_kit.graph import spectral_radius_upper_bound
from peerfx_kit.logging_utils import configure_logging
from peerfx_kit.public_errors import (
    EXIT_USAGE,
    build_public_error_message,
    exit_code_for,
)
from peerfx_kit.simulate import dataset_from_spec

_log = logging.getLogger(__name__)

console = Console()
err_console = Console(stderr=True)

app = typer.Typer(
    name="peerfx-kit",
    no_args_is_help=True,
    add_completion=False,
    pretty_exceptions_enable=False,
)

RUN_CONFIG_FILE = "run_config.json"
DEFAULT_OUTPUT_DIR = Path("peerfx_output")


class CliState(BaseModel):
    settings: PeerfxSettings
    threads: Optional[int] = None

    @property
    def debug(self) -> bool:
        return self.settings.log_level == "debug"


ConfigOption = Annotated[
    Path,
    typer.Option(
        "--config",
        help="YAML configuration file of the run",
        exists=True,
        dir_okay=False,
        readable=True,
    ),
]
OutOption = Annotated[
    Optional[Path],
    typer.Option("--out", help="Output directory (overrides the config file)"),
]
SeedOverrideOption = Annotated[
    Optional[str],
    typer.Option(
        "--seed-override",
        help="Comma-separated seeds replacing the ones in the config file",
    ),
]


def _parse_seeds(raw: Optional[str]) -> Optional[list[int]]:
    if raw is None:
        return None
    try:
        seeds = [int(part) for part in raw.split(",") if part.strip()]
    except ValueError as exc:
        raise typer.BadParameter(
            f"Expected comma-separated integers, got {raw!r}", param_hint="--seed-override"
        ) from exc
    if not seeds:
        raise typer.BadParameter("No seeds given", param_hint="--seed-override")
    return seeds


def _load_settings() -> PeerfxSettings:
    try:
        return PeerfxSettings()
    except ValidationError as exc:
        err_console.print(f"[red]Error:[/red] {build_public_error_message(exc)}")
        raise typer.Exit(exit_code_for(exc)) from exc


def _state(ctx: typer.Context) -> CliState:
    if not isinstance(ctx.obj, CliState):
        ctx.obj = CliState(settings=_load_settings())
    return ctx.obj


def _guard(state: CliState, action: Callable[[], None]) -> None:
    """Run ``action`` and map failures onto the exit-code contract."""
    try:
        action()
    except (typer.Exit, typer.Abort, typer.BadParameter):
        raise
    except Exception as exc:
        _log.debug("Command failed", exc_info=True)
        err_console.print(
            f"[red]Error:[/red] {build_public_error_message(exc, state.debug)}"
        )
        raise typer.Exit(exit_code_for(exc)) from exc


def _resolve_output(state: CliState, config: RunConfig, out: Optional[Path]) -> Path:
    return out or config.output_dir or state.settings.output_dir or DEFAULT_OUTPUT_DIR


def _resolve_threads(state: CliState, config: RunConfig) -> int:
    return state.threads or config.threads or state.settings.threads


def _write_run_config(
    out_dir: Path, command: str, config: RunConfig, **extra: object
) -> None:
    with LocalPathTargetProcessor(LocalPathTarget(path=out_dir)) as target:
        target.write_json(
            {"command": command, "config": config.echo(), **extra}, RUN_CONFIG_FILE
        )


def _require_dataset_spec(config: RunConfig) -> DatasetSpec:
    if config.dataset is None:
        err_console.print("[red]Error:[/red] the configuration has no 'dataset' section")
        raise typer.Exit(EXIT_USAGE)
    return config.dataset


def _emit_report(
    state: CliState, report: BenchmarkReport, out_dir: Path
) -> None:
    write_report(report, out_dir, state.settings.float_format)
    render_report(report, console)
    console.print(f"Tables written to {out_dir}")


@app.callback()
def main(
    ctx: typer.Context,
    log_level: Annotated[
        Optional[str],
        typer.Option(
            "--log-level",
            help="One of debug, info, warning, error (default from PEERFX_LOG_LEVEL)",
        ),
    ] = None,
    threads: Annotated[
        Optional[int],
        typer.Option("--threads", min=1, help="Concurrent benchmark cells"),
    ] = None,
):
    """Peer-effect estimation on networks with feedback and hidden confounding."""
    settings = _load_settings()
    if log_level is not None:
        level = log_level.lower()
        if level not in ("debug", "info", "warning", "error"):
            raise typer.BadParameter(
                f"Unknown log level {log_level!r}", param_hint="--log-level"
            )
        settings = settings.model_copy(update={"log_level": level})
    configure_logging(settings.log_level)
    ctx.obj = CliState(settings=settings, threads=threads)


def _load_config(state: CliState, config_file: Path) -> RunConfig:
    config: Optional[RunConfig] = None

    def load() -> None:
        nonlocal config
        config = RunConfig.from_yaml(config_file)

    _guard(state, load)
    assert config is not None
    return config


@app.command()
def generate(
    ctx: typer.Context,
    config_file: ConfigOption,
    out: OutOption = None,
    seed_override: SeedOverrideOption = None,
):
    """Simulate a dataset and write it as graph.txt, X.csv, Y.csv and truth.json."""
    state = _state(ctx)
    config = _load_config(state, config_file)
    spec = _require_dataset_spec(config)
    seeds = _parse_seeds(seed_override) or [config.seed]
    out_dir = _resolve_output(state, config, out)

    def action() -> None:
        for seed in seeds:
            target = out_dir if len(seeds) == 1 else out_dir / f"seed_{seed}"
            ds = dataset_from_spec(spec, seed)
            write_dataset(ds, target, state.settings.float_format)
            console.print(
                f"Dataset seed={seed}: n={ds.n}, edges={ds.graph.num_edges}, "
                f"spectral bound={spectral_radius_upper_bound(ds.graph):.6f}, "
                f"beta={ds.true_beta} -> {target}"
            )
        _write_run_config(out_dir, "generate", config, seeds=seeds)

    _guard(state, action)


@app.command()
def estimate(
    ctx: typer.Context,
    config_file: ConfigOption,
    dataset_dir: Annotated[
        Path,
        typer.Option(
            "--dataset",
            help="Dataset directory written by 'generate' or prepared by hand",
            exists=True,
            file_okay=False,
        ),
    ],
    estimator: Annotated[
        str,
        typer.Option(
            "--estimator", help="dig2rsi, dl2sls, 2sls, fn-iv, loo or naive"
        ),
    ] = "dig2rsi",
    out: OutOption = None,
    seed_override: SeedOverrideOption = None,
):
    """Run one estimator on a dataset directory."""
    state = _state(ctx)
    config = _load_config(state, config_file)
    seeds = _parse_seeds(seed_override) or [config.seed]
    out_dir = _resolve_output(state, config, out)

    def action() -> None:
        name = parse_estimator(estimator)
        ds = read_dataset(dataset_dir)
        result = run_estimator(name, ds, config.estimation_settings(), seeds[0])
        write_result(result, out_dir, state.settings.float_format)
        _write_run_config(
            out_dir,
            "estimate",
            config,
            estimator=name.value,
            dataset=str(dataset_dir),
            seed=seeds[0],
        )
        console.print(f"{result.label}: PE = {result.pe_hat:.6f}")
        if result.abs_bias is not None:
            rel = "-" if result.rel_bias is None else f"{result.rel_bias:.4f}%"
            console.print(f"absolute bias = {result.abs_bias:.6f}, relative bias = {rel}")

    _guard(state, action)


@app.command()
def benchmark(
    ctx: typer.Context,
    config_file: ConfigOption,
    out: OutOption = None,
    seed_override: SeedOverrideOption = None,
):
    """Repeat every configured estimator over the seeds and tabulate the bias."""
    state = _state(ctx)
    config = _load_config(state, config_file)
    seeds = _parse_seeds(seed_override) or config.seeds
    out_dir = _resolve_output(state, config, out)
    threads = _resolve_threads(state, config)
    settings = config.estimation_settings()

    def action() -> None:
        if config.dataset_dir is not None:
            report = repeat_fixed(
                config.estimators,
                read_dataset(config.dataset_dir),
                seeds,
                settings,
                num_workers=threads,
            )
        else:
            report = run_benchmark(
                config.estimators,
                _require_dataset_spec(config),
                seeds,
                settings,
                num_workers=threads,
            )
        _emit_report(state, report, out_dir)
        _write_run_config(out_dir, "benchmark", config, seeds=seeds)

    _guard(state, action)


@app.command()
def sweep(
    ctx: typer.Context,
    config_file: ConfigOption,
    kind: Annotated[
        SweepKind,
        typer.Option("--kind", help="What to sweep", case_sensitive=False),
    ],
    out: OutOption = None,
    seed_override: SeedOverrideOption = None,
):
    """Sweep the adversarial weight, the confounding strength or the I−G step."""
    state = _state(ctx)
    config = _load_config(state, config_file)
    seeds = _parse_seeds(seed_override) or config.seeds
    out_dir = _resolve_output(state, config, out)
    threads = _resolve_threads(state, config)
    settings = config.estimation_settings()
    spec = _require_dataset_spec(config)

    def action() -> None:
        if kind == SweepKind.LAMBDA_A:
            report = lambda_sweep(
                spec, config.sweep.lambda_grid, seeds, settings, num_workers=threads
            )
        elif kind == SweepKind.CONFOUNDER:
            report = confounder_sweep(
                spec,
                config.sweep.confounder_strengths,
                config.sweep.estimators,
                seeds,
                settings,
                num_workers=threads,
            )
        else:
            report = ig_ablation(spec, seeds, settings, num_workers=threads)
        _emit_report(state, report, out_dir)
        _write_run_config(out_dir, "sweep", config, kind=kind.value, seeds=seeds)

    _guard(state, action)


if __name__ == "__main__":
    app()

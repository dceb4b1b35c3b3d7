import json
import logging
import re
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from pydantic import ValidationError

from peerfx_kit.connectors.errors import DatasetFormatError
from peerfx_kit.connectors.local_path.models import (
    FEATURES_FILE,
    GRAPH_FILE,
    OUTCOME_COLUMN,
    OUTCOMES_FILE,
    TRUTH_FILE,
    LocalPathSource,
)
from peerfx_kit.connectors.source_processor import BaseSourceProcessor
from peerfx_kit.datamodel.dataset import Dataset
from peerfx_kit.datamodel.sem_params import SemParams
from peerfx_kit.graph import GraphError
from peerfx_kit.simulate import build_dataset, read_edge_list

_log = logging.getLogger(__name__)

_HEADER = re.compile(r"#\s*n\s*=\s*(\d+)")


def _read_node_count(path: Path) -> Optional[int]:
    with path.open("r") as f:
        first = f.readline()
    match = _HEADER.match(first.strip())
    return int(match.group(1)) if match else None


def _read_table(path: Path, n: Optional[int]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DatasetFormatError(f"Cannot parse table: {exc}", path=str(path)) from exc
    if frame.shape[1] < 2:
        raise DatasetFormatError(
            "Expected a node id column followed by value columns", path=str(path)
        )
    # the first column holds node ids whatever its header
    node_column = frame.columns[0]
    frame = frame.sort_values(node_column, kind="stable").reset_index(drop=True)
    expected = np.arange(len(frame) if n is None else n)
    if len(frame) != len(expected) or not np.array_equal(
        frame[node_column].to_numpy(), expected
    ):
        raise DatasetFormatError(
            f"Node ids must be exactly 0..{len(expected) - 1}, one row each",
            path=str(path),
        )
    values = frame.drop(columns=[node_column])
    if not all(pd.api.types.is_numeric_dtype(t) for t in values.dtypes):
        raise DatasetFormatError("Non-numeric values", path=str(path))
    return values


class LocalPathSourceProcessor(BaseSourceProcessor[LocalPathSource]):
    """Reads a dataset directory: edge list, features, outcomes, optional truth."""

    def _initialize(self):
        """Validate that the directory and the required files exist."""
        path = self.source.path
        if not path.is_dir():
            raise FileNotFoundError(f"Dataset directory does not exist: {path}")
        missing = [
            name
            for name in (GRAPH_FILE, FEATURES_FILE, OUTCOMES_FILE)
            if not (path / name).is_file()
        ]
        if missing:
            raise DatasetFormatError(f"Missing files {missing}", path=str(path))

    def _finalize(self):
        """No cleanup needed for local filesystem."""

    def _read_truth(self) -> tuple[Optional[SemParams], Optional[int]]:
        truth_path = self.source.path / TRUTH_FILE
        if not truth_path.is_file():
            return None, None
        try:
            payload = json.loads(truth_path.read_text())
            params = SemParams.model_validate(payload["params"])
        except (json.JSONDecodeError, KeyError, ValidationError) as exc:
            raise DatasetFormatError(
                f"Malformed truth metadata: {exc}", path=str(truth_path)
            ) from exc
        return params, payload.get("seed")

    def _read_dataset(self) -> Dataset:
        path = self.source.path
        graph_path = path / GRAPH_FILE
        features = _read_table(path / FEATURES_FILE, _read_node_count(graph_path))
        n = len(features)
        try:
            graph = read_edge_list(graph_path, n)
        except GraphError as exc:
            raise DatasetFormatError(str(exc), path=str(graph_path)) from exc

        outcomes = _read_table(path / OUTCOMES_FILE, n)
        outcome_column = (
            OUTCOME_COLUMN if OUTCOME_COLUMN in outcomes.columns else outcomes.columns[0]
        )
        truth, seed = self._read_truth()

        def optional(column: str) -> Optional[np.ndarray]:
            if column not in outcomes.columns:
                return None
            return outcomes[column].to_numpy(dtype=np.float64)

        try:
            ds = build_dataset(
                graph,
                features.to_numpy(dtype=np.float64),
                outcomes[outcome_column].to_numpy(dtype=np.float64),
                U=optional("u"),
                eps=optional("eps"),
                truth=truth,
                seed=seed,
            )
        except ValidationError as exc:
            raise DatasetFormatError(str(exc), path=str(path)) from exc
        _log.info(
            f"Loaded dataset from {path}: n={ds.n}, d={ds.d}, edges={graph.num_edges}, "
            f"truth={'yes' if truth else 'no'}"
        )
        return ds

"""Dataset directory serialization through the local-path connectors."""

from pathlib import Path

import numpy as np
import pandas as pd

from peerfx_kit.connectors.local_path.models import (
    FEATURES_FILE,
    GRAPH_FILE,
    NODE_COLUMN,
    OUTCOME_COLUMN,
    OUTCOMES_FILE,
    TRUTH_FILE,
    LocalPathSource,
    LocalPathTarget,
)
from peerfx_kit.connectors.local_path.source_processor import LocalPathSourceProcessor
from peerfx_kit.connectors.local_path.target_processor import LocalPathTargetProcessor
from peerfx_kit.datamodel.dataset import Dataset


def edge_list_text(ds: Dataset) -> str:
    lines = [f"# n={ds.n}"]
    lines.extend(f"{i} {j}" for i, j in ds.graph.edges())
    return "\n".join(lines) + "\n"


def write_dataset(ds: Dataset, directory: Path, float_format: str = "%.17g") -> None:
    """Write ``ds`` as graph.txt, X.csv, Y.csv and, when simulated, truth.json.

    Only untransformed datasets can be written; the files hold raw outcomes.
    """
    if ds.ig_order != 0:
        raise ValueError("Only untransformed datasets can be written")
    nodes = np.arange(ds.n)
    features = pd.DataFrame(ds.X, columns=[f"x{k}" for k in range(ds.d)])
    features.insert(0, NODE_COLUMN, nodes)
    outcomes = pd.DataFrame({NODE_COLUMN: nodes, OUTCOME_COLUMN: ds.Y})
    if ds.U is not None:
        outcomes["u"] = ds.U
    if ds.eps is not None:
        outcomes["eps"] = ds.eps

    with LocalPathTargetProcessor(LocalPathTarget(path=directory)) as target:
        target.upload_object(edge_list_text(ds), GRAPH_FILE)
        target.write_frame(features, FEATURES_FILE, float_format)
        target.write_frame(outcomes, OUTCOMES_FILE, float_format)
        if ds.truth is not None:
            target.write_json(
                {"params": ds.truth.model_dump(mode="json"), "seed": ds.seed},
                TRUTH_FILE,
            )


def read_dataset(directory: Path) -> Dataset:
    with LocalPathSourceProcessor(LocalPathSource(path=directory)) as source:
        return source.read_dataset()

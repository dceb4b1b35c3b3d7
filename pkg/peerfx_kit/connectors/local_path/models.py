from pathlib import Path
from typing import Annotated

from pydantic import BaseModel, ConfigDict, Field

GRAPH_FILE = "graph.txt"
FEATURES_FILE = "X.csv"
OUTCOMES_FILE = "Y.csv"
TRUTH_FILE = "truth.json"
NODE_COLUMN = "node"
OUTCOME_COLUMN = "y"


class LocalPathSource(BaseModel):
    model_config = ConfigDict(extra="forbid")

    path: Annotated[
        Path,
        Field(
            description=(
                f"Dataset directory with {GRAPH_FILE}, {FEATURES_FILE}, "
                f"{OUTCOMES_FILE} and, for simulated data, {TRUTH_FILE}."
            ),
            examples=["./data/network/", "./runs/dataset/seed_0/"],
        ),
    ]


class LocalPathTarget(BaseModel):
    model_config = ConfigDict(extra="forbid")

    path: Annotated[
        Path,
        Field(
            description="Output directory, created on first use.",
            examples=["./runs/benchmark/"],
        ),
    ]

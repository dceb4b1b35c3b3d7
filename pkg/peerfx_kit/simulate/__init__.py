"""Semi-synthetic data from the peer-effect structural equation model."""

from peerfx_kit.simulate.errors import EquilibriumError, SimulationError
from peerfx_kit.simulate.graphs import gen_graph, graph_from_spec, read_edge_list
from peerfx_kit.simulate.sem import (
    build_dataset,
    covariate_link,
    dataset_from_spec,
    dataset_hash,
    gen_confounders,
    gen_dataset,
    outcome_under_intervention,
    preprocess_ig,
    solve_equilibrium,
    structural_shift,
    unexplained_exposure,
)

__all__ = [
    "EquilibriumError",
    "SimulationError",
    "build_dataset",
    "covariate_link",
    "dataset_from_spec",
    "dataset_hash",
    "gen_confounders",
    "gen_dataset",
    "gen_graph",
    "graph_from_spec",
    "outcome_under_intervention",
    "preprocess_ig",
    "read_edge_list",
    "solve_equilibrium",
    "structural_shift",
    "unexplained_exposure",
]

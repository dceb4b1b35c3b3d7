"""Sparse network operators."""

from peerfx_kit.graph.sparse import (
    FeatureMatrix,
    GraphError,
    SparseGraph,
    aggregate,
    from_edge_list,
    ig_transform,
    parse_edge_lines,
    remove_node_edges,
    second_order,
    spectral_radius_upper_bound,
)

__all__ = [
    "FeatureMatrix",
    "GraphError",
    "SparseGraph",
    "aggregate",
    "from_edge_list",
    "ig_transform",
    "parse_edge_lines",
    "remove_node_edges",
    "second_order",
    "spectral_radius_upper_bound",
]

import logging
from pathlib import Path
from typing import Optional, Union

import networkx as nx
import numpy as np

from peerfx_kit.datamodel.specs import GraphModel, GraphSpec
from peerfx_kit.graph import GraphError, SparseGraph, from_edge_list, parse_edge_lines

_log = logging.getLogger(__name__)


def _from_networkx(g: nx.Graph, n: int) -> SparseGraph:
    edges = sorted((min(u, v), max(u, v)) for u, v in g.edges())
    return from_edge_list(np.asarray(edges, dtype=np.int64).reshape(-1, 2), n)


def read_edge_list(path: Path, n: Optional[int] = None) -> SparseGraph:
    """Load an edge-list file; ``n`` defaults to the largest node id plus one."""
    with path.open("r") as f:
        pairs = parse_edge_lines(f)
    inferred = 1 + max((max(i, j) for i, j in pairs), default=-1)
    if n is None:
        n = inferred
    elif n < inferred:
        raise GraphError(
            f"{path} references node {inferred - 1} but only {n} nodes were declared"
        )
    return from_edge_list(pairs, n)


def gen_graph(
    n: Optional[int],
    model: GraphModel,
    param: Union[float, int, Path],
    seed: int,
) -> SparseGraph:
    """Draw (or load) an undirected simple graph; equal seeds give equal graphs."""
    if model == GraphModel.FROM_FILE:
        graph = read_edge_list(Path(param), n)
    else:
        if n is None or n < 2:
            raise GraphError(f"Random graphs need n >= 2, got {n}")
        if model == GraphModel.ERDOS_RENYI:
            p = float(param)
            if not 0 < p <= 1:
                raise GraphError(f"Edge probability must lie in (0, 1], got {p}")
            g = nx.fast_gnp_random_graph(n, p, seed=seed)
        elif model == GraphModel.BARABASI_ALBERT:
            m = int(param)
            if not 1 <= m < n:
                raise GraphError(f"Attachment count must lie in [1, {n}), got {m}")
            g = nx.barabasi_albert_graph(n, m, seed=seed)
        else:
            raise GraphError(f"Unknown graph model {model!r}")
        graph = _from_networkx(g, n)

    isolated = int(np.sum(graph.degrees() == 0))
    _log.debug(
        f"Generated {model.value} graph: n={graph.n}, edges={graph.num_edges}, "
        f"isolated={isolated}"
    )
    return graph


def graph_from_spec(spec: GraphSpec, seed: int) -> SparseGraph:
    return gen_graph(spec.n, spec.model, spec.param, seed)

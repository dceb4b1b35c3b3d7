"""Structural equation model with simultaneous feedback and hidden confounding."""

import hashlib
import logging
from typing import Optional, Union

import numpy as np
import numpy.typing as npt

from peerfx_kit.datamodel.dataset import Dataset
from peerfx_kit.datamodel.sem_params import Nonlinearity, SemParams
from peerfx_kit.datamodel.specs import DatasetSpec, GraphSpec
from peerfx_kit.graph import (
    FeatureMatrix,
    SparseGraph,
    aggregate,
    ig_transform,
    second_order,
    spectral_radius_upper_bound,
)
from peerfx_kit.simulate.errors import EquilibriumError, SimulationError
from peerfx_kit.simulate.graphs import graph_from_spec

_log = logging.getLogger(__name__)

SeedLike = Union[int, np.random.SeedSequence]
Vector = npt.NDArray[np.float64]

EQUILIBRIUM_TOL = 1e-12
EQUILIBRIUM_MAX_ITER = 10_000
EQUILIBRIUM_RESIDUAL_TOL = 1e-10


def covariate_link(X: FeatureMatrix, nonlinearity: Nonlinearity) -> FeatureMatrix:
    if nonlinearity == Nonlinearity.NONLINEAR:
        return np.tanh(X) + 0.25 * X**2
    return X


def gen_confounders(
    G: SparseGraph, scale: float, mixing: float, seed: SeedLike
) -> Vector:
    """Draw ``U = (1 − mixing)·Z + mixing·G·Z`` with ``Z`` iid ``N(0, scale²)``."""
    if scale <= 0:
        raise SimulationError(f"Confounder scale must be positive, got {scale}")
    if not 0 <= mixing <= 1:
        raise SimulationError(f"Mixing must lie in [0, 1], got {mixing}")
    rng = np.random.default_rng(seed)
    Z = rng.normal(0.0, scale, size=G.n)
    return (1.0 - mixing) * Z + mixing * aggregate(G, Z)


def solve_equilibrium(
    G: SparseGraph,
    beta: float,
    c: Vector,
    tol: float = EQUILIBRIUM_TOL,
    max_iter: int = EQUILIBRIUM_MAX_ITER,
) -> Vector:
    """Solve ``(I − βG)·Y = c`` by the fixed-point iteration ``Y ← c + βG·Y``."""
    c = np.asarray(c, dtype=np.float64)
    if c.shape != (G.n,):
        raise SimulationError(f"Shift has shape {c.shape}, expected ({G.n},)")
    if beta == 0:
        return c.copy()

    rho = spectral_radius_upper_bound(G)
    if abs(beta) * rho >= 1:
        raise EquilibriumError(
            f"No feedback equilibrium: |beta|·rho(G) = {abs(beta) * rho:.6f} >= 1"
        )

    Y = c.copy()
    for iteration in range(1, max_iter + 1):
        Y_next = c + beta * aggregate(G, Y)
        change = float(np.max(np.abs(Y_next - Y), initial=0.0))
        Y = Y_next
        # tol is absolute; large outcomes bottom out at a few ulps
        if change < max(tol, 4.0 * float(np.spacing(np.max(np.abs(Y), initial=0.0)))):
            _log.debug(f"Equilibrium converged after {iteration} iterations")
            break
    else:
        raise EquilibriumError(
            f"Equilibrium iteration did not converge in {max_iter} iterations "
            f"(last change {change:.3e}); |beta|·rho(G) is too close to 1"
        )

    residual = float(np.max(np.abs(Y - c - beta * aggregate(G, Y)), initial=0.0))
    if residual >= EQUILIBRIUM_RESIDUAL_TOL:
        raise EquilibriumError(
            f"Equilibrium residual {residual:.3e} exceeds {EQUILIBRIUM_RESIDUAL_TOL}"
        )
    return Y


def structural_shift(
    G: SparseGraph,
    X: FeatureMatrix,
    U: Optional[Vector],
    eps: Optional[Vector],
    params: SemParams,
) -> Vector:
    """Right-hand side ``c`` of ``(I − βG)·Y = c`` (every term except the feedback)."""
    d = X.shape[1]
    c = aggregate(G, X) @ params.gamma_vector(d)
    c = c + covariate_link(X, params.nonlinearity) @ params.delta_vector(d)
    if U is not None:
        c = c + params.lambda_u * U + params.omega_value * aggregate(G, U)
    if params.instrument_leak:
        c = c + params.instrument_leak * second_order(G, X).sum(axis=1)
    if eps is not None:
        c = c + eps
    return c


def build_dataset(
    graph: SparseGraph,
    X: FeatureMatrix,
    Y: Vector,
    U: Optional[Vector] = None,
    eps: Optional[Vector] = None,
    truth: Optional[SemParams] = None,
    seed: Optional[int] = None,
) -> Dataset:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    Y = np.asarray(Y, dtype=np.float64)
    return Dataset(
        graph=graph,
        X=X,
        Y=Y,
        Y_G=aggregate(graph, Y),
        X_G=aggregate(graph, X),
        X_G2=second_order(graph, X),
        U=U,
        eps=eps,
        truth=truth,
        seed=seed,
    )


def _spawn(seed: int) -> tuple[int, list[np.random.SeedSequence]]:
    graph_ss, *streams = np.random.SeedSequence(seed).spawn(4)
    return int(graph_ss.generate_state(1)[0]), streams


def gen_dataset(
    n: Optional[int],
    d: int,
    graph_spec: GraphSpec,
    params: SemParams,
    seed: int,
) -> Dataset:
    """Simulate one dataset. ``n`` overrides the node count of ``graph_spec``."""
    if n is not None and n != graph_spec.n:
        graph_spec = graph_spec.model_copy(update={"n": n})
    graph_seed, (x_ss, u_ss, eps_ss) = _spawn(seed)
    graph = graph_from_spec(graph_spec, graph_seed)

    X = np.random.default_rng(x_ss).standard_normal((graph.n, d))
    U = gen_confounders(
        graph, params.confounder_scale, params.confounder_mixing, u_ss
    )
    eps = np.random.default_rng(eps_ss).normal(0.0, params.eps_scale[1], size=graph.n)
    c = structural_shift(graph, X, U, eps, params)
    Y = solve_equilibrium(graph, params.beta, c)

    _log.debug(
        f"Simulated dataset seed={seed}: n={graph.n}, d={d}, beta={params.beta}, "
        f"lambda_u={params.lambda_u}, omega={params.omega_value}"
    )
    return build_dataset(graph, X, Y, U=U, eps=eps, truth=params, seed=seed)


def dataset_from_spec(spec: DatasetSpec, seed: int) -> Dataset:
    return gen_dataset(None, spec.d, spec.graph, spec.params, seed)


def preprocess_ig(ds: Dataset) -> Dataset:
    """Apply ``(I − G)`` to every node-level variable; ``ds`` is left untouched."""
    G = ds.graph

    def transform(value: Optional[np.ndarray]) -> Optional[np.ndarray]:
        return None if value is None else ig_transform(G, value)

    return Dataset(
        graph=G,
        X=ig_transform(G, ds.X),
        Y=ig_transform(G, ds.Y),
        Y_G=ig_transform(G, ds.Y_G),
        X_G=ig_transform(G, ds.X_G),
        X_G2=ig_transform(G, ds.X_G2),
        U=transform(ds.U),
        eps=transform(ds.eps),
        truth=ds.truth,
        seed=ds.seed,
        ig_order=ds.ig_order + 1,
    )


def outcome_under_intervention(ds: Dataset, y_g: Union[float, Vector]) -> Vector:
    """Outcomes with peer exposure pinned to ``y_g`` (the feedback loop is cut)."""
    if ds.truth is None:
        raise SimulationError("Interventions need the structural parameters")
    c = structural_shift(ds.graph, ds.X, ds.U, ds.eps, ds.truth)
    return c + ds.truth.beta * np.broadcast_to(np.asarray(y_g, dtype=np.float64), c.shape)


def unexplained_exposure(ds: Dataset) -> Vector:
    """Part of the transformed peer exposure ``(I − G)·Y_G`` not driven by features.

    This is the object the stage-1 residual estimates: the confounder and noise
    contributions propagated through the equilibrium.
    """
    if ds.ig_order != 0:
        raise SimulationError("Pass the untransformed dataset")
    if ds.truth is None or ds.U is None or ds.eps is None:
        raise SimulationError("Only simulated datasets carry the latent terms")
    c0 = structural_shift(ds.graph, np.zeros_like(ds.X), ds.U, ds.eps, ds.truth)
    Y0 = solve_equilibrium(ds.graph, ds.truth.beta, c0)
    return aggregate(ds.graph, ig_transform(ds.graph, Y0))


def dataset_hash(ds: Dataset) -> str:
    digest = hashlib.sha256()
    for array in (
        ds.graph.row_ptr.astype(np.int64),
        ds.graph.col_idx.astype(np.int64),
        ds.graph.weights,
        ds.X,
        ds.Y,
    ):
        digest.update(np.ascontiguousarray(array).tobytes())
    return digest.hexdigest()

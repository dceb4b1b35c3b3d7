"""Closed-form peer-effect regressions: naive OLS and two-stage least squares."""

import logging
import warnings
from collections.abc import Sequence
from typing import Optional

import numpy as np

from peerfx_kit.datamodel.dataset import Dataset
from peerfx_kit.datamodel.result import EstimationDiagnostics, EstimationResult
from peerfx_kit.datamodel.specs import EstimatorName, InstrumentSource, LinearIvSpec
from peerfx_kit.estimators.errors import (
    CollinearityError,
    WeakInstrumentError,
    WeakInstrumentWarning,
)
from peerfx_kit.estimators.linalg import (
    Array,
    least_squares,
    residual_sum_of_squares,
    with_intercept,
)
from peerfx_kit.graph import FeatureMatrix, SparseGraph, aggregate, ig_transform
from peerfx_kit.simulate import preprocess_ig

_log = logging.getLogger(__name__)

WEAK_INSTRUMENT_R2 = 0.01
_RETRY_RIDGE = 1e-8
_NO_VARIATION_R2 = 1e-10


def _prepared(ds: Dataset, use_ig: bool) -> Dataset:
    return preprocess_ig(ds) if use_ig else ds


def _constant_pe(
    name: EstimatorName, ds: Dataset, pe_hat: float, **kwargs
) -> EstimationResult:
    return EstimationResult.from_per_node(
        name.value,
        name.label,
        np.full(ds.n, pe_hat),
        ds.true_beta,
        **kwargs,
    )


def naive_ols(ds: Dataset, use_ig: bool = True) -> EstimationResult:
    """Regress Y on (Y_G, X_G, X, 1) and read off the Y_G coefficient."""
    data = _prepared(ds, use_ig)
    coef = least_squares(with_intercept(data.Y_G, data.X_G, data.X), data.Y)
    pe_hat = float(coef[0])
    _log.info(f"naive OLS estimate: {pe_hat:.6f}")
    return _constant_pe(
        EstimatorName.NAIVE,
        ds,
        pe_hat,
        diagnostics=EstimationDiagnostics(use_ig=use_ig),
        config={"use_ig": use_ig},
    )


def loo_instruments(
    G: SparseGraph, X: FeatureMatrix, nodes: Optional[Sequence[int]] = None
) -> FeatureMatrix:
    """Leave-one-out second-order instruments.

    Row ``i`` is ``Σ_j G_ij·(G₋ᵢX)_j`` where ``G₋ᵢ`` drops every edge incident
    to ``i``. Only the neighbours of ``i`` lose an edge, so each term is the
    neighbour mean of ``j`` with ``i`` removed:
    ``(deg_j·(GX)_j − X_i)/(deg_j − 1)``, or zero when ``j`` becomes isolated.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    deg = G.degrees()
    neighbor_sum = aggregate(G, X) * deg[:, None]

    rows = np.repeat(np.arange(G.n), deg)
    cols = G.col_idx
    remaining = (deg[cols] - 1).astype(np.float64)
    contribution = np.zeros((len(cols), X.shape[1]))
    alive = remaining > 0
    contribution[alive] = (
        neighbor_sum[cols[alive]] - X[rows[alive]]
    ) / remaining[alive, None]

    out = np.zeros_like(X)
    np.add.at(out, rows, contribution * G.weights[:, None])
    if nodes is None:
        return out
    return out[np.asarray(nodes, dtype=np.int64)]


def build_instruments(
    ds: Dataset, spec: LinearIvSpec, use_ig: bool = True
) -> FeatureMatrix:
    """Excluded instruments for ``ds``, (I − G)-transformed when ``use_ig`` is set."""
    if spec.instrument_source == InstrumentSource.SECOND_ORDER:
        Z = ds.X_G2
    elif spec.instrument_source == InstrumentSource.FIRST_ORDER_MEAN:
        Z = ds.X_G
    else:
        Z = loo_instruments(ds.graph, ds.X)
    return ig_transform(ds.graph, Z) if use_ig else Z


def _controls(data: Dataset, spec: LinearIvSpec) -> list[Array]:
    blocks = []
    if spec.control_neighbor:
        blocks.append(data.X_G)
    if spec.control_own:
        blocks.append(data.X)
    return blocks


def _fit_first_stage(design: Array, target: Array, ridge: float) -> tuple[Array, float]:
    try:
        return least_squares(design, target, ridge), ridge
    except CollinearityError:
        if ridge > 0:
            raise
    retry = _RETRY_RIDGE * max(1.0, float(np.trace(design.T @ design)) / design.shape[1])
    _log.warning(f"Stage-1 design is collinear, retrying with ridge={retry:.3e}")
    return least_squares(design, target, retry), retry


def _estimator_for(spec: LinearIvSpec) -> EstimatorName:
    return {
        InstrumentSource.SECOND_ORDER: EstimatorName.TSLS,
        InstrumentSource.FIRST_ORDER_MEAN: EstimatorName.FN_IV,
        InstrumentSource.LEAVE_ONE_OUT: EstimatorName.LOO,
    }[spec.instrument_source]


def tsls(
    ds: Dataset, spec: Optional[LinearIvSpec] = None, use_ig: bool = True
) -> EstimationResult:
    """Two-stage least squares with the instruments selected by ``spec``.

    Stage 1 regresses Y_G on (instruments, controls, 1); stage 2 regresses Y on
    (Ŷ_G, controls, 1). A stage-1 partial R² below 0.01 is reported as a weak
    instrument; a stage-2 design without excluded variation raises
    :class:`WeakInstrumentError`.
    """
    spec = spec or LinearIvSpec()
    name = _estimator_for(spec)
    Z = build_instruments(ds, spec, use_ig)
    data = _prepared(ds, use_ig)
    controls = _controls(data, spec)

    stage1 = with_intercept(Z, *controls)
    gamma, ridge1 = _fit_first_stage(stage1, data.Y_G, spec.ridge)
    y_g_hat = stage1 @ gamma

    rss_full = float(np.sum((data.Y_G - y_g_hat) ** 2))
    rss_restricted = residual_sum_of_squares(
        with_intercept(*controls) if controls else np.ones((ds.n, 1)),
        data.Y_G,
        spec.ridge,
    )
    partial_r2 = 0.0 if rss_restricted == 0 else max(0.0, 1.0 - rss_full / rss_restricted)

    diagnostics = EstimationDiagnostics(
        first_stage_partial_r2=partial_r2,
        n_instruments=int(Z.shape[1]),
        use_ig=use_ig,
    )
    if partial_r2 < WEAK_INSTRUMENT_R2:
        message = (
            f"{name.label}: stage-1 partial R² of the instruments is {partial_r2:.3e} "
            f"(< {WEAK_INSTRUMENT_R2})"
        )
        warnings.warn(message, WeakInstrumentWarning, stacklevel=2)
        _log.warning(message)
        diagnostics.weak_instrument = True
        diagnostics.warnings.append(message)
    if name == EstimatorName.FN_IV and Z.shape[1] == 1:
        diagnostics.warnings.append("FN-IV design is just identified")

    no_variation = WeakInstrumentError(
        f"{name.label}: fitted peer exposure is collinear with the controls; "
        "the instruments add no excluded variation"
    )
    if partial_r2 <= _NO_VARIATION_R2:
        raise no_variation
    try:
        coef = least_squares(with_intercept(y_g_hat, *controls), data.Y, spec.ridge)
    except CollinearityError as exc:
        raise no_variation from exc

    pe_hat = float(coef[0])
    _log.info(f"{name.label} estimate: {pe_hat:.6f} (stage-1 partial R²={partial_r2:.4f})")
    return _constant_pe(
        name,
        ds,
        pe_hat,
        diagnostics=diagnostics,
        config={**spec.model_dump(mode="json"), "stage1_ridge": ridge1},
    )

"""Deep two-stage least squares: plug-in prediction of the peer exposure."""

import logging

import numpy as np

from peerfx_kit.datamodel.dataset import Dataset
from peerfx_kit.datamodel.result import EstimationDiagnostics, EstimationResult
from peerfx_kit.datamodel.specs import EstimatorName
from peerfx_kit.datamodel.train_config import TrainConfig
from peerfx_kit.estimators.dig2rsi import (
    PE_COLUMN,
    STAGE2_ARCHITECTURE,
    architecture,
    derive_seeds,
    stage1_fit,
)
from peerfx_kit.nn import Mlp, Standardizer, Trainer, partial_wrt_input, r_squared
from peerfx_kit.simulate import preprocess_ig

_log = logging.getLogger(__name__)


def dl_2sls(
    ds: Dataset,
    cfg1: TrainConfig,
    cfg2: TrainConfig,
    seed: int = 0,
    use_ig: bool = True,
) -> EstimationResult:
    """Stage 1 predicts Y_G; stage 2 fits Y on (Ŷ_G, X_G, X) with no control function.

    The peer effect is the average derivative of the stage-2 network with
    respect to its Ŷ_G input.
    """
    s1, s2 = derive_seeds(seed, 2)
    cfg1 = cfg1.model_copy(update={"seed": s1})
    cfg2 = cfg2.model_copy(update={"seed": s2})
    data = preprocess_ig(ds) if use_ig else ds

    stage1 = stage1_fit(data, cfg1)
    y_g_hat = data.Y_G - stage1.residuals
    inputs = np.hstack([y_g_hat[:, None], data.X_G, data.X])

    input_scaler = Standardizer.fit(inputs)
    target_scaler = Standardizer.fit(data.Y)
    hidden, batchnorm, dropout = architecture(cfg2, STAGE2_ARCHITECTURE)
    model = Mlp.build(
        inputs.shape[1],
        hidden,
        1,
        batchnorm=batchnorm,
        dropout=dropout,
        seed=cfg2.seed,
    )
    x = input_scaler.transform(inputs)
    history = Trainer(model, cfg2, name="dl2sls-stage2").fit(
        x, target_scaler.transform(data.Y)
    )
    model.eval()

    per_node = partial_wrt_input(model, x, PE_COLUMN) * (
        np.asarray(target_scaler.scale) / input_scaler.scale[PE_COLUMN]
    )
    name = EstimatorName.DL2SLS
    result = EstimationResult.from_per_node(
        name.value,
        name.label,
        per_node,
        ds.true_beta,
        seed=seed,
        diagnostics=EstimationDiagnostics(
            stage1_r2=stage1.r2,
            degenerate_instrument=stage1.degenerate_instrument,
            use_ig=use_ig,
        ),
        config={
            "stage1": cfg1.model_dump(mode="json"),
            "stage2": cfg2.model_dump(mode="json"),
            "use_ig": use_ig,
            "stage2_final_loss": history[-1],
        },
    )
    fitted = target_scaler.inverse(model.predict(x))
    _log.info(
        f"DL-2SLS estimate: {result.pe_hat:.6f} "
        f"(stage-1 R²={stage1.r2:.4f}, stage-2 R²={r_squared(data.Y, fitted):.4f})"
    )
    return result

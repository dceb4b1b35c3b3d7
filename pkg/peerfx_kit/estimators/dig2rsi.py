"""Two-stage residual inclusion with adversarial debiasing.

Stage 1 fits the peer exposure Y_G on the instruments and covariates
(X_G2, X_G, X) and keeps the residual V̂ as a control function. Stage 2 fits Y
on (Y_G, X_G, X, V̂) through a feature extractor and a linear outcome head,
while a linear discriminator tries to recover V̂ from the extracted features
and the extractor is penalized by the discriminator's success. The peer
effect is the average derivative of the fitted outcome with respect to Y_G.
"""

import logging
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from peerfx_kit.datamodel.dataset import Dataset
from peerfx_kit.datamodel.result import EpochLoss, EstimationDiagnostics, EstimationResult
from peerfx_kit.datamodel.specs import EstimatorName
from peerfx_kit.datamodel.train_config import Stage2Config, TrainConfig
from peerfx_kit.estimators.linalg import least_squares, with_intercept
from peerfx_kit.nn import (
    Activation,
    Adam,
    ForwardCache,
    Mlp,
    ModelError,
    Standardizer,
    Trainer,
    TrainingDivergedError,
    batch_indices,
    mse_loss,
    partial_wrt_input,
    r_squared,
)
from peerfx_kit.nn.mlp import Array
from peerfx_kit.simulate import preprocess_ig

_log = logging.getLogger(__name__)

PE_COLUMN = 0

STAGE1_ARCHITECTURE = ((64, 64), True, 0.1)
STAGE2_ARCHITECTURE = ((64, 64), False, 0.0)


def architecture(
    cfg: TrainConfig, defaults: tuple[tuple[int, ...], bool, float]
) -> tuple[tuple[int, ...], bool, float]:
    hidden = cfg.hidden if cfg.hidden is not None else defaults[0]
    batchnorm = cfg.batchnorm if cfg.batchnorm is not None else defaults[1]
    dropout = cfg.dropout if cfg.dropout is not None else defaults[2]
    return hidden, batchnorm, dropout


def derive_seeds(seed: int, count: int) -> list[int]:
    return [
        int(child.generate_state(1)[0])
        for child in np.random.SeedSequence(seed).spawn(count)
    ]


def stage1_inputs(ds: Dataset) -> Array:
    return np.hstack([ds.X_G2, ds.X_G, ds.X])


class Stage1Output(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    model: Mlp
    input_scaler: Standardizer
    target_scaler: Standardizer
    residuals: np.ndarray
    fit_loss: float
    r2: float
    history: list[float] = []
    degenerate_instrument: bool = False

    def predict(self, ds: Dataset) -> Array:
        self.model.eval()
        scaled = self.model.predict(self.input_scaler.transform(stage1_inputs(ds)))
        return self.target_scaler.inverse(scaled)

    def recompute_residuals(self, ds: Dataset) -> Array:
        return ds.Y_G - self.predict(ds)


def stage1_fit(ds: Dataset, cfg: TrainConfig) -> Stage1Output:
    """Fit ``r_α: (X_G2, X_G, X) → Y_G`` and return the control-function residual."""
    degenerate = bool(np.any(np.all(ds.X_G2 == 0, axis=0)))
    if degenerate:
        _log.warning(
            "Second-order instruments contain all-zero columns; stage 1 proceeds "
            "without their variation"
        )

    inputs = stage1_inputs(ds)
    input_scaler = Standardizer.fit(inputs)
    target_scaler = Standardizer.fit(ds.Y_G)
    hidden, batchnorm, dropout = architecture(cfg, STAGE1_ARCHITECTURE)
    model = Mlp.build(
        inputs.shape[1],
        hidden,
        1,
        batchnorm=batchnorm,
        dropout=dropout,
        seed=cfg.seed,
    )
    history = Trainer(model, cfg, name="stage1").fit(
        input_scaler.transform(inputs), target_scaler.transform(ds.Y_G)
    )

    output = Stage1Output(
        model=model,
        input_scaler=input_scaler,
        target_scaler=target_scaler,
        residuals=np.zeros(ds.n),
        fit_loss=0.0,
        r2=0.0,
        history=history,
        degenerate_instrument=degenerate,
    )
    fitted = output.predict(ds)
    output.residuals = ds.Y_G - fitted
    output.fit_loss = float(np.mean(output.residuals**2))
    output.r2 = r_squared(ds.Y_G, fitted)
    _log.info(f"Stage 1 fitted: R²={output.r2:.4f}, L1={output.fit_loss:.6g}")
    return output



def confounder_correlation(residuals: Array, ds: Dataset) -> Optional[float]:
    """``corr(V̂, U)`` with ``U`` in the coordinates of ``ds``, so ``(I − G)U`` after the transform.

    None when the dataset carries no confounder or either vector is constant.
    """
    if ds.U is None:
        return None
    residuals = np.asarray(residuals, dtype=np.float64)
    if np.ptp(residuals) == 0 or np.ptp(ds.U) == 0:
        return None
    return float(np.corrcoef(residuals, ds.U)[0, 1])


def stage2_inputs(ds: Dataset, v_hat: Array, include_control: bool = True) -> Array:
    blocks = [ds.Y_G[:, None], ds.X_G, ds.X]
    if include_control:
        blocks.append(np.asarray(v_hat, dtype=np.float64)[:, None])
    return np.hstack(blocks)


class Stage2Model(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    extractor: Mlp
    outcome_head: Mlp
    discriminator: Mlp
    lambda_a: float = Field(ge=0)
    options: Stage2Config = Stage2Config()
    input_scaler: Standardizer
    target_scaler: Standardizer
    residual_scaler: Standardizer
    v_hat: Optional[np.ndarray] = None
    history: list[EpochLoss] = []

    @model_validator(mode="after")
    def _check_widths(self) -> "Stage2Model":
        width = self.extractor.output_dim
        if self.outcome_head.input_dim != width or self.discriminator.input_dim != width:
            raise ModelError(
                f"Heads take width {self.outcome_head.input_dim}/"
                f"{self.discriminator.input_dim} but the extractor emits {width}"
            )
        return self

    @property
    def adversarial(self) -> bool:
        return self.options.use_discriminator and self.options.include_control

    def scaled_inputs(self, ds: Dataset, v_hat: Optional[Array] = None) -> Array:
        v = self.v_hat if v_hat is None else v_hat
        if v is None and self.options.include_control:
            raise ModelError("The stage-1 residual is required to build stage-2 inputs")
        raw = stage2_inputs(
            ds, v if v is not None else np.zeros(ds.n), self.options.include_control
        )
        return self.input_scaler.transform(raw)

    def eval(self) -> "Stage2Model":
        self.extractor.eval()
        self.outcome_head.eval()
        self.discriminator.eval()
        return self

    def embed(self, ds: Dataset, v_hat: Optional[Array] = None) -> Array:
        self.eval()
        h, _ = self.extractor.forward(self.scaled_inputs(ds, v_hat))
        return h

    def predict(self, ds: Dataset, v_hat: Optional[Array] = None) -> Array:
        h = self.embed(ds, v_hat)
        return self.target_scaler.inverse(self.outcome_head.predict(h))

    def probe_r2(
        self, ds: Dataset, v_hat: Optional[Array] = None, seed: int = 0
    ) -> float:
        """Held-out R² of a least-squares probe predicting V̂ from the embedding."""
        v = self.v_hat if v_hat is None else v_hat
        if v is None:
            raise ModelError("The stage-1 residual is required for the probe")
        h = self.embed(ds, v_hat)
        order = np.random.default_rng(seed).permutation(ds.n)
        n_hold = min(ds.n - 1, max(1, round(self.options.probe_holdout * ds.n)))
        hold, fit = order[:n_hold], order[n_hold:]
        design = with_intercept(h[fit])
        coef = least_squares(design, v[fit], ridge=1e-6 * len(fit))
        return r_squared(v[hold], with_intercept(h[hold]) @ coef)


class Stage2Trainer:
    """Alternating updates of the discriminator and of the outcome model."""

    def __init__(self, model: Stage2Model, cfg: TrainConfig, disc_cfg: TrainConfig):
        self.model = model
        self.cfg = cfg
        self.extractor_opt = Adam.from_config(model.extractor, cfg)
        self.head_opt = Adam.from_config(model.outcome_head, cfg)
        self.disc_opt = Adam.from_config(model.discriminator, disc_cfg)

    def _disc_update(self, h: Array, v: Array) -> float:
        disc = self.model.discriminator.train()
        out, cache = disc.forward(h)
        loss, grad = mse_loss(out, v)
        self.disc_opt.step(disc.backward(cache, grad))
        return loss

    def _main_update(
        self, h: Array, cache: ForwardCache, y: Array, v: Array
    ) -> tuple[float, Optional[float]]:
        m = self.model
        out, head_cache = m.outcome_head.train().forward(h)
        l_out, g_out = mse_loss(out, y)
        head_grads = m.outcome_head.backward(head_cache, g_out)
        dh = head_grads.inputs

        l_disc: Optional[float] = None
        if m.adversarial:
            d_out, disc_cache = m.discriminator.forward(h)
            l_disc, g_disc = mse_loss(d_out, v)
            if m.lambda_a > 0:
                dh = dh - m.lambda_a * m.discriminator.backward(disc_cache, g_disc).inputs

        extractor_grads = m.extractor.backward(cache, dh)
        self.head_opt.step(head_grads)
        self.extractor_opt.step(extractor_grads)
        return l_out, l_disc

    def discriminator_step(self, z: Array, v: Array) -> float:
        """One descent step on L_disc with the extractor held fixed."""
        h, _ = self.model.extractor.train().forward(z)
        return self._disc_update(h, v)

    def main_step(self, z: Array, y: Array, v: Array) -> tuple[float, Optional[float]]:
        """One descent step on ``L_out − λ_a·L_disc``; the discriminator is frozen."""
        h, cache = self.model.extractor.train().forward(z)
        return self._main_update(h, cache, y, v)

    def batch_step(self, z: Array, y: Array, v: Array) -> tuple[float, Optional[float]]:
        h, cache = self.model.extractor.train().forward(z)
        if self.model.adversarial:
            self._disc_update(h, v)
        return self._main_update(h, cache, y, v)

    def train_epoch(self, z: Array, y: Array, v: Array, epoch: int) -> EpochLoss:
        batches = batch_indices(z.shape[0], self.cfg.batch_size, self.cfg.seed, epoch)
        results = []
        if self.model.options.alternation == "epoch":
            if self.model.adversarial:
                for idx in batches:
                    self.discriminator_step(z[idx], v[idx])
            for idx in batches:
                results.append(self.main_step(z[idx], y[idx], v[idx]))
        else:
            for idx in batches:
                results.append(self.batch_step(z[idx], y[idx], v[idx]))

        l_out = float(np.mean([r[0] for r in results]))
        disc_losses = [r[1] for r in results if r[1] is not None]
        l_disc = float(np.mean(disc_losses)) if disc_losses else None
        if not np.isfinite(l_out) or (l_disc is not None and not np.isfinite(l_disc)):
            raise TrainingDivergedError(
                f"stage2: non-finite loss at epoch {epoch} (L_out={l_out}, L_disc={l_disc})"
            )
        return EpochLoss(out=l_out, disc=l_disc)


def build_stage2_model(
    ds: Dataset,
    v_hat: Array,
    cfg: TrainConfig,
    lambda_a: float,
    options: Stage2Config,
    disc_seed: int = 0,
) -> Stage2Model:
    hidden, batchnorm, dropout = architecture(cfg, STAGE2_ARCHITECTURE)
    if not hidden:
        raise ModelError("The stage-2 extractor needs at least one hidden layer")
    z = stage2_inputs(ds, v_hat, options.include_control)
    head_seed, ext_seed = derive_seeds(cfg.seed, 2)
    extractor = Mlp.build(
        z.shape[1],
        hidden[:-1],
        hidden[-1],
        batchnorm=batchnorm,
        dropout=dropout,
        output_activation=Activation.RELU,
        seed=ext_seed,
    )
    return Stage2Model(
        extractor=extractor,
        outcome_head=Mlp.linear(hidden[-1], seed=head_seed),
        discriminator=Mlp.linear(hidden[-1], seed=disc_seed),
        lambda_a=lambda_a,
        options=options,
        input_scaler=Standardizer.fit(z),
        target_scaler=Standardizer.fit(ds.Y),
        residual_scaler=Standardizer.fit(v_hat),
        v_hat=np.asarray(v_hat, dtype=np.float64),
    )


def stage2_fit(
    ds: Dataset,
    v_hat: Array,
    cfg: TrainConfig,
    lambda_a: float,
    disc_cfg: Optional[TrainConfig] = None,
    options: Optional[Stage2Config] = None,
) -> Stage2Model:
    """Adversarial control-function regression on ``Z = (Y_G, X_G, X, V̂)``."""
    if lambda_a < 0:
        raise ValueError(f"lambda_a must be non-negative, got {lambda_a}")
    v_hat = np.asarray(v_hat, dtype=np.float64)
    if v_hat.shape != (ds.n,):
        raise ModelError(f"Residual has shape {v_hat.shape}, expected ({ds.n},)")
    options = options or Stage2Config()
    disc_cfg = disc_cfg or cfg
    model = build_stage2_model(ds, v_hat, cfg, lambda_a, options, disc_seed=disc_cfg.seed)
    trainer = Stage2Trainer(model, cfg, disc_cfg)

    z = model.scaled_inputs(ds)
    y = model.target_scaler.transform(ds.Y)
    v = model.residual_scaler.transform(v_hat)
    for epoch in range(cfg.epochs):
        loss = trainer.train_epoch(z, y, v, epoch)
        model.history.append(loss)
        _log.debug(f"stage2 epoch {epoch + 1}: L_out={loss.out:.6g}, L_disc={loss.disc}")
    model.eval()
    return model


def estimate_pe(
    m: Stage2Model,
    ds: Dataset,
    v_hat: Optional[Array] = None,
    name: EstimatorName = EstimatorName.DIG2RSI,
) -> EstimationResult:
    """Average derivative of the fitted outcome with respect to the Y_G input."""
    m.eval()
    z = m.scaled_inputs(ds, v_hat)
    if z.shape[1] != m.extractor.input_dim:
        raise ModelError(
            f"Stage-2 inputs have width {z.shape[1]}, model expects {m.extractor.input_dim}"
        )
    per_node = partial_wrt_input([m.extractor, m.outcome_head], z, PE_COLUMN)
    per_node = per_node * (
        np.asarray(m.target_scaler.scale) / np.asarray(m.input_scaler.scale)[PE_COLUMN]
    )
    return EstimationResult.from_per_node(
        name.value,
        name.label,
        per_node,
        ds.true_beta,
        diagnostics=EstimationDiagnostics(lambda_a=m.lambda_a, history=m.history),
    )


def run_dig2rsi(
    ds_raw: Dataset,
    cfg1: TrainConfig,
    cfg2: TrainConfig,
    lambda_a: Optional[float] = None,
    seed: int = 0,
    *,
    disc_cfg: Optional[TrainConfig] = None,
    options: Optional[Stage2Config] = None,
    apply_ig: bool = True,
) -> EstimationResult:
    """I−G preprocessing, stage 1, stage 2 and peer-effect extraction."""
    options = options or Stage2Config()
    if lambda_a is not None:
        options = options.model_copy(update={"lambda_a": lambda_a})
    s1, s2, sd, probe_seed = derive_seeds(seed, 4)
    cfg1 = cfg1.model_copy(update={"seed": s1})
    cfg2 = cfg2.model_copy(update={"seed": s2})
    disc_cfg = (disc_cfg or cfg2).model_copy(update={"seed": sd})

    data = preprocess_ig(ds_raw) if apply_ig else ds_raw
    stage1 = stage1_fit(data, cfg1)
    model = stage2_fit(
        data, stage1.residuals, cfg2, options.lambda_a, disc_cfg=disc_cfg, options=options
    )
    result = estimate_pe(model, data)

    diagnostics = result.diagnostics
    diagnostics.stage1_r2 = stage1.r2
    diagnostics.degenerate_instrument = stage1.degenerate_instrument
    diagnostics.discriminator_r2 = model.probe_r2(data, seed=probe_seed)
    diagnostics.confounder_corr = confounder_correlation(stage1.residuals, data)
    diagnostics.use_ig = apply_ig
    if stage1.degenerate_instrument:
        diagnostics.warnings.append("second-order instruments have all-zero columns")
    result.seed = seed
    result.config = {
        "stage1": cfg1.model_dump(mode="json"),
        "stage2": cfg2.model_dump(mode="json"),
        "discriminator": disc_cfg.model_dump(mode="json"),
        "stage2_options": options.model_dump(mode="json"),
        "apply_ig": apply_ig,
    }
    _log.info(
        f"DIG2RSI estimate: {result.pe_hat:.6f} (lambda_a={options.lambda_a}, "
        f"stage-1 R²={stage1.r2:.4f}, probe R²={diagnostics.discriminator_r2:.4f})"
    )
    return result

import logging
from typing import Literal, Optional

import numpy as np
import numpy.typing as npt

from peerfx_kit.datamodel.train_config import TrainConfig
from peerfx_kit.nn.errors import ModelError, TrainingDivergedError
from peerfx_kit.nn.mlp import Array, Mlp
from peerfx_kit.nn.optim import Adam

_log = logging.getLogger(__name__)

_MIN_SCALE = 1e-12


class Standardizer:
    """Column-wise ``(x − mean) / scale``; constant columns keep scale 1."""

    def __init__(self, mean: Array, scale: Array):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.scale = np.asarray(scale, dtype=np.float64)

    @classmethod
    def fit(cls, values: npt.ArrayLike) -> "Standardizer":
        x = np.asarray(values, dtype=np.float64)
        scale = x.std(axis=0)
        scale = np.where(scale < _MIN_SCALE, 1.0, scale)
        return cls(x.mean(axis=0), scale)

    @classmethod
    def identity(cls, width: Optional[int] = None) -> "Standardizer":
        if width is None:
            return cls(np.float64(0.0), np.float64(1.0))
        return cls(np.zeros(width), np.ones(width))

    def transform(self, values: npt.ArrayLike) -> Array:
        return (np.asarray(values, dtype=np.float64) - self.mean) / self.scale

    def inverse(self, values: npt.ArrayLike) -> Array:
        return np.asarray(values, dtype=np.float64) * self.scale + self.mean


def mse_loss(pred: Array, target: Array) -> tuple[float, Array]:
    """Mean squared error and its gradient with respect to ``pred``."""
    pred = pred.reshape(target.shape[0], -1)
    diff = pred - target.reshape(pred.shape)
    return float(np.mean(diff**2)), 2.0 * diff / diff.size


def batch_indices(n: int, batch_size: int, seed: int, epoch: int) -> list[Array]:
    """Shuffled mini-batches for one epoch; a trailing single row joins the previous batch."""
    order = np.random.default_rng([seed, epoch]).permutation(n)
    batches = [order[i : i + batch_size] for i in range(0, n, batch_size)]
    if len(batches) > 1 and len(batches[-1]) == 1:
        tail = batches.pop()
        batches[-1] = np.concatenate([batches[-1], tail])
    return batches


class Trainer:
    """Mini-batch Adam training of one network on a squared-error loss."""

    def __init__(
        self,
        model: Mlp,
        cfg: TrainConfig,
        loss: Literal["mse"] = "mse",
        name: str = "model",
    ):
        if loss != "mse":
            raise ModelError(f"Unsupported loss {loss!r}")
        self.model = model
        self.cfg = cfg
        self.optimizer = Adam.from_config(model, cfg)
        self.name = name
        self.epoch = 0

    def _check_rows(self, inputs: Array, targets: Array) -> None:
        if inputs.shape[0] != targets.shape[0]:
            raise ModelError(
                f"Inputs have {inputs.shape[0]} rows but targets have {targets.shape[0]}"
            )

    def train_epoch(self, inputs: npt.ArrayLike, targets: npt.ArrayLike) -> float:
        x = np.asarray(inputs, dtype=np.float64)
        y = np.asarray(targets, dtype=np.float64)
        self._check_rows(x, y)
        self.model.train()
        losses = []
        for batch_no, idx in enumerate(
            batch_indices(x.shape[0], self.cfg.batch_size, self.cfg.seed, self.epoch)
        ):
            out, cache = self.model.forward(x[idx])
            loss, grad = mse_loss(out, y[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"{self.name}: non-finite loss at epoch {self.epoch}, batch {batch_no}"
                )
            self.optimizer.step(self.model.backward(cache, grad))
            losses.append(loss)
        self.epoch += 1
        return float(np.mean(losses))

    def fit(
        self,
        inputs: npt.ArrayLike,
        targets: npt.ArrayLike,
        epochs: Optional[int] = None,
    ) -> list[float]:
        history = []
        for _ in range(self.cfg.epochs if epochs is None else epochs):
            loss = self.train_epoch(inputs, targets)
            history.append(loss)
            _log.debug(f"{self.name} epoch {self.epoch}: loss={loss:.6g}")
        return history


def train_epoch(
    model: Mlp,
    inputs: npt.ArrayLike,
    targets: npt.ArrayLike,
    cfg: TrainConfig,
    loss: Literal["mse"] = "mse",
) -> float:
    """Run one epoch with a fresh optimizer; use :class:`Trainer` across epochs."""
    return Trainer(model, cfg, loss=loss).train_epoch(inputs, targets)


def r_squared(target: npt.ArrayLike, pred: npt.ArrayLike) -> float:
    y = np.asarray(target, dtype=np.float64)
    resid = y - np.asarray(pred, dtype=np.float64)
    total = float(np.sum((y - y.mean()) ** 2))
    if total == 0:
        return 0.0
    return 1.0 - float(np.sum(resid**2)) / total

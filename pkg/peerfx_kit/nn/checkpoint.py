"""JSON checkpoints for :class:`Mlp`.

Floats are written with the shortest repr that round-trips, so a reloaded
network reproduces eval outputs exactly.
"""

from pathlib import Path

import numpy as np
from pydantic import BaseModel

from peerfx_kit.nn.mlp import Activation, DenseLayer, Mlp


class LayerCheckpoint(BaseModel):
    in_dim: int
    out_dim: int
    activation: Activation
    batchnorm: bool
    dropout: float
    weight: list[list[float]]
    bias: list[float]
    bn_gamma: list[float]
    bn_beta: list[float]
    running_mean: list[float]
    running_var: list[float]


class MlpCheckpoint(BaseModel):
    format_version: int = 1
    layers: list[LayerCheckpoint]

    @classmethod
    def from_model(cls, model: Mlp) -> "MlpCheckpoint":
        return cls(
            layers=[
                LayerCheckpoint(
                    in_dim=layer.in_dim,
                    out_dim=layer.out_dim,
                    activation=layer.activation,
                    batchnorm=layer.batchnorm,
                    dropout=layer.dropout,
                    weight=layer.weight.tolist(),
                    bias=layer.bias.tolist(),
                    bn_gamma=layer.bn_gamma.tolist(),
                    bn_beta=layer.bn_beta.tolist(),
                    running_mean=layer.running_mean.tolist(),
                    running_var=layer.running_var.tolist(),
                )
                for layer in model.layers
            ]
        )

    def to_model(self) -> Mlp:
        layers = []
        for entry in self.layers:
            weight = np.asarray(entry.weight, dtype=np.float64).reshape(
                entry.in_dim, entry.out_dim
            )
            layer = DenseLayer(
                weight,
                np.asarray(entry.bias, dtype=np.float64),
                activation=entry.activation,
                batchnorm=entry.batchnorm,
                dropout=entry.dropout,
            )
            layer.bn_gamma = np.asarray(entry.bn_gamma, dtype=np.float64)
            layer.bn_beta = np.asarray(entry.bn_beta, dtype=np.float64)
            layer.running_mean = np.asarray(entry.running_mean, dtype=np.float64)
            layer.running_var = np.asarray(entry.running_var, dtype=np.float64)
            layers.append(layer)
        return Mlp(layers).eval()


def save_checkpoint(model: Mlp, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(MlpCheckpoint.from_model(model).model_dump_json(indent=1))


def load_checkpoint(path: Path) -> Mlp:
    return MlpCheckpoint.model_validate_json(path.read_text()).to_model()

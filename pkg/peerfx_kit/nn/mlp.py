"""Feed-forward networks with hand-written reverse-mode gradients.

Each layer computes ``affine → batchnorm → activation → dropout``. Batchnorm
and dropout are only used on hidden layers; the output layer is a plain
affine map followed by its activation.
"""

import enum
import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import numpy.typing as npt

from peerfx_kit.nn.errors import ModelError

_log = logging.getLogger(__name__)

Array = npt.NDArray[np.float64]

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


class Activation(str, enum.Enum):
    RELU = "relu"
    IDENTITY = "identity"


class Mode(str, enum.Enum):
    TRAIN = "train"
    EVAL = "eval"


class DenseLayer:
    def __init__(
        self,
        weight: Array,
        bias: Array,
        activation: Activation = Activation.IDENTITY,
        batchnorm: bool = False,
        dropout: float = 0.0,
    ):
        weight = np.asarray(weight, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if weight.ndim != 2 or bias.shape != (weight.shape[1],):
            raise ModelError(
                f"Weight {weight.shape} and bias {bias.shape} shapes do not match"
            )
        if not 0 <= dropout < 1:
            raise ModelError(f"Dropout rate must lie in [0, 1), got {dropout}")
        self.weight = weight
        self.bias = bias
        self.activation = Activation(activation)
        self.batchnorm = batchnorm
        self.dropout = dropout
        out_dim = weight.shape[1]
        self.bn_gamma = np.ones(out_dim)
        self.bn_beta = np.zeros(out_dim)
        self.running_mean = np.zeros(out_dim)
        self.running_var = np.ones(out_dim)

    @property
    def in_dim(self) -> int:
        return int(self.weight.shape[0])

    @property
    def out_dim(self) -> int:
        return int(self.weight.shape[1])

    def parameters(self) -> dict[str, Array]:
        params = {"weight": self.weight, "bias": self.bias}
        if self.batchnorm:
            params["bn_gamma"] = self.bn_gamma
            params["bn_beta"] = self.bn_beta
        return params


@dataclass
class LayerCache:
    inputs: Array
    post: Array
    xhat: Optional[Array] = None
    inv_std: Optional[Array] = None
    mask: Optional[Array] = None


@dataclass
class ForwardCache:
    owner: int
    version: int
    training: bool
    layers: list[LayerCache] = field(default_factory=list)


@dataclass
class Gradients:
    params: list[dict[str, Array]]
    inputs: Array


class Mlp:
    """A chain of dense layers with a train/eval mode switch."""

    def __init__(self, layers: Sequence[DenseLayer], seed: int = 0):
        if not layers:
            raise ModelError("A network needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ModelError(
                    f"Layer widths do not chain: {prev.out_dim} -> {nxt.in_dim}"
                )
        self.layers = list(layers)
        self.mode = Mode.TRAIN
        self._rng = np.random.default_rng(seed)
        self._version = 0

    @classmethod
    def build(
        cls,
        input_dim: int,
        hidden: Sequence[int],
        output_dim: int = 1,
        *,
        batchnorm: bool = False,
        dropout: float = 0.0,
        output_activation: Activation = Activation.IDENTITY,
        seed: int = 0,
    ) -> "Mlp":
        """He-initialized network: ``hidden`` ReLU layers then one output layer."""
        init_ss, dropout_ss = np.random.SeedSequence(seed).spawn(2)
        rng = np.random.default_rng(init_ss)
        widths = [input_dim, *hidden, output_dim]
        layers = []
        for i, (fan_in, fan_out) in enumerate(zip(widths, widths[1:])):
            last = i == len(widths) - 2
            activation = output_activation if last else Activation.RELU
            gain = 2.0 if activation == Activation.RELU else 1.0
            layers.append(
                DenseLayer(
                    rng.normal(0.0, np.sqrt(gain / fan_in), size=(fan_in, fan_out)),
                    np.zeros(fan_out),
                    activation=activation,
                    batchnorm=batchnorm and not last,
                    dropout=0.0 if last else dropout,
                )
            )
        model = cls(layers)
        model._rng = np.random.default_rng(dropout_ss)
        return model

    @classmethod
    def linear(cls, input_dim: int, output_dim: int = 1, seed: int = 0) -> "Mlp":
        return cls.build(input_dim, (), output_dim, seed=seed)

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    def train(self) -> "Mlp":
        self.mode = Mode.TRAIN
        return self

    def eval(self) -> "Mlp":
        self.mode = Mode.EVAL
        return self

    def parameters(self) -> list[tuple[str, Array]]:
        return [
            (f"layer{i}.{name}", value)
            for i, layer in enumerate(self.layers)
            for name, value in layer.parameters().items()
        ]

    def mark_updated(self) -> None:
        """Invalidate every outstanding forward cache."""
        self._version += 1

    def forward(self, batch: npt.ArrayLike) -> tuple[Array, ForwardCache]:
        x = np.asarray(batch, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ModelError(
                f"Expected a batch of width {self.input_dim}, got shape {x.shape}"
            )
        training = self.mode == Mode.TRAIN
        cache = ForwardCache(owner=id(self), version=self._version, training=training)

        for layer in self.layers:
            z = x @ layer.weight + layer.bias
            entry = LayerCache(inputs=x, post=z)
            if layer.batchnorm:
                if training:
                    n = z.shape[0]
                    if n < 2:
                        raise ModelError("Batchnorm needs at least 2 rows in train mode")
                    mean = z.mean(axis=0)
                    var = z.var(axis=0)
                    layer.running_mean = (
                        1 - BN_MOMENTUM
                    ) * layer.running_mean + BN_MOMENTUM * mean
                    layer.running_var = (
                        1 - BN_MOMENTUM
                    ) * layer.running_var + BN_MOMENTUM * var * n / (n - 1)
                else:
                    mean, var = layer.running_mean, layer.running_var
                entry.inv_std = 1.0 / np.sqrt(var + BN_EPS)
                entry.xhat = (z - mean) * entry.inv_std
                entry.post = layer.bn_gamma * entry.xhat + layer.bn_beta
            h = (
                np.maximum(entry.post, 0.0)
                if layer.activation == Activation.RELU
                else entry.post
            )
            if training and layer.dropout > 0:
                keep = self._rng.random(h.shape) >= layer.dropout
                entry.mask = keep / (1.0 - layer.dropout)
                h = h * entry.mask
            cache.layers.append(entry)
            x = h
        return x, cache

    def backward(self, cache: ForwardCache, upstream: npt.ArrayLike) -> Gradients:
        if cache.owner != id(self) or len(cache.layers) != len(self.layers):
            raise ModelError("Cache was produced by a different network")
        if cache.version != self._version:
            raise ModelError("Stale cache: parameters changed since the forward pass")
        g = np.asarray(upstream, dtype=np.float64)
        if g.ndim == 1:
            g = g[:, None]
        expected = cache.layers[-1].post.shape
        if g.shape != expected:
            raise ModelError(f"Upstream gradient {g.shape} does not match {expected}")

        params: list[dict[str, Array]] = []
        for layer, entry in zip(reversed(self.layers), reversed(cache.layers)):
            if entry.mask is not None:
                g = g * entry.mask
            if layer.activation == Activation.RELU:
                g = g * (entry.post > 0)
            grads: dict[str, Array] = {}
            if layer.batchnorm:
                assert entry.xhat is not None and entry.inv_std is not None
                grads["bn_gamma"] = (g * entry.xhat).sum(axis=0)
                grads["bn_beta"] = g.sum(axis=0)
                dxhat = g * layer.bn_gamma
                if cache.training:
                    n = g.shape[0]
                    g = (entry.inv_std / n) * (
                        n * dxhat
                        - dxhat.sum(axis=0)
                        - entry.xhat * (dxhat * entry.xhat).sum(axis=0)
                    )
                else:
                    g = dxhat * entry.inv_std
            grads["weight"] = entry.inputs.T @ g
            grads["bias"] = g.sum(axis=0)
            g = g @ layer.weight.T
            params.append(grads)
        params.reverse()
        return Gradients(params=params, inputs=g)

    def predict(self, batch: npt.ArrayLike) -> Array:
        out, _ = self.forward(batch)
        return out[:, 0] if self.output_dim == 1 else out


def forward(model: Mlp, batch: npt.ArrayLike) -> tuple[Array, ForwardCache]:
    return model.forward(batch)


def backward(model: Mlp, cache: ForwardCache, upstream: npt.ArrayLike) -> Gradients:
    return model.backward(cache, upstream)


def partial_wrt_input(
    models: Union[Mlp, Sequence[Mlp]], batch: npt.ArrayLike, input_column: int
) -> Array:
    """Per-row derivative of the scalar output of ``models`` (applied in order)."""
    chain = [models] if isinstance(models, Mlp) else list(models)
    if any(m.mode != Mode.EVAL for m in chain):
        raise ModelError("Input derivatives need eval mode (dropout is random in train)")
    if chain[-1].output_dim != 1:
        raise ModelError("Input derivatives need a scalar output")
    if not 0 <= input_column < chain[0].input_dim:
        raise ModelError(
            f"Column {input_column} is outside the input width {chain[0].input_dim}"
        )

    x = np.asarray(batch, dtype=np.float64)
    caches = []
    for model in chain:
        x, cache = model.forward(x)
        caches.append(cache)
    g = np.ones_like(x)
    for model, cache in zip(reversed(chain), reversed(caches)):
        g = model.backward(cache, g).inputs
    return g[:, input_column]

import numpy as np

from peerfx_kit.datamodel.train_config import TrainConfig
from peerfx_kit.nn.errors import ModelError
from peerfx_kit.nn.mlp import Gradients, Mlp


class Adam:
    """Adaptive-moment optimizer bound to one network."""

    def __init__(
        self,
        model: Mlp,
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ):
        self.model = model
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self._m = {name: np.zeros_like(p) for name, p in model.parameters()}
        self._v = {name: np.zeros_like(p) for name, p in model.parameters()}

    @classmethod
    def from_config(cls, model: Mlp, cfg: TrainConfig) -> "Adam":
        return cls(
            model,
            lr=cfg.lr,
            beta1=cfg.beta1,
            beta2=cfg.beta2,
            eps=cfg.eps,
            weight_decay=cfg.weight_decay,
        )

    def step(self, grads: Gradients) -> None:
        if len(grads.params) != len(self.model.layers):
            raise ModelError("Gradients do not match the optimized network")
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for i, (layer, layer_grads) in enumerate(
            zip(self.model.layers, grads.params)
        ):
            for name, param in layer.parameters().items():
                g = layer_grads[name]
                if self.weight_decay and name == "weight":
                    g = g + self.weight_decay * param
                key = f"layer{i}.{name}"
                m = self._m[key]
                v = self._v[key]
                m *= self.beta1
                m += (1.0 - self.beta1) * g
                v *= self.beta2
                v += (1.0 - self.beta2) * g * g
                param -= (
                    self.lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)
                )
        self.model.mark_updated()

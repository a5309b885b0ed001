"""Sequential container and checkpoint serialization."""
from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np

from ..errors import ShapeMismatch
from .layers import Dropout, Layer

CHECKPOINT_FORMAT = 1


class Sequential:
    """Layers applied in order; input is ``(batch, time, features)``.

    Parameters are addressed by ``"<layer index>.<name>"`` keys so optimizers
    and checkpoints see one flat namespace.
    """

    def __init__(self, layers, input_shape, spec=None, dtype=np.float64):
        self.layers: list[Layer] = list(layers)
        self.input_shape = tuple(input_shape)  # (L, d), batch excluded
        self.spec = spec
        self.dtype = np.dtype(dtype)
        self.astype(self.dtype)

    def astype(self, dtype):
        """Cast every parameter (in place of the old arrays) to ``dtype``."""
        self.dtype = np.dtype(dtype)
        for layer in self.layers:
            layer.params = {k: v.astype(self.dtype) for k, v in layer.params.items()}
        return self

    @property
    def recurrent(self) -> bool:
        return any(layer.recurrent for layer in self.layers)

    def forward(self, x, training=False, rng=None):
        x = np.asarray(x, dtype=self.dtype)
        if x.shape[1:] != self.input_shape:
            raise ShapeMismatch(f"model expects (B, {self.input_shape[0]}, {self.input_shape[1]}), got {x.shape}")
        for layer in self.layers:
            x = layer.forward(x, training=training, rng=rng)
        return x

    __call__ = forward

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def params(self) -> dict:
        return {f"{i}.{name}": p for i, layer in enumerate(self.layers) for name, p in layer.params.items()}

    def grads(self) -> dict:
        return {f"{i}.{name}": g for i, layer in enumerate(self.layers) for name, g in layer.grads.items()}

    def weight_keys(self) -> list:
        """Keys of parameters subject to the L2 penalty (biases excluded)."""
        return [f"{i}.{name}" for i, layer in enumerate(self.layers) for name in layer.weight_names]

    def weights(self) -> list:
        p = self.params()
        return [p[k] for k in self.weight_keys()]

    def set_dropout(self, rate: float):
        for layer in self.layers:
            if isinstance(layer, Dropout):
                layer.rate = float(rate)

    def state(self) -> dict:
        return {k: v.copy() for k, v in self.params().items()}

    def load_state(self, state: dict):
        for k, p in self.params().items():
            if state[k].shape != p.shape:
                raise ShapeMismatch(f"parameter {k} has shape {p.shape}, state has {state[k].shape}")
            p[...] = state[k]

    def count_parameters(self) -> int:
        return int(sum(p.size for p in self.params().values()))

    def layer_configs(self) -> list:
        return [layer.config() for layer in self.layers]


def save_checkpoint(model: Sequential, path, architecture: dict):
    """Write ``architecture`` plus every parameter as little-endian float64 bytes."""
    entries = []
    for key, p in model.params().items():
        data = np.ascontiguousarray(p, dtype="<f8").tobytes()
        entries.append({"key": key, "shape": list(p.shape), "data": base64.b64encode(data).decode("ascii")})
    doc = {"format_version": CHECKPOINT_FORMAT, "dtype": "<f8", "architecture": architecture, "parameters": entries}
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1))


def load_checkpoint(path, builder):
    """Rebuild a model with ``builder(architecture)`` and load the stored parameters."""
    doc = json.loads(Path(path).read_text())
    if doc.get("format_version") != CHECKPOINT_FORMAT:
        raise ValueError(f"unsupported checkpoint format {doc.get('format_version')!r}")
    model = builder(doc["architecture"])
    state = {
        e["key"]: np.frombuffer(base64.b64decode(e["data"]), dtype="<f8").reshape(e["shape"]).astype(float)
        for e in doc["parameters"]
    }
    model.load_state(state)
    return model

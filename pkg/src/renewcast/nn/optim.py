"""Adam and RMSprop updates on dicts of parameter arrays (updated in place)."""
from __future__ import annotations

import numpy as np

OPTIMIZERS = ("adam", "rmsprop")


class Adam:
    def __init__(self, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate, self.beta1, self.beta2, self.eps = learning_rate, beta1, beta2, eps
        self.m, self.v, self.t = {}, {}, 0

    def step(self, params: dict, grads: dict):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for key, w in params.items():
            g = grads[key]
            m = self.m.get(key)
            if m is None:
                m = self.m[key] = np.zeros_like(w)
                self.v[key] = np.zeros_like(w)
            v = self.v[key]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            w -= self.learning_rate * (m / c1) / (np.sqrt(v / c2) + self.eps)


class RMSprop:
    def __init__(self, learning_rate=1e-3, decay=0.9, eps=1e-8):
        self.learning_rate, self.decay, self.eps = learning_rate, decay, eps
        self.v = {}

    def step(self, params: dict, grads: dict):
        rho = self.decay
        for key, w in params.items():
            g = grads[key]
            v = self.v.get(key)
            if v is None:
                v = self.v[key] = np.zeros_like(w)
            v *= rho
            v += (1.0 - rho) * g * g
            w -= self.learning_rate * g / (np.sqrt(v) + self.eps)


def make_optimizer(name: str, learning_rate: float):
    if name == "adam":
        return Adam(learning_rate)
    if name == "rmsprop":
        return RMSprop(learning_rate)
    raise ValueError(f"unknown optimizer {name!r}")


def optimizer_step(state, params: dict, grads: dict, config):
    """Functional form: ``state`` is ``None`` on the first call; returns ``(state, params)``."""
    if state is None:
        state = make_optimizer(config.optimizer, config.learning_rate)
    state.step(params, grads)
    return state, params


def clip_global_norm(grads: dict, max_norm: float):
    """Rescale all gradients together so their joint L2 norm is at most ``max_norm``."""
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if total > max_norm:
        factor = max_norm / total
        for g in grads.values():
            g *= factor
    return total

"""Layers with hand-written forward and backward passes.

Sequence tensors are laid out ``(batch, time, channels)``. Every layer keeps
what it needs from the last forward call and ``backward`` fills
``layer.grads`` (same keys and shapes as ``layer.params``) and returns the
gradient with respect to the layer input.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..errors import SequenceTooShort, ShapeMismatch


def sigmoid(z):
    return expit(z)


ACTIVATIONS = ("relu", "tanh", "sigmoid", "identity")


def activate(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    if name == "sigmoid":
        return sigmoid(z)
    if name == "identity":
        return z
    raise ValueError(f"unknown activation {name!r}")


def activation_grad(name, z, a):
    """Derivative of the activation given pre-activation ``z`` and output ``a``."""
    if name == "relu":
        return (z > 0).astype(z.dtype)
    if name == "tanh":
        return 1.0 - a * a
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "identity":
        return np.ones_like(z)
    raise ValueError(f"unknown activation {name!r}")


def glorot_uniform(rng, fan_in, fan_out, shape):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    """Base class; parameter-free layers keep empty dicts."""

    weight_names: tuple = ()
    recurrent = False

    def __init__(self):
        self.params = {}
        self.grads = {}

    def forward(self, x, training=False, rng=None):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def output_shape(self, input_shape):
        return input_shape

    def n_params(self):
        return int(sum(p.size for p in self.params.values()))

    def config(self):
        return {"type": type(self).__name__}


class Dense(Layer):
    """``act(x W^T + b)`` over the last axis, so it also applies per timestep."""

    weight_names = ("W",)

    def __init__(self, n_in, n_out, activation="identity", rng=None):
        super().__init__()
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.n_in, self.n_out, self.activation = n_in, n_out, activation
        self.params = {"W": glorot_uniform(rng, n_in, n_out, (n_out, n_in)), "b": np.zeros(n_out)}

    def forward(self, x, training=False, rng=None):
        if x.shape[-1] != self.n_in:
            raise ShapeMismatch(f"Dense expects last dim {self.n_in}, got {x.shape[-1]}")
        z = x @ self.params["W"].T + self.params["b"]
        a = activate(self.activation, z)
        self._cache = (x, z, a)
        return a

    def backward(self, grad):
        x, z, a = self._cache
        dz = grad * activation_grad(self.activation, z, a)
        x2 = x.reshape(-1, self.n_in)
        dz2 = dz.reshape(-1, self.n_out)
        self.grads = {"W": dz2.T @ x2, "b": dz2.sum(axis=0)}
        return dz @ self.params["W"]

    def output_shape(self, input_shape):
        return (*input_shape[:-1], self.n_out)

    def config(self):
        return {"type": "Dense", "n_in": self.n_in, "n_out": self.n_out, "activation": self.activation}


class LSTM(Layer):
    """Single LSTM layer; gate blocks ordered input, forget, output, candidate.

    ``W`` maps inputs ``(n_in, 4H)``, ``U`` maps the previous hidden state
    ``(H, 4H)``. Initial hidden and cell states are zero unless given.
    """

    weight_names = ("W", "U")
    recurrent = True

    def __init__(self, n_in, hidden, return_sequences=False, rng=None, forget_bias=1.0):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.n_in, self.hidden, self.return_sequences = n_in, hidden, return_sequences
        bound = 1.0 / np.sqrt(n_in + hidden)
        b = np.zeros(4 * hidden)
        b[hidden : 2 * hidden] = forget_bias
        self.params = {
            "W": rng.uniform(-bound, bound, size=(n_in, 4 * hidden)),
            "U": rng.uniform(-bound, bound, size=(hidden, 4 * hidden)),
            "b": b,
        }

    def step(self, x_t, h_prev, c_prev):
        """One cell update; returns ``(h_t, c_t)``."""
        H = self.hidden
        z = x_t @ self.params["W"] + h_prev @ self.params["U"] + self.params["b"]
        i, f, o = sigmoid(z[:, :H]), sigmoid(z[:, H : 2 * H]), sigmoid(z[:, 2 * H : 3 * H])
        g = np.tanh(z[:, 3 * H :])
        c = f * c_prev + i * g
        return o * np.tanh(c), c

    def forward(self, x, training=False, rng=None, h0=None, c0=None):
        if x.ndim != 3 or x.shape[-1] != self.n_in:
            raise ShapeMismatch(f"LSTM expects (B, T, {self.n_in}), got {x.shape}")
        B, T, _ = x.shape
        H = self.hidden
        U = self.params["U"]
        # time-major buffers keep every per-step slice contiguous
        xs = np.ascontiguousarray(x.transpose(1, 0, 2))
        gates = xs @ self.params["W"] + self.params["b"]
        dt = gates.dtype
        hs = np.empty((T + 1, B, H), dt)
        cs = np.empty((T + 1, B, H), dt)
        tanh_c = np.empty((T, B, H), dt)
        hs[0] = 0.0 if h0 is None else h0
        cs[0] = 0.0 if c0 is None else c0
        for t in range(T):
            z = gates[t]
            z += hs[t] @ U
            z[:, : 3 * H] = expit(z[:, : 3 * H])
            np.tanh(z[:, 3 * H :], out=z[:, 3 * H :])
            np.multiply(z[:, H : 2 * H], cs[t], out=cs[t + 1])
            cs[t + 1] += z[:, :H] * z[:, 3 * H :]
            np.tanh(cs[t + 1], out=tanh_c[t])
            np.multiply(z[:, 2 * H : 3 * H], tanh_c[t], out=hs[t + 1])
        self._cache = (xs, gates, hs, cs, tanh_c)
        self.last_state = (hs[T].copy(), cs[T].copy())
        return hs[1:].transpose(1, 0, 2).copy() if self.return_sequences else hs[T].copy()

    def backward(self, grad, dh_last=None, dc_last=None):
        xs, gates, hs, cs, tanh_c = self._cache
        T, B, _ = xs.shape
        H = self.hidden
        U_T = self.params["U"].T
        dH = np.ascontiguousarray(grad.transpose(1, 0, 2)) if self.return_sequences else None
        dt = gates.dtype
        dZ = np.empty((T, B, 4 * H), dt)
        dh = np.zeros((B, H), dt) if dh_last is None else dh_last.copy()
        dc_next = np.zeros((B, H), dt) if dc_last is None else dc_last
        if dH is None:
            dh += grad
        for t in range(T - 1, -1, -1):
            if dH is not None:
                dh += dH[t]
            act = gates[t]
            i, f, o, g = act[:, :H], act[:, H : 2 * H], act[:, 2 * H : 3 * H], act[:, 3 * H :]
            tc = tanh_c[t]
            dc = dh * o * (1.0 - tc * tc) + dc_next
            dz = dZ[t]
            dz[:, :H] = dc * g * i * (1.0 - i)
            dz[:, H : 2 * H] = dc * cs[t] * f * (1.0 - f)
            dz[:, 2 * H : 3 * H] = dh * tc * o * (1.0 - o)
            dz[:, 3 * H :] = dc * i * (1.0 - g * g)
            dc_next = dc * f
            dh = dz @ U_T
        dZ2 = dZ.reshape(-1, 4 * H)
        self.grads = {
            "W": xs.reshape(-1, self.n_in).T @ dZ2,
            "U": hs[:-1].reshape(-1, H).T @ dZ2,
            "b": dZ2.sum(axis=0),
        }
        self.initial_state_grads = (dh, dc_next)
        return (dZ @ self.params["W"].T).transpose(1, 0, 2)

    def output_shape(self, input_shape):
        B, T, _ = input_shape
        return (B, T, self.hidden) if self.return_sequences else (B, self.hidden)

    def config(self):
        return {"type": "LSTM", "n_in": self.n_in, "hidden": self.hidden, "return_sequences": self.return_sequences}


class Conv1D(Layer):
    """Valid, stride-1 cross-correlation over time followed by an activation.

    Kernels have shape ``(filters, in_channels, width)``.
    """

    weight_names = ("K",)

    def __init__(self, in_channels, filters, width=3, activation="relu", rng=None):
        super().__init__()
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_channels, self.filters, self.width, self.activation = in_channels, filters, width, activation
        self.params = {
            "K": glorot_uniform(rng, in_channels * width, filters * width, (filters, in_channels, width)),
            "b": np.zeros(filters),
        }

    def _patches(self, x):
        B, T, C = x.shape
        Tout = T - self.width + 1
        # patches[b, t, c, j] = x[b, t + j, c]
        s = x.strides
        view = np.lib.stride_tricks.as_strided(x, shape=(B, Tout, C, self.width), strides=(s[0], s[1], s[2], s[1]), writeable=False)
        return view.reshape(B, Tout, C * self.width)

    def forward(self, x, training=False, rng=None):
        if x.ndim != 3 or x.shape[-1] != self.in_channels:
            raise ShapeMismatch(f"Conv1D expects (B, T, {self.in_channels}), got {x.shape}")
        if x.shape[1] < self.width:
            raise SequenceTooShort(f"sequence length {x.shape[1]} is shorter than kernel width {self.width}")
        x = np.ascontiguousarray(x)
        P = self._patches(x)
        K2 = self.params["K"].reshape(self.filters, -1)
        z = P @ K2.T + self.params["b"]
        a = activate(self.activation, z)
        self._cache = (x.shape, P, z, a)
        return a

    def backward(self, grad):
        shape, P, z, a = self._cache
        B, T, C = shape
        dz = grad * activation_grad(self.activation, z, a)
        dz2 = dz.reshape(-1, self.filters)
        self.grads = {
            "K": (dz2.T @ P.reshape(-1, C * self.width)).reshape(self.params["K"].shape),
            "b": dz2.sum(axis=0),
        }
        dP = (dz @ self.params["K"].reshape(self.filters, -1)).reshape(B, -1, C, self.width)
        Tout = dP.shape[1]
        dx = np.zeros(shape, dP.dtype)
        for j in range(self.width):
            dx[:, j : j + Tout, :] += dP[:, :, :, j]
        return dx

    def output_shape(self, input_shape):
        B, T, _ = input_shape
        return (B, T - self.width + 1, self.filters)

    def config(self):
        return {"type": "Conv1D", "in_channels": self.in_channels, "filters": self.filters, "width": self.width, "activation": self.activation}


def dropout_apply(values, rate, mode="train", rng=None):
    """Inverted dropout: zero with probability ``rate`` and rescale survivors in train mode."""
    values = np.asarray(values)
    if values.dtype.kind != "f":
        values = values.astype(float)
    if mode == "eval" or rate == 0:
        return values, None
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must lie in [0, 1)")
    keep = ((rng.random(values.shape) >= rate) / (1.0 - rate)).astype(values.dtype)
    return values * keep, keep


class Dropout(Layer):
    def __init__(self, rate):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError("dropout rate must lie in [0, 1)")
        self.rate = rate

    def forward(self, x, training=False, rng=None):
        out, self._mask = dropout_apply(x, self.rate, "train" if training else "eval", rng)
        return out

    def backward(self, grad):
        return grad if self._mask is None else grad * self._mask

    def config(self):
        return {"type": "Dropout", "rate": self.rate}


class Flatten(Layer):
    def forward(self, x, training=False, rng=None):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._shape)

    def output_shape(self, input_shape):
        return (input_shape[0], int(np.prod(input_shape[1:])))


class LastStep(Layer):
    """Keep only the final timestep: ``(B, T, C) -> (B, C)``."""

    def forward(self, x, training=False, rng=None):
        self._shape = x.shape
        return x[:, -1, :]

    def backward(self, grad):
        dx = np.zeros(self._shape, grad.dtype)
        dx[:, -1, :] = grad
        return dx

    def output_shape(self, input_shape):
        return (input_shape[0], input_shape[2])


class MeanPool(Layer):
    """Average over time: ``(B, T, C) -> (B, C)``."""

    def forward(self, x, training=False, rng=None):
        self._shape = x.shape
        return x.mean(axis=1)

    def backward(self, grad):
        T = self._shape[1]
        return np.repeat(grad[:, None, :] / T, T, axis=1)

    def output_shape(self, input_shape):
        return (input_shape[0], input_shape[2])


class RepeatOnce(Layer):
    """Lift a state vector to a length-1 sequence: ``(B, C) -> (B, 1, C)``."""

    def forward(self, x, training=False, rng=None):
        return x[:, None, :]

    def backward(self, grad):
        return grad[:, 0, :]

    def output_shape(self, input_shape):
        return (input_shape[0], 1, input_shape[1])

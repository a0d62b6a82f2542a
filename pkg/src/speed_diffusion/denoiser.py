"""A small numpy MLP noise predictor with hand-written backprop, Adam and EMA.

Parameters live in a plain ``dict`` mapping ``"W0", "b0", "W1", ...`` to
float64 arrays so they serialize directly into checkpoints.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .errors import InvalidParameterError, NonFiniteGradientError

DEFAULT_EMBED_DIM = 32
DEFAULT_HIDDEN = (128, 128)
ACTIVATIONS = ("relu", "silu")


def default_layer_dims(embed_dim: int = DEFAULT_EMBED_DIM, hidden=DEFAULT_HIDDEN) -> list[int]:
    return [2 + embed_dim, *hidden, 2]


@dataclasses.dataclass
class DenoiserParams:
    layer_dims: list[int]
    tensors: dict[str, np.ndarray]
    activation: str = "silu"

    @property
    def n_layers(self) -> int:
        return len(self.layer_dims) - 1

    @property
    def embed_dim(self) -> int:
        return self.layer_dims[0] - 2

    def copy(self) -> "DenoiserParams":
        return DenoiserParams(
            list(self.layer_dims), {k: v.copy() for k, v in self.tensors.items()}, self.activation
        )


def _check_dims(layer_dims) -> None:
    if len(layer_dims) < 2 or any(int(d) != d or d < 1 for d in layer_dims):
        raise InvalidParameterError(f"invalid layer dims {layer_dims}")
    if layer_dims[-1] != 2 or layer_dims[0] < 2 or (layer_dims[0] - 2) % 2:
        raise InvalidParameterError(
            f"layer dims must start at 2 + even embed dim and end at 2, got {layer_dims}"
        )


def init_params(layer_dims, seed: int, activation: str = "silu", zero_last: bool = False) -> DenoiserParams:
    """Uniform fan-in initialization, ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``."""
    layer_dims = [int(d) for d in layer_dims]
    _check_dims(layer_dims)
    if activation not in ACTIVATIONS:
        raise InvalidParameterError(f"unknown activation {activation!r}")
    rng = np.random.default_rng(seed)
    tensors = {}
    for i, (fan_in, fan_out) in enumerate(zip(layer_dims[:-1], layer_dims[1:])):
        bound = 1.0 / math.sqrt(fan_in)
        tensors[f"W{i}"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        tensors[f"b{i}"] = rng.uniform(-bound, bound, size=fan_out)
    if zero_last:
        last = len(layer_dims) - 2
        tensors[f"W{last}"][:] = 0.0
        tensors[f"b{last}"][:] = 0.0
    return DenoiserParams(layer_dims, tensors, activation)


def time_embed(t, T: int, dim: int) -> np.ndarray:
    """Sinusoidal features of ``t / T``.

    Frequencies are spaced geometrically from 1 to ``T`` so the fastest
    pair still separates neighbouring integer steps. Returns shape
    ``(..., dim)`` laid out as ``[sin..., cos...]``.
    """
    if dim % 2 or dim < 2:
        raise InvalidParameterError(f"time embedding dim must be even and >= 2, got {dim}")
    half = dim // 2
    freqs = np.exp(np.linspace(0.0, math.log(T), half)) if half > 1 else np.ones(1)
    angle = (np.asarray(t, dtype=np.float64) / T)[..., None] * freqs
    return np.concatenate([np.sin(angle), np.cos(angle)], axis=-1)


def _sigmoid(z):
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _act(z, kind):
    if kind == "relu":
        return np.maximum(z, 0.0)
    return z * _sigmoid(z)


def _act_grad(z, kind):
    if kind == "relu":
        return (z > 0.0).astype(z.dtype)
    s = _sigmoid(z)
    return s * (1.0 + z * (1.0 - s))


def forward(params: DenoiserParams, x_t, t_embed):
    """Predict noise for a batch.

    Returns ``(prediction, cache)`` where ``cache`` feeds :func:`backward`.
    """
    h = np.concatenate([np.atleast_2d(x_t), np.atleast_2d(t_embed)], axis=-1)
    if h.shape[-1] != params.layer_dims[0]:
        raise InvalidParameterError(
            f"input width {h.shape[-1]} does not match layer dims {params.layer_dims}"
        )
    inputs, pre = [], []
    last = params.n_layers - 1
    for i in range(params.n_layers):
        inputs.append(h)
        z = h @ params.tensors[f"W{i}"] + params.tensors[f"b{i}"]
        pre.append(z)
        h = z if i == last else _act(z, params.activation)
    return h, (inputs, pre)


def backward(params: DenoiserParams, cache, loss_grad) -> dict[str, np.ndarray]:
    """Gradients of the loss w.r.t. every tensor, given ``dL/d(prediction)``."""
    inputs, pre = cache
    g = np.atleast_2d(np.asarray(loss_grad, dtype=np.float64))
    if g.shape != pre[-1].shape:
        raise InvalidParameterError(f"loss grad shape {g.shape} != output shape {pre[-1].shape}")
    grads = {}
    for i in reversed(range(params.n_layers)):
        grads[f"W{i}"] = inputs[i].T @ g
        grads[f"b{i}"] = g.sum(axis=0)
        if i:
            g = (g @ params.tensors[f"W{i}"].T) * _act_grad(pre[i - 1], params.activation)
    return grads


def predict(params: DenoiserParams, x_t, t, T: int) -> np.ndarray:
    """Noise prediction at integer step(s) ``t``; no cache kept."""
    x_t = np.atleast_2d(x_t)
    t = np.broadcast_to(np.asarray(t), (x_t.shape[0],))
    out, _ = forward(params, x_t, time_embed(t, T, params.embed_dim))
    return out


def weighted_loss(params: DenoiserParams, x_t, t_embed, eps, w):
    """Mean over the batch of ``w_i * |eps_i - pred_i|^2`` and its gradients.

    Returns ``(loss, per_element, grads)`` where ``per_element`` is the
    unweighted squared error of each row.
    """
    pred, cache = forward(params, x_t, t_embed)
    resid = pred - eps
    per_element = np.sum(resid**2, axis=-1)
    w = np.asarray(w, dtype=np.float64)
    n = resid.shape[0]
    loss = float(np.mean(w * per_element))
    grad_out = (2.0 / n) * np.reshape(w, (-1, 1)) * resid if w.ndim else (2.0 * w / n) * resid
    return loss, per_element, backward(params, cache, grad_out)


@dataclasses.dataclass
class OptimizerState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    lr: float = 1e-4
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8


def init_adam(params: DenoiserParams, lr: float = 1e-4, betas=(0.9, 0.999), eps: float = 1e-8) -> OptimizerState:
    zeros = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    return OptimizerState(zeros, {k: np.zeros_like(v) for k, v in params.tensors.items()}, 0, lr, tuple(betas), eps)


def adam_step(params: DenoiserParams, grads: dict[str, np.ndarray], opt: OptimizerState):
    """Bias-corrected Adam update, applied in place.

    Raises:
        NonFiniteGradientError: before touching any state, if a gradient
            contains NaN or inf.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(
                f"non-finite gradient in {name} at optimizer step {opt.step + 1}"
            )
    b1, b2 = opt.betas
    opt.step += 1
    c1 = 1.0 - b1**opt.step
    c2 = 1.0 - b2**opt.step
    for name, g in grads.items():
        m = opt.m[name]
        v = opt.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        params.tensors[name] -= opt.lr * (m / c1) / (np.sqrt(v / c2) + opt.eps)
    return params, opt


@dataclasses.dataclass
class EmaState:
    shadow: dict[str, np.ndarray]
    decay: float = 0.999

    def as_params(self, like: DenoiserParams) -> DenoiserParams:
        return DenoiserParams(
            list(like.layer_dims), {k: v.copy() for k, v in self.shadow.items()}, like.activation
        )


def init_ema(params: DenoiserParams, decay: float = 0.999) -> EmaState:
    if not 0.0 <= decay <= 1.0:
        raise InvalidParameterError(f"EMA decay must lie in [0, 1], got {decay}")
    return EmaState({k: v.copy() for k, v in params.tensors.items()}, decay)


def ema_update(ema: EmaState, params: DenoiserParams) -> EmaState:
    for name, p in params.tensors.items():
        s = ema.shadow[name]
        if s.shape != p.shape:
            raise InvalidParameterError(f"EMA shape mismatch for {name}: {s.shape} vs {p.shape}")
        s *= ema.decay
        s += (1.0 - ema.decay) * p
    return ema

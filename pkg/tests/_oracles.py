"""Independent reference computations shared by several test modules."""

import numpy as np

from speed_diffusion.denoiser import forward, init_params, time_embed


def loss_value(params, x_t, emb, eps, w):
    pred, _ = forward(params, x_t, emb)
    return float(np.mean(np.asarray(w) * np.sum((pred - eps) ** 2, axis=1)))


def finite_difference_grads(params, x_t, emb, eps, w, h=1e-5):
    """Central differences of the weighted loss w.r.t. every scalar parameter."""
    grads = {}
    for name, tensor in params.tensors.items():
        g = np.zeros_like(tensor)
        flat, gflat = tensor.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_value(params, x_t, emb, eps, w)
            flat[i] = orig - h
            down = loss_value(params, x_t, emb, eps, w)
            flat[i] = orig
            gflat[i] = (up - down) / (2 * h)
        grads[name] = g
    return grads


def max_relative_error(analytic, numeric, floor=1e-6):
    worst = 0.0
    for name in analytic:
        a, n = analytic[name], numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def random_instance(seed, activation="silu"):
    """A small random network and batch for gradient checks."""
    rng = np.random.default_rng(seed)
    embed = int(rng.choice([2, 4, 6]))
    hidden = [int(h) for h in rng.integers(3, 9, size=rng.integers(1, 3))]
    params = init_params([2 + embed, *hidden, 2], seed, activation)
    n = int(rng.integers(1, 6))
    x_t = rng.standard_normal((n, 2))
    t = rng.integers(1, 1001, size=n)
    emb = time_embed(t, 1000, embed)
    eps = rng.standard_normal((n, 2))
    w = rng.uniform(0.2, 1.5, size=n)
    return params, x_t, emb, eps, w

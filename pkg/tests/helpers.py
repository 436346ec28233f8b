"""Finite-difference oracle shared by the gradient tests."""

import numpy as np

from batchuni.nn_core import AeModel, LayerSpec, glorot_init


def numeric_grad(loss_fn, model: AeModel, step: float = 1e-5) -> list[np.ndarray]:
    """Central differences of ``loss_fn(model)`` for every parameter entry."""
    out = []
    for p in model.params():
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss_fn(model)
            flat[i] = orig - step
            down = loss_fn(model)
            flat[i] = orig
            gflat[i] = (up - down) / (2 * step)
        out.append(g)
    return out


def assert_grads_close(analytic, numeric, rtol=1e-4, atol=1e-8):
    for a, n in zip(analytic, numeric):
        err = np.abs(a - n)
        bound = rtol * np.maximum(np.abs(a), np.abs(n)) + atol
        assert np.all(err <= bound), f"max violation {np.max(err - bound):.3e}"


def max_rel_error(analytic, numeric, rtol=1e-4, atol=1e-8) -> float:
    """Worst |a - n| / max(|a|, |n|, atol / rtol); the check passes when this
    is at most ``rtol``."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        scale = np.maximum(np.maximum(np.abs(a), np.abs(n)), atol / rtol)
        worst = max(worst, float(np.max(np.abs(a - n) / scale)))
    return worst


def random_small_model(rng: np.random.Generator, activation: str = "sigmoid") -> AeModel:
    """A random autoencoder with input dim <= 8 and 1-3 hidden layers."""
    d = int(rng.integers(1, 9))
    n_hidden = int(rng.integers(1, 4))
    dims = [d] + [int(rng.integers(1, 7)) for _ in range(n_hidden)] + [d]
    specs = [
        LayerSpec(dims[k], dims[k + 1], activation if k < len(dims) - 2 else "identity")
        for k in range(len(dims) - 1)
    ]
    model = glorot_init(specs, int(rng.integers(1 << 30)), n_encoder=max(1, len(specs) // 2))
    for b in model.biases:
        b[:] = rng.normal(scale=0.3, size=b.shape)
    return model

"""Dense autoencoder with handwritten forward/backward passes.

All arrays are float64. Weight matrices have shape ``(out_dim, in_dim)`` and a
batch of inputs has shape ``(n_samples, dim)``; a 1-D input is treated as a
batch of one and the output is squeezed back.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ACTIVATIONS = ("sigmoid", "relu", "identity")


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str = "identity"

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError(f"layer dims must be positive, got {self.in_dim}->{self.out_dim}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class AeModel:
    """Encoder and decoder layers with their parameters.

    ``weights[k]`` and ``biases[k]`` belong to ``specs[k]``; the first
    ``n_encoder`` layers form the encoder.
    """

    specs: list[LayerSpec]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    n_encoder: int

    def __post_init__(self):
        check_chain(self.specs, self.n_encoder)
        if len(self.weights) != len(self.specs) or len(self.biases) != len(self.specs):
            raise ValueError("one weight matrix and one bias vector required per layer")
        for s, w, b in zip(self.specs, self.weights, self.biases):
            if w.shape != (s.out_dim, s.in_dim) or b.shape != (s.out_dim,):
                raise ValueError(f"parameter shapes {w.shape}, {b.shape} do not match {s}")

    @property
    def input_dim(self) -> int:
        return self.specs[0].in_dim

    @property
    def latent_dim(self) -> int:
        return self.specs[self.n_encoder - 1].out_dim

    @property
    def encoder_layers(self) -> list[LayerSpec]:
        return self.specs[: self.n_encoder]

    @property
    def decoder_layers(self) -> list[LayerSpec]:
        return self.specs[self.n_encoder :]

    def params(self) -> list[np.ndarray]:
        """Parameter arrays in the canonical order W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "AeModel":
        return AeModel(
            list(self.specs),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.n_encoder,
        )


@dataclass
class GradientSet:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def arrays(self) -> list[np.ndarray]:
        """Gradients in the same order as :meth:`AeModel.params`."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out


@dataclass
class ForwardCache:
    inputs: np.ndarray
    # pre[k], post[k]: pre-activation and activation output of layer k
    pre: list[np.ndarray] = field(default_factory=list)
    post: list[np.ndarray] = field(default_factory=list)
    squeezed: bool = False


def check_chain(specs: list[LayerSpec], n_encoder: int) -> None:
    if not specs:
        raise ValueError("at least one layer required")
    if not 1 <= n_encoder <= len(specs):
        raise ValueError(f"n_encoder={n_encoder} out of range for {len(specs)} layers")
    for k in range(len(specs) - 1):
        if specs[k].out_dim != specs[k + 1].in_dim:
            raise ValueError(
                f"dimension chain broken between layer {k} ({specs[k].out_dim}) "
                f"and layer {k + 1} ({specs[k + 1].in_dim})"
            )
    if specs[0].in_dim != specs[-1].out_dim:
        raise ValueError("autoencoder input and output dims differ")


def mlp_specs(
    dims: list[int], hidden_activation: str, n_encoder: int | None = None
) -> tuple[list[LayerSpec], int]:
    """Layer specs for ``dims[0] -> dims[1] -> ... -> dims[-1]``.

    Every layer uses ``hidden_activation`` except the last, which is linear.
    ``n_encoder`` defaults to half the layers.
    """
    n_layers = len(dims) - 1
    specs = [
        LayerSpec(dims[k], dims[k + 1], hidden_activation if k < n_layers - 1 else "identity")
        for k in range(n_layers)
    ]
    return specs, n_encoder if n_encoder is not None else n_layers // 2


def fcn_ae_specs(
    input_dim: int, n_hidden: int, units: int, latent: int, activation: str = "relu"
) -> tuple[list[LayerSpec], int]:
    """Encoder ``D -> U -> (H x U) -> Z`` mirrored by the decoder."""
    enc = [input_dim] + [units] * (n_hidden + 1) + [latent]
    dims = enc + enc[-2::-1]
    return mlp_specs(dims, activation, n_encoder=len(enc) - 1)


def glorot_init(specs: list[LayerSpec], seed: int, n_encoder: int | None = None) -> AeModel:
    if n_encoder is None:
        n_encoder = len(specs) // 2
    check_chain(specs, n_encoder)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for s in specs:
        bound = np.sqrt(6.0 / (s.in_dim + s.out_dim))
        weights.append(rng.uniform(-bound, bound, size=(s.out_dim, s.in_dim)))
        biases.append(np.zeros(s.out_dim))
    return AeModel(list(specs), weights, biases, n_encoder)


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "sigmoid":
        # split form avoids overflow in exp for large |z|
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    if name == "relu":
        return np.maximum(z, 0.0)
    return z


def _act_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "relu":
        return (z > 0).astype(z.dtype)
    return np.ones_like(z)


def _as_batch(model: AeModel, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    squeezed = x.ndim == 1
    if squeezed:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ValueError(f"expected input dim {model.input_dim}, got shape {x.shape}")
    return x, squeezed


def forward(model: AeModel, x) -> tuple[np.ndarray, ForwardCache]:
    h, squeezed = _as_batch(model, x)
    cache = ForwardCache(inputs=h, squeezed=squeezed)
    for s, w, b in zip(model.specs, model.weights, model.biases):
        z = h @ w.T + b
        h = _act(s.activation, z)
        cache.pre.append(z)
        cache.post.append(h)
    return (h[0] if squeezed else h), cache


def reconstruct(model: AeModel, x) -> np.ndarray:
    return forward(model, x)[0]


def backward(model: AeModel, cache: ForwardCache, upstream_grad) -> GradientSet:
    """Parameter gradients given d(loss)/d(reconstruction).

    ``upstream_grad`` has the shape of the reconstruction returned by
    :func:`forward`; contributions are summed over the batch.
    """
    g = np.asarray(upstream_grad, dtype=np.float64)
    if cache.squeezed:
        g = g[None, :]
    if len(cache.pre) != len(model.specs) or g.shape != cache.post[-1].shape:
        raise ValueError("cache or upstream gradient does not match the model")
    n = len(model.specs)
    dw: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    db: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    for k in range(n - 1, -1, -1):
        s = model.specs[k]
        dz = g * _act_grad(s.activation, cache.pre[k], cache.post[k])
        h_in = cache.post[k - 1] if k > 0 else cache.inputs
        dw[k] = dz.T @ h_in
        db[k] = dz.sum(axis=0)
        if k > 0:
            g = dz @ model.weights[k]
    return GradientSet(dw, db)


# ---------------------------------------------------------------------------
# Serialization
#
# model.bin layout, all little-endian:
#   magic     4 bytes  b"BUAE"
#   version   uint32   (currently 1)
#   n_layers  uint32
#   n_encoder uint32
#   per layer: in_dim uint32, out_dim uint32, activation uint32
#              (0 = sigmoid, 1 = relu, 2 = identity)
#   per layer, in order: weight (out_dim x in_dim, row-major float64),
#              then bias (out_dim float64)
# ---------------------------------------------------------------------------

MAGIC = b"BUAE"
FORMAT_VERSION = 1


def model_to_bytes(model: AeModel) -> bytes:
    parts = [MAGIC, struct.pack("<III", FORMAT_VERSION, len(model.specs), model.n_encoder)]
    for s in model.specs:
        parts.append(struct.pack("<III", s.in_dim, s.out_dim, ACTIVATIONS.index(s.activation)))
    for w, b in zip(model.weights, model.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return b"".join(parts)


def model_from_bytes(data: bytes) -> AeModel:
    if data[:4] != MAGIC:
        raise ValueError("not a serialized autoencoder (bad magic)")
    version, n_layers, n_encoder = struct.unpack_from("<III", data, 4)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version}")
    off = 16
    specs = []
    for _ in range(n_layers):
        i, o, a = struct.unpack_from("<III", data, off)
        off += 12
        specs.append(LayerSpec(i, o, ACTIVATIONS[a]))
    weights, biases = [], []
    for s in specs:
        nw = s.in_dim * s.out_dim
        weights.append(np.frombuffer(data, "<f8", nw, off).reshape(s.out_dim, s.in_dim).astype(np.float64))
        off += 8 * nw
        biases.append(np.frombuffer(data, "<f8", s.out_dim, off).astype(np.float64))
        off += 8 * s.out_dim
    if off != len(data):
        raise ValueError("trailing bytes after model parameters")
    return AeModel(specs, weights, biases, n_encoder)


def save_model(model: AeModel, path) -> None:
    Path(path).write_bytes(model_to_bytes(model))


def load_model(path) -> AeModel:
    return model_from_bytes(Path(path).read_bytes())

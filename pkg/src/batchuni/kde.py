"""Mini-batch Gaussian KDE and inverse-density sample weights."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class KdeConfig:
    """``band_width`` multiplies the squared distance inside the exponent,
    so larger values give a narrower kernel."""

    band_width: float
    weight_floor: float = 1e-6
    normalize_batch: bool = False

    def __post_init__(self):
        if self.band_width <= 0:
            raise ValueError("band_width must be positive")
        if self.weight_floor <= 0:
            raise ValueError("weight_floor must be positive")


@dataclass
class WeightVector:
    weights: np.ndarray
    densities: np.ndarray


def batch_normalize(batch) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Standardize each dimension to mean 0, population variance 1.

    Dimensions with zero variance are only centered.
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise ValueError("batch normalization needs at least two samples")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return (x - mean) / std, mean, std


def _sq_dists(x: np.ndarray) -> np.ndarray:
    # shifting by one sample keeps identical rows at exactly zero distance
    x = x - x[0]
    sq =np.einsum("ij,ij->i", x, x)
    d = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.fill_diagonal(d, 0.0)
    return np.maximum(d, 0.0)


def kde_density(batch, band_width: float) -> np.ndarray:
    """K(x_i) = mean_j exp(-band_width * |x_i - x_j|^2), self term included."""
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    return np.exp(-band_width * _sq_dists(x)).mean(axis=1)


def kde_weights(batch, cfg: KdeConfig) -> WeightVector:
    x = np.asarray(batch, dtype=np.float64)
    if cfg.normalize_batch and len(x) >= 2:
        x = batch_normalize(x)[0]
    k = kde_density(x, cfg.band_width)
    return WeightVector(weights=1.0 / (k + cfg.weight_floor), densities=k)

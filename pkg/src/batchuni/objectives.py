"""Training costs: plain reconstruction (RE), simplified Neyman-Pearson (SNP)
and batch uniformization (BU), plus the reconstruction-error score.

Every loss function returns a :class:`LossReport` and, when asked, the exact
parameter gradient. KDE weights depend only on the inputs and are treated as
constants when differentiating.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kde import KdeConfig, kde_weights
from .nn_core import AeModel, GradientSet, backward, forward

OBJECTIVES = ("RE", "SNP", "BU")


@dataclass(frozen=True)
class ObjectiveConfig:
    kind: str = "RE"
    clip: float = 4.0
    kde: KdeConfig | None = None

    def __post_init__(self):
        if self.kind not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.kind!r}")
        if self.kind in ("SNP", "BU") and not self.clip > 0:
            raise ValueError("clip must be positive for SNP and BU")
        if self.kind == "BU" and self.kde is None:
            raise ValueError("BU needs a KdeConfig")


@dataclass
class LossReport:
    total: float
    normal_term: float
    anomaly_term: float
    scores: np.ndarray
    weights: np.ndarray
    anomaly_scores: np.ndarray = field(default_factory=lambda: np.zeros(0))
    grads: GradientSet | None = None


def _batch(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if len(x) == 0:
        raise ValueError("empty batch")
    return x


def anomaly_score(model: AeModel, x) -> np.ndarray | float:
    """Squared reconstruction error, per sample for a batch."""
    recon, cache = forward(model, x)
    r = np.asarray(x, dtype=np.float64) - recon
    if r.ndim == 1:
        return float(r @ r)
    return np.einsum("ij,ij->i", r, r)


def _scores_and_residuals(model, x):
    recon, cache = forward(model, x)
    resid = recon - x
    return np.einsum("ij,ij->i", resid, resid), resid, cache


def _add(a: GradientSet, b: GradientSet, sign: float = 1.0) -> GradientSet:
    return GradientSet(
        [wa + sign * wb for wa, wb in zip(a.weights, b.weights)],
        [ba + sign * bb for ba, bb in zip(a.biases, b.biases)],
    )


def _weighted_normal_term(model, x, coef, with_grad):
    """sum_i coef_i * A(x_i) with coef summing to one."""
    scores, resid, cache = _scores_and_residuals(model, x)
    value = float(coef @ scores)
    grads = backward(model, cache, 2.0 * coef[:, None] * resid) if with_grad else None
    return value, scores, grads


def _clipped_anomaly_term(model, xa, clip, with_grad):
    scores, resid, cache = _scores_and_residuals(model, xa)
    # clip * mean(tanh) keeps the value <= clip under rounding
    value = float(clip * np.mean(np.tanh(scores / clip)))
    grads = None
    if with_grad:
        # d/dA [clip * tanh(A / clip)] = sech^2(A / clip)
        dl_da = 1.0 / np.cosh(np.minimum(scores / clip, 350.0)) ** 2 / len(scores)
        grads = backward(model, cache, 2.0 * dl_da[:, None] * resid)
    return value, scores, grads


def loss_la(model: AeModel, anomaly_batch, clip: float) -> float:
    """Mean of ``clip * tanh(A / clip)`` over the anomaly batch; in [0, clip]."""
    return _clipped_anomaly_term(model, _batch(anomaly_batch), clip, False)[0]


def loss_re(model: AeModel, normal_batch, with_grad: bool = False) -> LossReport:
    x = _batch(normal_batch)
    coef = np.full(len(x), 1.0 / len(x))
    value, scores, grads = _weighted_normal_term(model, x, coef, with_grad)
    return LossReport(value, value, 0.0, scores, np.ones(len(x)), grads=grads)


def _with_anomaly_term(model, x, coef, weights, anomaly_batch, clip, with_grad):
    xa = _batch(anomaly_batch)
    normal, scores, g_n = _weighted_normal_term(model, x, coef, with_grad)
    la, a_scores, g_a = _clipped_anomaly_term(model, xa, clip, with_grad)
    grads = _add(g_n, g_a, -1.0) if with_grad else None
    return LossReport(normal - la, normal, la, scores, weights, a_scores, grads)


def loss_snp(model: AeModel, normal_batch, anomaly_batch, clip: float, with_grad: bool = False) -> LossReport:
    x = _batch(normal_batch)
    coef = np.full(len(x), 1.0 / len(x))
    return _with_anomaly_term(model, x, coef, np.ones(len(x)), anomaly_batch, clip, with_grad)


def loss_bu(
    model: AeModel,
    normal_batch,
    anomaly_batch,
    cfg: ObjectiveConfig,
    with_grad: bool = False,
    weights: np.ndarray | None = None,
) -> LossReport:
    """Inverse-density weighted reconstruction error minus the clipped
    anomaly term. ``weights`` overrides the KDE weights (any positive
    scale; they are self-normalized)."""
    x = _batch(normal_batch)
    if weights is None:
        weights = kde_weights(x, cfg.kde).weights
    weights = np.asarray(weights, dtype=np.float64)
    coef = weights / weights.sum()
    return _with_anomaly_term(model, x, coef, weights, anomaly_batch, cfg.clip, with_grad)


def evaluate_loss(model: AeModel, cfg: ObjectiveConfig, normal_batch, anomaly_batch=None, with_grad: bool = False) -> LossReport:
    if cfg.kind == "RE":
        return loss_re(model, normal_batch, with_grad)
    if anomaly_batch is None:
        raise ValueError(f"{cfg.kind} needs an anomaly batch")
    if cfg.kind == "SNP":
        return loss_snp(model, normal_batch, anomaly_batch, cfg.clip, with_grad)
    return loss_bu(model, normal_batch, anomaly_batch, cfg, with_grad)

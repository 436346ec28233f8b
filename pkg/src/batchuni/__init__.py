"""Batch-uniformization training for autoencoder anomaly detectors."""

from .evaluation import EvalGrid, auc, decide, grid_kld, grid_pdf, oracle_density
from .kde import KdeConfig, batch_normalize, kde_density, kde_weights
from .nn_core import AeModel, LayerSpec, backward, forward, glorot_init
from .objectives import ObjectiveConfig, anomaly_score, loss_bu, loss_la, loss_re, loss_snp
from .optim import AmsGradState, ConstantLR, WarmThenLinear, amsgrad_step, lr_at

__version__ = "0.1.0"

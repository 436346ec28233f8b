"""Mini-batch training loop shared by the experiments."""

from __future__ import annotations

from collections.abc import Callable, Iterator
from dataclasses import dataclass, field

import numpy as np

from .nn_core import AeModel
from .objectives import LossReport, ObjectiveConfig, evaluate_loss
from .optim import AmsGradState, ConstantLR, LrSchedule, amsgrad_step, lr_at


@dataclass
class LossRecord:
    update: int
    epoch: int
    lr: float
    total: float
    normal_term: float
    anomaly_term: float


@dataclass
class TrainHistory:
    records: list[LossRecord] = field(default_factory=list)


def shuffled_batches(data: np.ndarray, batch_size: int, rng: np.random.Generator) -> Iterator[np.ndarray]:
    """Endless stream of batches; reshuffles after each pass, drops remainders."""
    n = len(data)
    if batch_size > n:
        raise ValueError(f"batch size {batch_size} exceeds {n} samples")
    while True:
        perm = rng.permutation(n)
        for start in range(0, n - batch_size + 1, batch_size):
            yield data[perm[start : start + batch_size]]


def train(
    model: AeModel,
    objective: ObjectiveConfig,
    next_batch: Callable[[], tuple[np.ndarray, np.ndarray | None]],
    n_updates: int,
    schedule: LrSchedule = ConstantLR(1e-3),
    updates_per_epoch: int = 1,
    optimizer: AmsGradState | None = None,
    on_step: Callable[[int, LossReport], None] | None = None,
) -> TrainHistory:
    """Run ``n_updates`` AMSGrad steps in place on ``model``.

    ``next_batch`` returns ``(normal_batch, anomaly_batch)``; the anomaly
    batch may be None for RE. The learning rate is looked up once per epoch.
    """
    params = model.params()
    state = optimizer or AmsGradState.for_params(params)
    history = TrainHistory()
    for step in range(n_updates):
        epoch = step // updates_per_epoch
        lr = lr_at(schedule, epoch)
        normal, anomaly = next_batch()
        report = evaluate_loss(model, objective, normal, anomaly, with_grad=True)
        amsgrad_step(state, params, report.grads.arrays(), lr=lr)
        history.records.append(
            LossRecord(step, epoch, lr, report.total, report.normal_term, report.anomaly_term)
        )
        if on_step is not None:
            on_step(step, report)
    return history

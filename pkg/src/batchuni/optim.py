"""AMSGrad and the learning-rate schedules used by the experiments."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AmsGradState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    delta: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    v_hat: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[np.ndarray], **hyper) -> "AmsGradState":
        state = cls(**hyper)
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
        state.v_hat = [np.zeros_like(p) for p in params]
        return state


def amsgrad_step(
    state: AmsGradState, params: list[np.ndarray], grads: list[np.ndarray], lr: float | None = None
) -> None:
    """One in-place AMSGrad update of ``params``.

    The first moment is bias corrected; the running maximum of the second
    moment is used uncorrected. ``lr`` overrides ``state.lr`` for this step
    (used by schedules).
    """
    if not (len(params) == len(grads) == len(state.m)):
        raise ValueError("parameter, gradient and state lists differ in length")
    for p, g, m in zip(params, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError(f"shape mismatch: param {p.shape}, grad {g.shape}, state {m.shape}")
    step = state.lr if lr is None else lr
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    corr = 1.0 - b1**state.t
    for p, g, m, v, vh in zip(params, grads, state.m, state.v, state.v_hat):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        np.maximum(vh, v, out=vh)
        p -= step * (m / corr) / (np.sqrt(vh) + state.delta)


@dataclass(frozen=True)
class ConstantLR:
    rate: float

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("learning rate must be positive")


@dataclass(frozen=True)
class WarmThenLinear:
    """Hold ``base_rate`` until ``hold_epochs``, then decay linearly to
    ``base_rate / final_divisor`` at ``end_epoch`` and stay there."""

    base_rate: float
    hold_epochs: int
    end_epoch: int
    final_divisor: float

    def __post_init__(self):
        if self.base_rate <= 0 or self.final_divisor <= 0:
            raise ValueError("rates must be positive")
        if not self.hold_epochs < self.end_epoch:
            raise ValueError("hold_epochs must be smaller than end_epoch")


LrSchedule = ConstantLR | WarmThenLinear


def lr_at(schedule: LrSchedule, epoch: int) -> float:
    if isinstance(schedule, ConstantLR):
        return schedule.rate
    base = schedule.base_rate
    final = base / schedule.final_divisor
    if epoch < schedule.hold_epochs:
        return base
    if epoch >= schedule.end_epoch:
        return final
    frac = (epoch - schedule.hold_epochs) / (schedule.end_epoch - schedule.hold_epochs)
    return base + frac * (final - base)

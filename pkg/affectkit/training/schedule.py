"""
Learning Rate Schedules

Constant rate, or cosine annealing with warm restarts: within a cycle of
length T_i epochs the rate falls from eta_max to eta_min along half a cosine,
then restarts with T_i multiplied by T_mult.
"""

import math
from typing import Tuple

from ..errors import ContractError


def cosine_annealing_lr(t_cur: float, t_i: float, eta_max: float, eta_min: float) -> float:
    """eta_min + (eta_max - eta_min) * (1 + cos(pi * t_cur / t_i)) / 2."""
    return eta_min + 0.5 * (eta_max - eta_min) * (1.0 + math.cos(math.pi * t_cur / t_i))


def restart_position(epoch_progress: float, t0: float, t_mult: float) -> Tuple[float, float]:
    """(T_cur, T_i) for a fractional epoch count since the start of training."""
    if t0 < 1 or t_mult < 1:
        raise ContractError("Warm restarts need T_0 >= 1 and T_mult >= 1",
                            {'t0': t0, 't_mult': t_mult})
    if epoch_progress < 0:
        raise ContractError("Epoch progress must be non-negative", {'progress': epoch_progress})
    if t_mult == 1:
        return math.fmod(epoch_progress, t0), float(t0)
    cycle = int(math.floor(math.log(epoch_progress / t0 * (t_mult - 1) + 1, t_mult)))
    t_i = t0 * t_mult ** cycle
    t_cur = epoch_progress - t0 * (t_mult ** cycle - 1) / (t_mult - 1)
    if t_cur >= t_i:
        # log rounding at an exact cycle boundary
        t_cur, t_i = t_cur - t_i, t_i * t_mult
    return t_cur, float(t_i)


def cosine_warm_restart_lr(epoch_progress: float, t0: float, t_mult: float,
                           eta_max: float, eta_min: float) -> float:
    """Learning rate after ``epoch_progress`` epochs (fractional) of training."""
    t_cur, t_i = restart_position(epoch_progress, t0, t_mult)
    return cosine_annealing_lr(t_cur, t_i, eta_max, eta_min)


class LRSchedule:
    """Per-step learning rate for a run: epoch + step / steps_per_epoch progress."""

    def __init__(self, kind: str, lr: float, steps_per_epoch: int, t0: int = 5,
                 t_mult: int = 1, eta_min: float = 0.0):
        if kind not in ("constant", "cosine-warm-restarts"):
            raise ContractError(f"Unknown schedule: {kind}")
        self.kind = kind
        self.lr = lr
        self.steps_per_epoch = max(1, steps_per_epoch)
        self.t0 = t0
        self.t_mult = t_mult
        self.eta_min = eta_min

    @classmethod
    def from_config(cls, config, steps_per_epoch: int) -> "LRSchedule":
        return cls(config.schedule, config.lr, steps_per_epoch, config.t0, config.t_mult,
                   config.eta_min)

    def lr_at(self, epoch: int, step: int) -> float:
        if self.kind == "constant":
            return self.lr
        progress = epoch + step / self.steps_per_epoch
        return cosine_warm_restart_lr(progress, self.t0, self.t_mult, self.lr, self.eta_min)

"""
Adam and the warmup + cosine learning-rate schedule.
"""
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import torch

from src.errors import StepOutOfRange


@dataclass(frozen=True)
class LRSchedule:
    """Linear warmup from 0 to base_lr, then cosine decay to 0."""
    base_lr: float
    warmup_epochs: int
    total_epochs: int
    steps_per_epoch: int

    def __post_init__(self):
        if not 0 < self.warmup_epochs < self.total_epochs:
            raise ValueError(
                f"need 0 < warmup_epochs < total_epochs, got {self.warmup_epochs} / {self.total_epochs}"
            )
        if self.steps_per_epoch < 1:
            raise ValueError("steps_per_epoch must be >= 1")

    @property
    def warmup_steps(self) -> int:
        return self.warmup_epochs * self.steps_per_epoch

    @property
    def total_steps(self) -> int:
        return self.total_epochs * self.steps_per_epoch


def lr_at(schedule: LRSchedule, global_step: int) -> float:
    if not 0 <= global_step <= schedule.total_steps:
        raise StepOutOfRange(f"step {global_step} outside [0, {schedule.total_steps}]")
    if global_step < schedule.warmup_steps:
        return schedule.base_lr * global_step / schedule.warmup_steps
    progress = (global_step - schedule.warmup_steps) / (schedule.total_steps - schedule.warmup_steps)
    return schedule.base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def build_optimizer(
    parameters: Iterable[torch.nn.Parameter],
    lr: float = 3e-4,
    betas: Tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> torch.optim.Adam:
    """Adam with bias correction and no weight decay."""
    return torch.optim.Adam(parameters, lr=lr, betas=betas, eps=eps, weight_decay=0.0)


def adam_step(optimizer: torch.optim.Optimizer, lr: Optional[float] = None) -> None:
    """Apply one update with populated gradients, optionally overriding the lr."""
    if lr is not None:
        for group in optimizer.param_groups:
            group["lr"] = lr
    optimizer.step()

"""
AdamW and learning-rate schedules.

Weight decay is decoupled: parameters shrink by ``lr·weight_decay`` before
the Adam step, in that order.
"""

import numpy as np

from modules.adapters.models import Schedule


class AdamW:
    """AdamW over a dict of named numpy parameters, updated in place."""

    def __init__(self, weight_decay=0.0, betas=(0.9, 0.999), eps=1e-8):
        self.weight_decay = weight_decay
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.steps = 0
        self.first = {}
        self.second = {}

    def step(self, parameters, gradients, learning_rate):
        self.steps += 1
        correction1 = 1.0 - self.beta1**self.steps
        correction2 = 1.0 - self.beta2**self.steps
        for key, value in parameters.items():
            grad = gradients[key]
            first = self.first.get(key)
            if first is None:
                first = self.first[key] = np.zeros_like(value)
                self.second[key] = np.zeros_like(value)
            second = self.second[key]
            value *= 1.0 - learning_rate * self.weight_decay
            first *= self.beta1
            first += (1.0 - self.beta1) * grad
            second *= self.beta2
            second += (1.0 - self.beta2) * grad * grad
            denominator = np.sqrt(second / correction2) + self.eps
            value -= learning_rate * (first / correction1) / denominator


def learning_rate(schedule, base_rate, step, total_steps, warmup_steps):
    """Rate for optimizer step ``step`` (0-based)."""
    schedule = Schedule(schedule)
    if schedule is Schedule.CONSTANT:
        return base_rate
    if step < warmup_steps:
        return base_rate * step / max(1, warmup_steps)
    remaining = (total_steps - step) / max(1, total_steps - warmup_steps)
    return base_rate * max(0.0, remaining)

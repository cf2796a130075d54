"""AdamW with decoupled weight decay."""

from typing import Sequence

import numpy as np

from .tensor import Parameter


def adamw_step(
    params: Sequence[Parameter],
    lr: float,
    wd: float,
    betas: tuple[float, float],
    eps: float,
    t: int,
) -> None:
    """Apply one AdamW update in place.

    Weight decay shrinks the weights directly (w -= lr * wd * w) before the
    bias-corrected Adam step; it never enters the moment estimates. Gradients
    are left untouched; callers zero them.

    Args:
        params: Parameters with populated gradients
        lr: Learning rate
        wd: Decoupled weight decay coefficient
        betas: Exponential decay rates of the first and second moments
        eps: Denominator stabilizer
        t: 1-based step count used for bias correction
    """
    if t < 1:
        raise ValueError(f"AdamW step count must be >= 1, got {t}")
    beta1, beta2 = betas
    correction1 = 1.0 - beta1 ** t
    correction2 = 1.0 - beta2 ** t
    for p in params:
        w = p.tensor.data
        g = p.tensor.grad if p.tensor.grad is not None else np.zeros_like(w)
        if wd:
            w -= lr * wd * w
        p.m *= beta1
        p.m += (1.0 - beta1) * g
        p.v *= beta2
        p.v += (1.0 - beta2) * g * g
        m_hat = p.m / correction1
        v_hat = p.v / correction2
        w -= lr * m_hat / (np.sqrt(v_hat) + eps)


class AdamW:
    """Stateful wrapper that tracks the step count."""

    def __init__(self, params: Sequence[Parameter], lr: float = 5e-4, weight_decay: float = 1e-3,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.weight_decay = weight_decay
        self.betas = tuple(betas)
        self.eps = eps
        self.t = 0

    def step(self) -> None:
        self.t += 1
        adamw_step(self.params, self.lr, self.weight_decay, self.betas, self.eps, self.t)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

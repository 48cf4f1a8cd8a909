"""Adam optimizer with bias correction and a step-decay learning rate.

The update is θ ← θ − lr · m̂ / sqrt(v̂ + eps): epsilon is added inside the
square root, which is the variant whose first-step size for g=1, lr=1e-3 is
−9.99999995e-4. The learning rate is multiplied by ``decay_factor`` at the
end of every ``decay_every``-th epoch (``end_epoch``); over 50 epochs with
decay_every=10 that is five decay events.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor

__all__ = ["Adam"]


class Adam:
    """Holds per-parameter moment buffers and the step/lr state."""

    def __init__(self, params: list[Tensor], lr: float = 1e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 decay_factor: float = 0.5, decay_every: int = 10):
        if not (0.0 < beta1 < 1.0 and 0.0 < beta2 < 1.0):
            raise ValueError("beta1 and beta2 must be in (0, 1)")
        if decay_every < 1:
            raise ValueError("decay_every must be >= 1")
        self.params = list(params)
        self.lr = float(lr)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.decay_factor = float(decay_factor)
        self.decay_every = int(decay_every)
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        """One Adam update. Every parameter must carry a gradient; gradients
        are left untouched (caller resets them)."""
        for i, p in enumerate(self.params):
            if p.grad is None:
                raise RuntimeError(f"parameter {i} has no gradient; run backward first")
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for i, p in enumerate(self.params):
            g = p.grad
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[i] / bc1
            v_hat = self.v[i] / bc2
            p.data -= self.lr * m_hat / np.sqrt(v_hat + self.eps)

    def end_epoch(self, epoch: int) -> None:
        """Apply step decay after completing 1-based ``epoch``."""
        if epoch % self.decay_every == 0:
            self.lr *= self.decay_factor

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

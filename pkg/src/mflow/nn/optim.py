"""AdamW with decoupled weight decay, linear-warmup cosine schedule, and a
parameter EMA for evaluation."""

import numpy as np

from .tensor import Tensor

__all__ = ["AdamW", "cosine_warmup_lr", "Ema", "NonFiniteGradientError"]


class NonFiniteGradientError(RuntimeError):
    """A gradient contained NaN/inf; the optimizer step was aborted."""


def cosine_warmup_lr(step: int, peak: float, warmup_steps: int, total_steps: int) -> float:
    """Linear ramp 0 -> peak over `warmup_steps`, then cosine decay to 0 at
    `total_steps`. With `warmup_steps == 0` the schedule starts at peak."""
    if step < 0 or step > total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    if warmup_steps > 0 and step <= warmup_steps:
        return peak * step / warmup_steps
    span = max(total_steps - warmup_steps, 1)
    frac = (step - warmup_steps) / span
    return peak * 0.5 * (1.0 + np.cos(np.pi * frac))


class AdamW(object):
    """Decoupled-weight-decay Adam over a fixed parameter list.

    Decay is applied directly to the parameters, scaled by the current
    learning rate, never through the gradient; moments are bias-corrected.
    """

    def __init__(
        self,
        params: list[Tensor],
        peak_lr: float,
        weight_decay: float = 0.0,
        warmup_steps: int = 0,
        total_steps: int = 1,
        betas: tuple = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        self.params = params
        self.peak_lr = peak_lr
        self.weight_decay = weight_decay
        self.warmup_steps = warmup_steps
        self.total_steps = total_steps
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]

    def lr_at(self, step: int) -> float:
        return cosine_warmup_lr(step, self.peak_lr, self.warmup_steps, self.total_steps)

    def step(self):
        """Apply one update from the gradients stored on the parameters."""
        grads = []
        for i, p in enumerate(self.params):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradientError(
                    f"non-finite gradient in parameter {i} (shape {p.data.shape}) "
                    f"at step {self.step_count}"
                )
            grads.append(g)

        self.step_count += 1
        lr = self.lr_at(min(self.step_count, self.total_steps))
        bc1 = 1.0 - self.beta1**self.step_count
        bc2 = 1.0 - self.beta2**self.step_count
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            if self.weight_decay:
                p.data -= lr * self.weight_decay * p.data
            p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def state_arrays(self) -> dict:
        return {"adam_m": [m.copy() for m in self.m], "adam_v": [v.copy() for v in self.v]}

    def load_state_arrays(self, state: dict, step_count: int):
        for buf, incoming in ((self.m, state["adam_m"]), (self.v, state["adam_v"])):
            if len(incoming) != len(buf):
                raise ValueError("optimizer state has wrong number of buffers")
            for b, x in zip(buf, incoming):
                if x.shape != b.shape:
                    raise ValueError("optimizer buffer shape mismatch")
                b[...] = x
        self.step_count = step_count


class Ema(object):
    """Exponential moving average of parameters.

    `update` folds the live parameters into the shadow; `swap` exchanges
    live and shadow values so evaluation can run on the averaged weights
    (a second swap restores training state).
    """

    def __init__(self, params: list[Tensor], decay: float = 0.999):
        self.params = params
        self.decay = decay
        self.shadow = [p.data.copy() for p in params]

    def update(self):
        for s, p in zip(self.shadow, self.params):
            s *= self.decay
            s += (1.0 - self.decay) * p.data

    def swap(self):
        for s, p in zip(self.shadow, self.params):
            tmp = p.data.copy()
            p.data[...] = s
            s[...] = tmp

    def shadow_arrays(self) -> list[np.ndarray]:
        return [s.copy() for s in self.shadow]

    def load_shadow_arrays(self, arrays: list[np.ndarray]):
        if len(arrays) != len(self.shadow):
            raise ValueError("EMA state has wrong number of buffers")
        for s, x in zip(self.shadow, arrays):
            if x.shape != s.shape:
                raise ValueError("EMA buffer shape mismatch")
            s[...] = x

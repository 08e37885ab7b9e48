"""AdamW with decoupled weight decay, LR schedule, and parameter EMA."""

from __future__ import annotations

import math
from typing import Iterable, Mapping

import torch


def lr_schedule(
    step: int,
    base_lr: float = 1e-5,
    tau_up: float = 1000.0,
    gamma: float = 1.0,
) -> float:
    """lr = base * (1 - exp(-step / tau_up)) * gamma**step.

    Zero at step 0, ramps up over ~tau_up steps, then decays geometrically.
    """
    if step < 0:
        raise ValueError("step must be >= 0")
    return base_lr * (1.0 - math.exp(-step / tau_up)) * gamma**step


def gamma_for_half_life(half_life_steps: int) -> float:
    """Decay rate that halves the learning rate every ``half_life_steps``."""
    return 0.5 ** (1.0 / half_life_steps)


class AdamW:
    """AdamW over named parameters; rejects steps whose gradients are non-finite.

    Learning rate follows lr_schedule(step) unless a fixed lr override is set.
    The step counter only advances on applied steps.
    """

    def __init__(
        self,
        params: Mapping[str, torch.nn.Parameter] | Iterable[tuple[str, torch.nn.Parameter]],
        base_lr: float = 1e-5,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.001,
        tau_up: float = 1000.0,
        gamma: float = 1.0,
    ):
        self.params = dict(params)
        self.base_lr = base_lr
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.tau_up = tau_up
        self.gamma = gamma
        self.step_count = 0
        self.rejected_steps = 0
        self.exp_avg = {n: torch.zeros_like(p) for n, p in self.params.items()}
        self.exp_avg_sq = {n: torch.zeros_like(p) for n, p in self.params.items()}

    def current_lr(self) -> float:
        # lr for the step about to be taken (1-indexed so step 1 has nonzero lr)
        return lr_schedule(self.step_count + 1, self.base_lr, self.tau_up, self.gamma)

    @torch.no_grad()
    def step(self) -> bool:
        """Apply one update. Returns False (and changes nothing) on non-finite grads."""
        for p in self.params.values():
            if p.grad is not None and not torch.isfinite(p.grad).all():
                self.rejected_steps += 1
                return False
        lr = self.current_lr()
        t = self.step_count + 1
        b1, b2 = self.betas
        bc1 = 1.0 - b1**t
        bc2 = 1.0 - b2**t
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m = self.exp_avg[name]
            v = self.exp_avg_sq[name]
            m.mul_(b1).add_(g, alpha=1.0 - b1)
            v.mul_(b2).addcmul_(g, g, value=1.0 - b2)
            # decoupled decay, then bias-corrected Adam update
            p.mul_(1.0 - lr * self.weight_decay)
            denom = (v / bc2).sqrt_().add_(self.eps)
            p.addcdiv_(m, denom, value=-lr / bc1)
        self.step_count = t
        return True

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def state_tensors(self) -> dict[str, torch.Tensor]:
        out: dict[str, torch.Tensor] = {}
        for n in self.params:
            out[f"opt.m.{n}"] = self.exp_avg[n]
            out[f"opt.v.{n}"] = self.exp_avg_sq[n]
        return out

    def load_state_tensors(self, tensors: Mapping[str, torch.Tensor], step_count: int) -> None:
        for n in self.params:
            self.exp_avg[n].copy_(tensors[f"opt.m.{n}"])
            self.exp_avg_sq[n].copy_(tensors[f"opt.v.{n}"])
        self.step_count = step_count


class Ema:
    """Exponential moving average of parameter values (shadow weights)."""

    def __init__(self, params: Mapping[str, torch.Tensor], decay: float = 0.999):
        if not (0.0 <= decay < 1.0):
            raise ValueError("EMA decay must be in [0, 1)")
        self.decay = decay
        self.shadow = {n: p.detach().clone() for n, p in params.items()}

    @torch.no_grad()
    def update(self, params: Mapping[str, torch.Tensor]) -> None:
        d = self.decay
        for n, p in params.items():
            self.shadow[n].mul_(d).add_(p.detach(), alpha=1.0 - d)

    @torch.no_grad()
    def copy_to(self, params: Mapping[str, torch.Tensor]) -> None:
        for n, p in params.items():
            p.copy_(self.shadow[n])

    def state_tensors(self) -> dict[str, torch.Tensor]:
        return {f"ema.{n}": t for n, t in self.shadow.items()}

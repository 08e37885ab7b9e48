"""Deterministic second-order multistep sampler in the data-prediction form.

The solver runs over log-SNR time lambda_t = ln(alpha_t / sigma_t) from pure
noise at t_max down to t_min, second order after the first step, then takes
one exact first-order step to t=0 (which reduces to returning the final
x0-prediction). The update for an interval [s -> r] with h = lambda_r -
lambda_s is

    z_r = (sigma_r / sigma_s) z_s + alpha_r (1 - e^{-h}) D,

where D is the current x0-prediction (order 1) or the two-point
extrapolation (1 + 1/(2u)) x0_s - 1/(2u) x0_prev with u = h_prev / h.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import torch

from ..errors import DataError, SamplerError
from .schedule import CosineSchedule

X0Fn = Callable[[torch.Tensor, float], torch.Tensor]


@dataclass
class SamplerState:
    latent: torch.Tensor
    t: float
    x0_history: list[torch.Tensor] = field(default_factory=list)  # at most the solver order
    lambda_history: list[float] = field(default_factory=list)

    def push(self, x0: torch.Tensor, lam: float, order: int = 2) -> None:
        self.x0_history.append(x0)
        self.lambda_history.append(lam)
        while len(self.x0_history) > order:
            self.x0_history.pop(0)
            self.lambda_history.pop(0)


def dpm_solver_pp_sample(
    x0_fn: X0Fn,
    shape: tuple[int, ...],
    steps: int,
    schedule: CosineSchedule | None = None,
    seed: int | torch.Generator | None = None,
    t_start: float | None = None,
    init_latent: torch.Tensor | None = None,
    dtype: torch.dtype = torch.float32,
) -> torch.Tensor:
    """Sample by integrating the probability-flow ODE with DPM-Solver++(2M).

    ``x0_fn(z, t)`` returns the (guidance-combined) x0-prediction. Without
    ``init_latent`` the chain starts from seeded unit Gaussian noise at t_max;
    with it (audio-to-audio) the chain starts at ``t_start``.
    """
    sched = schedule or CosineSchedule()
    if init_latent is not None:
        z = init_latent.clone()
        start = min(t_start if t_start is not None else sched.t_max, sched.t_max)
    else:
        if isinstance(seed, torch.Generator):
            gen = seed
        elif seed is not None:
            gen = torch.Generator().manual_seed(int(seed))
        else:
            gen = None
        z = torch.randn(shape, generator=gen, dtype=dtype)
        start = sched.t_max

    grid = sched.sampling_grid(steps)
    grid = grid[grid <= start + 1e-12]
    if grid.numel() == 0:
        grid = torch.tensor([start], dtype=torch.float64)
    ts = grid.tolist() + [0.0]

    state = SamplerState(latent=z, t=ts[0])
    for i in range(len(ts) - 1):
        t_cur, t_next = ts[i], ts[i + 1]
        x0 = x0_fn(state.latent, t_cur)
        if not torch.isfinite(x0).all():
            raise SamplerError(f"non-finite x0-prediction at step {i} (t={t_cur:.6f})")
        lam_cur = float(sched.log_snr(t_cur))
        final_step = t_next <= 0.0

        if final_step:
            # exact limit: sigma_0 = 0, alpha_0 (1 - e^{-inf}) = 1 -> z = x0
            state.latent = x0
            state.t = 0.0
            break

        lam_next = float(sched.log_snr(t_next))
        h = lam_next - lam_cur
        if state.x0_history:
            h_prev = lam_cur - state.lambda_history[-1]
            u = h_prev / h
            coef = 1.0 / (2.0 * u)
            d = (1.0 + coef) * x0 - coef * state.x0_history[-1]
        else:
            d = x0

        a_next = float(sched.alpha(torch.tensor(t_next, dtype=torch.float64)))
        s_next = float(sched.sigma(torch.tensor(t_next, dtype=torch.float64)))
        s_cur = float(sched.sigma(torch.tensor(t_cur, dtype=torch.float64)))
        z_new = (s_next / s_cur) * state.latent + a_next * (1.0 - torch.exp(torch.tensor(-h, dtype=torch.float64)).item()) * d
        if not torch.isfinite(z_new).all():
            raise SamplerError(f"non-finite latent at step {i} (t={t_next:.6f})")
        state.push(x0, lam_cur)
        state.latent = z_new
        state.t = t_next
    return state.latent


def audio_to_audio_init(
    ref_latent_mean: torch.Tensor,
    strength: float,
    seed: int | torch.Generator | None = None,
    schedule: CosineSchedule | None = None,
) -> SamplerState:
    """Noise a reference latent to time ``strength`` for style-transfer sampling.

    z_t* = alpha_t* z_ref + sigma_t* eps; sampling then proceeds t* -> 0.
    strength 0 keeps the reference exactly (identity pass); strength 1 is an
    unconditional start (reference fully drowned).
    """
    if not 0.0 <= strength <= 1.0:
        raise DataError(f"strength must be in [0, 1], got {strength}")
    sched = schedule or CosineSchedule()
    if isinstance(seed, torch.Generator):
        gen = seed
    elif seed is not None:
        gen = torch.Generator().manual_seed(int(seed))
    else:
        gen = None
    eps = torch.randn(ref_latent_mean.shape, generator=gen, dtype=ref_latent_mean.dtype)
    t = torch.tensor(strength, dtype=torch.float64)
    a = float(sched.alpha(t))
    s = float(sched.sigma(t))
    z = a * ref_latent_mean + s * eps
    return SamplerState(latent=z, t=strength)

"""Finite-difference validation of reverse-mode gradients.

The oracle here is deliberately independent of autograd: central differences
(f(x+h) - f(x-h)) / 2h per coordinate, in double precision, with step size
scaled to the coordinate magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import torch

from ..errors import GradientError


@dataclass
class GradCheckReport:
    max_rel_error: float
    per_tensor: dict[str, float] = field(default_factory=dict)

    def ok(self, tolerance: float) -> bool:
        return self.max_rel_error < tolerance


def _coord_indices(numel: int, max_coords: int | None, seed: int) -> torch.Tensor:
    if max_coords is None or numel <= max_coords:
        return torch.arange(numel)
    g = torch.Generator().manual_seed(seed)
    return torch.randperm(numel, generator=g)[:max_coords]


def grad_check(
    fn: Callable[..., torch.Tensor],
    inputs: Mapping[str, torch.Tensor],
    h: float = 1e-5,
    max_coords_per_tensor: int | None = None,
    seed: int = 0,
) -> GradCheckReport:
    """Compare autograd gradients of a scalar-valued ``fn`` against central differences.

    ``inputs`` maps names to double-precision tensors; every input is treated
    as differentiable. Returns the worst relative error across all checked
    coordinates. Raises GradientError if any analytic gradient is non-finite.
    """
    leaves: dict[str, torch.Tensor] = {}
    for name, x in inputs.items():
        if x.dtype != torch.float64:
            raise GradientError(f"grad_check requires float64 inputs; {name} is {x.dtype}")
        leaves[name] = x.detach().clone().requires_grad_(True)

    out = fn(**leaves)
    if out.numel() != 1:
        raise GradientError("grad_check target must be scalar-valued")
    grads = torch.autograd.grad(out, list(leaves.values()), allow_unused=True)

    report = GradCheckReport(max_rel_error=0.0)
    for (name, leaf), g in zip(leaves.items(), grads):
        if g is None:
            g = torch.zeros_like(leaf)
        if not torch.isfinite(g).all():
            raise GradientError(f"non-finite gradient in {name!r}")
        flat = leaf.detach().clone().reshape(-1)
        g_flat = g.reshape(-1)
        # near-zero coordinates are dominated by FD roundoff; floor the scale
        # at a fraction of the tensor's dominant gradient magnitude
        floor = max(1e-6, 1e-3 * float(g_flat.abs().max()))
        worst = 0.0
        frozen = {k: v.detach() for k, v in leaves.items()}

        def eval_at(vec: torch.Tensor) -> float:
            args = dict(frozen)
            args[name] = vec.reshape(leaf.shape)
            with torch.no_grad():
                return float(fn(**args))

        for idx in _coord_indices(flat.numel(), max_coords_per_tensor, seed).tolist():
            step = h * max(1.0, abs(float(flat[idx])))
            plus = flat.clone()
            plus[idx] += step
            minus = flat.clone()
            minus[idx] -= step
            fd = (eval_at(plus) - eval_at(minus)) / (2.0 * step)
            a = float(g_flat[idx])
            rel = abs(a - fd) / max(abs(a), abs(fd), floor)
            worst = max(worst, rel)
        report.per_tensor[name] = worst
        report.max_rel_error = max(report.max_rel_error, worst)
    return report


def grad_check_module(
    module: torch.nn.Module,
    loss_fn: Callable[[torch.nn.Module], torch.Tensor],
    h: float = 1e-5,
    max_coords_per_tensor: int | None = None,
    seed: int = 0,
) -> GradCheckReport:
    """grad_check over a module's parameters, perturbing them in place.

    The module must already be in double precision; ``loss_fn`` evaluates a
    scalar loss from the module (closing over any fixed inputs).
    """
    params = dict(module.named_parameters())
    for name, p in params.items():
        if p.dtype != torch.float64:
            raise GradientError(f"grad_check requires float64 parameters; {name} is {p.dtype}")

    loss = loss_fn(module)
    grads = torch.autograd.grad(loss, list(params.values()), allow_unused=True)

    report = GradCheckReport(max_rel_error=0.0)
    for (name, p), g in zip(params.items(), grads):
        if g is None:
            g = torch.zeros_like(p)
        if not torch.isfinite(g).all():
            raise GradientError(f"non-finite gradient in {name!r}")
        g_flat = g.reshape(-1)
        flat = p.data.reshape(-1)
        floor = max(1e-6, 1e-3 * float(g_flat.abs().max()))
        worst = 0.0
        for idx in _coord_indices(flat.numel(), max_coords_per_tensor, seed).tolist():
            orig = float(flat[idx])
            step = h * max(1.0, abs(orig))
            with torch.no_grad():
                flat[idx] = orig + step
                f_plus = float(loss_fn(module))
                flat[idx] = orig - step
                f_minus = float(loss_fn(module))
                flat[idx] = orig
            fd = (f_plus - f_minus) / (2.0 * step)
            a = float(g_flat[idx])
            rel = abs(a - fd) / max(abs(a), abs(fd), floor)
            worst = max(worst, rel)
        report.per_tensor[name] = worst
        report.max_rel_error = max(report.max_rel_error, worst)
    return report

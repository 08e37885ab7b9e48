"""Sinusoidal scalar embeddings and timing-condition tokens.

Timing (start seconds, total seconds) is embedded sinusoidally and projected
to the transformer width twice, with separate projections for the prepend
slot and the cross-attention slot.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from ..errors import ConfigurationError, DataError


def sinusoidal_embed(value: torch.Tensor | float, dim: int, base: float = 10000.0) -> torch.Tensor:
    """[sin(v*w_0)..sin(v*w_{n-1}), cos(v*w_0)..cos(v*w_{n-1})], w_i = base^(-i/n).

    ``value`` may be a scalar or any-shaped tensor; the embedding dim is appended.
    """
    if dim % 2 != 0:
        raise ConfigurationError(f"sinusoidal embedding dim must be even, got {dim}")
    v = torch.as_tensor(value, dtype=torch.float32)
    half = dim // 2
    freqs = base ** (-torch.arange(half, dtype=v.dtype) / half)
    angle = v[..., None] * freqs
    return torch.cat([torch.sin(angle), torch.cos(angle)], dim=-1)


@dataclass
class TimingCondition:
    seconds_start: float
    seconds_total: float
    window_length: float

    def __post_init__(self) -> None:
        if self.seconds_total < 0 or self.seconds_start < 0:
            raise DataError("timing values must be non-negative")
        if self.seconds_total > self.window_length:
            raise DataError(
                f"seconds_total {self.seconds_total} exceeds window {self.window_length}"
            )


class TimingEmbedder(nn.Module):
    """Two timing tokens (start, total) for the prepend and cross-attention slots.

    The slots use separate projections (and may use different widths).
    """

    def __init__(self, sin_dim: int, prepend_width: int, cross_width: int | None = None):
        super().__init__()
        self.sin_dim = sin_dim
        self.proj_prepend = nn.Linear(sin_dim, prepend_width)
        self.proj_cross = nn.Linear(sin_dim, cross_width or prepend_width)

    def _sin_pair(self, conds: list[TimingCondition]) -> torch.Tensor:
        starts = torch.tensor([c.seconds_start for c in conds])
        totals = torch.tensor([c.seconds_total for c in conds])
        emb = torch.stack(
            [sinusoidal_embed(starts, self.sin_dim), sinusoidal_embed(totals, self.sin_dim)],
            dim=1,
        )  # [B, 2, sin_dim]
        return emb

    def forward(self, conds: list[TimingCondition]) -> tuple[torch.Tensor, torch.Tensor]:
        emb = self._sin_pair(conds)
        ref = next(self.parameters())
        emb = emb.to(dtype=ref.dtype)
        return self.proj_prepend(emb), self.proj_cross(emb)

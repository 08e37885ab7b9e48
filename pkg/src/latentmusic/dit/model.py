"""Diffusion transformer over latent frames.

Stacked pre-norm blocks: self-attention with rotary embeddings on the lower
half of each head, cross-attention over text + timing context, and a gated
MLP, all with residual connections. Conditioning tokens (diffusion timestep,
timing) are prepended before the blocks and dropped afterwards; linear maps
translate between the latent channel count and the transformer width.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn.functional as F
from torch import nn
from torch.utils.checkpoint import checkpoint as grad_ckpt

from ..conditioning.timing import TimingCondition, TimingEmbedder, sinusoidal_embed
from ..errors import ConfigurationError, DataError
from ..nn import attention

PREPEND_TOKENS = 3  # timestep + (start, total) timing


@dataclass
class DitConfig:
    latent_channels: int = 16
    width: int = 256
    depth: int = 8
    heads: int = 8
    mlp_expansion: int = 4
    text_dim: int = 64
    cond_width: int = 0  # 0 -> same as width
    rope_base: float = 10000.0
    timing_sin_dim: int = 64
    timestep_sin_dim: int = 64
    max_frames: int = 4096
    grad_checkpoint: bool = False

    def __post_init__(self) -> None:
        if self.width % self.heads != 0:
            raise ConfigurationError("width must be divisible by heads")
        if (self.width // self.heads) % 2 != 0:
            raise ConfigurationError("head dim must be even for rotary pairs")
        if self.cond_width == 0:
            self.cond_width = self.width

    @property
    def head_dim(self) -> int:
        return self.width // self.heads


def desk_dit_config(latent_channels: int = 16, text_dim: int = 64) -> DitConfig:
    return DitConfig(latent_channels=latent_channels, width=256, depth=8, heads=8, text_dim=text_dim)


def rope_apply(x: torch.Tensor, positions: torch.Tensor, base: float = 10000.0) -> torch.Tensor:
    """Rotate the lower half of the feature dim by position-dependent angles.

    x: [..., T, Dh]; positions: [T]. Consecutive pairs within the lower half
    are rotated by pos * theta_j with theta_j geometric in j; the upper half
    passes through unchanged.
    """
    dh = x.shape[-1]
    rot = dh // 2
    if rot % 2 != 0:
        raise ConfigurationError(f"rotated half must have even size, got {rot}")
    n_pairs = rot // 2
    theta = base ** (-2.0 * torch.arange(n_pairs, dtype=x.dtype) / rot)
    angle = positions.to(x.dtype)[:, None] * theta  # [T, n_pairs]
    cos, sin = torch.cos(angle), torch.sin(angle)

    lower = x[..., :rot]
    upper = x[..., rot:]
    even = lower[..., 0::2]
    odd = lower[..., 1::2]
    rot_even = even * cos - odd * sin
    rot_odd = even * sin + odd * cos
    mixed = torch.stack([rot_even, rot_odd], dim=-1).flatten(-2)
    return torch.cat([mixed, upper], dim=-1)


class DitBlock(nn.Module):
    """Self-attention (RoPE) -> cross-attention -> gated MLP, each pre-normed and residual."""

    def __init__(self, cfg: DitConfig):
        super().__init__()
        d, h = cfg.width, cfg.heads
        self.cfg = cfg
        self.heads = h
        self.norm_self = nn.LayerNorm(d)
        self.qkv = nn.Linear(d, 3 * d)
        self.self_out = nn.Linear(d, d)
        self.norm_cross = nn.LayerNorm(d)
        self.cross_q = nn.Linear(d, d)
        self.cross_kv = nn.Linear(cfg.cond_width, 2 * d)
        self.cross_out = nn.Linear(d, d)
        self.norm_mlp = nn.LayerNorm(d)
        self.mlp_in = nn.Linear(d, 2 * cfg.mlp_expansion * d)
        self.mlp_out = nn.Linear(cfg.mlp_expansion * d, d)

    def _split(self, u: torch.Tensor) -> torch.Tensor:
        b, t, d = u.shape
        return u.view(b, t, self.heads, d // self.heads).transpose(1, 2)

    def _merge(self, u: torch.Tensor) -> torch.Tensor:
        b, h, t, dh = u.shape
        return u.transpose(1, 2).reshape(b, t, h * dh)

    def forward(
        self,
        x: torch.Tensor,
        positions: torch.Tensor,
        context: torch.Tensor,
        context_mask: torch.Tensor,
    ) -> torch.Tensor:
        if x.shape[-1] != self.cfg.width:
            raise ConfigurationError(f"block width {self.cfg.width}, input {x.shape[-1]}")
        h = self.norm_self(x)
        q, k, v = self.qkv(h).chunk(3, dim=-1)
        q = rope_apply(self._split(q), positions, self.cfg.rope_base)
        k = rope_apply(self._split(k), positions, self.cfg.rope_base)
        x = x + self.self_out(self._merge(attention(q, k, self._split(v))))

        h = self.norm_cross(x)
        q = self._split(self.cross_q(h))
        k, v = self.cross_kv(context).chunk(2, dim=-1)
        att = attention(q, self._split(k), self._split(v), context_mask)
        x = x + self.cross_out(self._merge(att))

        gate, value = self.mlp_in(self.norm_mlp(x)).chunk(2, dim=-1)
        return x + self.mlp_out(F.silu(gate) * value)


@dataclass
class ConditioningBundle:
    """Text features plus timing; ``null_text`` rows use the learned null embedding."""

    text_tokens: torch.Tensor  # [B, Tt, text_dim]
    text_mask: torch.Tensor  # [B, Tt] bool
    timing: list[TimingCondition]
    null_text: torch.Tensor | None = None  # [B] bool; None -> all text rows real

    def batch_size(self) -> int:
        return self.text_tokens.shape[0]

    @classmethod
    def unconditional(cls, batch: int, text_dim: int, timing: list[TimingCondition]) -> "ConditioningBundle":
        return cls(
            text_tokens=torch.zeros(batch, 1, text_dim),
            text_mask=torch.ones(batch, 1, dtype=torch.bool),
            timing=timing,
            null_text=torch.ones(batch, dtype=torch.bool),
        )


class DiffusionTransformer(nn.Module):
    def __init__(self, cfg: DitConfig):
        super().__init__()
        self.cfg = cfg
        d = cfg.width
        self.in_proj = nn.Linear(cfg.latent_channels, d)
        self.timestep_mlp = nn.Sequential(
            nn.Linear(cfg.timestep_sin_dim, d), nn.SiLU(), nn.Linear(d, d)
        )
        self.timing = TimingEmbedder(cfg.timing_sin_dim, d, cfg.cond_width)
        self.text_proj = nn.Linear(cfg.text_dim, cfg.cond_width)
        self.null_text = nn.Parameter(torch.zeros(1, 1, cfg.text_dim))
        self.blocks = nn.ModuleList([DitBlock(cfg) for _ in range(cfg.depth)])
        self.final_norm = nn.LayerNorm(d)
        self.out_proj = nn.Linear(d, cfg.latent_channels)
        # zero-init the output head so the initial v-prediction is exactly zero
        nn.init.zeros_(self.out_proj.weight)
        nn.init.zeros_(self.out_proj.bias)

    def _context(self, cond: ConditioningBundle) -> tuple[torch.Tensor, torch.Tensor]:
        tokens = cond.text_tokens
        mask = cond.text_mask
        if cond.null_text is not None and bool(cond.null_text.any()):
            tokens = tokens.clone()
            mask = mask.clone()
            null = self.null_text.to(tokens.dtype)
            for i in torch.nonzero(cond.null_text).flatten().tolist():
                tokens[i] = null[0, 0]
                mask[i] = False
                mask[i, 0] = True
        ctx_text = self.text_proj(tokens)
        _, timing_cross = self.timing(cond.timing)
        context = torch.cat([ctx_text, timing_cross.to(ctx_text.dtype)], dim=1)
        timing_mask = torch.ones(mask.shape[0], 2, dtype=torch.bool)
        return context, torch.cat([mask, timing_mask], dim=1)

    def forward(self, z: torch.Tensor, t: torch.Tensor | float, cond: ConditioningBundle) -> torch.Tensor:
        """Noisy latents [B, C, T] + diffusion time + conditioning -> v-prediction [B, C, T]."""
        if z.dim() != 3 or z.shape[1] != self.cfg.latent_channels:
            raise ConfigurationError(
                f"expected [batch, {self.cfg.latent_channels}, frames], got {tuple(z.shape)}"
            )
        b, _, frames = z.shape
        if frames > self.cfg.max_frames:
            raise DataError(
                f"{frames} frames exceed the configured positional capacity {self.cfg.max_frames}"
            )
        dtype = self.in_proj.weight.dtype
        t = torch.as_tensor(t, dtype=dtype).reshape(-1)
        if t.numel() == 1:
            t = t.expand(b)

        x = self.in_proj(z.transpose(1, 2))
        ts_tok = self.timestep_mlp(sinusoidal_embed(t * 1000.0, self.cfg.timestep_sin_dim).to(dtype))
        timing_pre, _ = self.timing(cond.timing)
        x = torch.cat([ts_tok[:, None, :], timing_pre.to(dtype), x], dim=1)

        # prepend tokens sit at positions -P..-1 so latent positions are stable
        positions = torch.arange(-PREPEND_TOKENS, frames)
        context, context_mask = self._context(cond)

        for block in self.blocks:
            if self.cfg.grad_checkpoint and torch.is_grad_enabled():
                x = grad_ckpt(block, x, positions, context, context_mask, use_reentrant=False)
            else:
                x = block(x, positions, context, context_mask)
        x = self.final_norm(x)[:, PREPEND_TOKENS:]
        return self.out_proj(x).transpose(1, 2)

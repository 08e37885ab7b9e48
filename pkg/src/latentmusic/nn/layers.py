"""Weight-normalised 1-d convolutions and scaled dot-product attention.

Convolution weights are kept as an explicit (direction, magnitude) pair so the
effective weight is magnitude * direction / ||direction||_2 per output channel.
Rescaling the direction tensor by any positive constant leaves the effective
weight unchanged.
"""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn

from ..errors import ConfigurationError

_NORM_EPS = 0.0  # direction norm is never zero after init; keep the math exact


def _per_channel_norm(direction: torch.Tensor) -> torch.Tensor:
    # norm over all dims but the output-channel dim (dim 0)
    return direction.flatten(1).norm(dim=1)


class WNConv1d(nn.Module):
    """Strided/dilated conv1d with weight-norm parameterization.

    Output length: floor((T + 2*pad - dilation*(K-1) - 1) / stride) + 1.
    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        stride: int = 1,
        dilation: int = 1,
        padding: int | str = 0,
        bias: bool = True,
    ):
        super().__init__()
        if stride < 1 or dilation < 1:
            raise ConfigurationError("stride and dilation must be >= 1")
        if padding == "same":
            if stride != 1:
                raise ConfigurationError("'same' padding requires stride 1")
            padding = dilation * (kernel_size - 1) // 2
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.dilation = dilation
        self.padding = int(padding)

        direction = torch.empty(out_channels, in_channels, kernel_size)
        nn.init.kaiming_uniform_(direction, a=math.sqrt(5))
        self.direction = nn.Parameter(direction)
        # initial effective weight equals the raw init
        self.magnitude = nn.Parameter(_per_channel_norm(direction.detach()))
        self.bias = nn.Parameter(torch.zeros(out_channels)) if bias else None

    def weight(self) -> torch.Tensor:
        norm = _per_channel_norm(self.direction)
        return self.direction * (self.magnitude / norm)[:, None, None]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-2] != self.in_channels:
            raise ConfigurationError(
                f"expected {self.in_channels} input channels, got {x.shape[-2]}"
            )
        return F.conv1d(
            x, self.weight(), self.bias, self.stride, self.padding, self.dilation
        )


class WNConvTranspose1d(nn.Module):
    """Transposed strided conv1d (upsampling), weight-normalised.

    Output length: (T - 1) * stride + K - 2 * pad. With K = 2 * stride and
    pad = stride // 2 this exactly inverts the paired WNConv1d length map.
    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        stride: int = 1,
        padding: int = 0,
        bias: bool = True,
    ):
        super().__init__()
        if stride < 1:
            raise ConfigurationError("stride must be >= 1")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = int(padding)

        direction = torch.empty(in_channels, out_channels, kernel_size)
        nn.init.kaiming_uniform_(direction, a=math.sqrt(5))
        self.direction = nn.Parameter(direction)
        # transposed conv output channels live on dim 1
        self.magnitude = nn.Parameter(
            direction.detach().transpose(0, 1).flatten(1).norm(dim=1)
        )
        self.bias = nn.Parameter(torch.zeros(out_channels)) if bias else None

    def weight(self) -> torch.Tensor:
        norm = self.direction.transpose(0, 1).flatten(1).norm(dim=1)
        return self.direction * (self.magnitude / norm)[None, :, None]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-2] != self.in_channels:
            raise ConfigurationError(
                f"expected {self.in_channels} input channels, got {x.shape[-2]}"
            )
        return F.conv_transpose1d(x, self.weight(), self.bias, self.stride, self.padding)


def attention(
    q: torch.Tensor,
    k: torch.Tensor,
    v: torch.Tensor,
    mask: torch.Tensor | None = None,
) -> torch.Tensor:
    """softmax(q k^T / sqrt(D)) v over the last two dims ([..., T, D]).

    ``mask`` is boolean over key positions (True = attend); it may be [..., Tk]
    or [..., Tq, Tk] and broadcasts against the logits.
    """
    if q.shape[-1] != k.shape[-1] or k.shape[-1] != v.shape[-1]:
        raise ConfigurationError(
            f"feature dims disagree: q {q.shape[-1]}, k {k.shape[-1]}, v {v.shape[-1]}"
        )
    if k.shape[-2] != v.shape[-2]:
        raise ConfigurationError(
            f"key/value lengths disagree: {k.shape[-2]} vs {v.shape[-2]}"
        )
    d = q.shape[-1]
    logits = q @ k.transpose(-1, -2) / math.sqrt(d)
    if mask is not None:
        if mask.dtype != torch.bool:
            raise ConfigurationError("attention mask must be boolean")
        if mask.dim() == logits.dim() - 1:
            mask = mask.unsqueeze(-2)
        while mask.dim() < logits.dim():
            mask = mask.unsqueeze(1)
        logits = logits.masked_fill(~mask, torch.finfo(logits.dtype).min)
    return torch.softmax(logits, dim=-1) @ v

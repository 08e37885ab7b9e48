"""Variational audio codec: strided-conv encoder, mirrored transposed-conv decoder.

Downsampling blocks are dilated residual units followed by a strided conv;
activations are Snake with a trainable per-channel beta. The bottleneck is a
diagonal Gaussian; the decoder output is affine (no saturating nonlinearity).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
from torch import nn

from ..errors import ConfigurationError, DataError
from ..nn import WNConv1d, WNConvTranspose1d

LOGVAR_MIN = -30.0
LOGVAR_MAX = 20.0


@dataclass
class CodecConfig:
    sample_rate: int = 8000
    channels: int = 2
    strides: list[int] = field(default_factory=lambda: [4, 4, 4, 4])
    widths: list[int] = field(default_factory=lambda: [16, 24, 32, 48, 64])
    latent_channels: int = 16
    res_dilations: list[int] = field(default_factory=lambda: [1, 3, 9])
    snake_log_beta_init: float = 0.0
    kl_weight: float = 1e-4
    stft_loss_weight: float = 1.0
    adv_loss_weight: float = 1.0
    feature_match_weight: float = 5.0
    stft_fft_sizes: list[int] = field(default_factory=lambda: [64, 128, 256, 512, 1024, 2048])
    perceptual_weighting: bool = True
    disc_fft_sizes: list[int] = field(default_factory=lambda: [2048, 1024, 512, 256, 128])
    disc_channels: int = 8

    def __post_init__(self) -> None:
        if len(self.widths) != len(self.strides) + 1:
            raise ConfigurationError("widths must have one more entry than strides")
        for s in self.strides:
            if s % 2 != 0:
                raise ConfigurationError("strides must be even (decoder inverts the length map)")

    @property
    def total_stride(self) -> int:
        return math.prod(self.strides)

    @property
    def latent_rate(self) -> float:
        return self.sample_rate / self.total_stride


def full_scale_codec_config() -> CodecConfig:
    """44.1 kHz stereo, total stride 2048, 64 latent channels (~21.53 Hz)."""
    return CodecConfig(
        sample_rate=44100,
        channels=2,
        strides=[2, 4, 4, 8, 8],
        widths=[32, 64, 128, 256, 512, 1024],
        latent_channels=64,
    )


def desk_codec_config() -> CodecConfig:
    """8 kHz stereo, total stride 256, 16 latent channels (31.25 Hz)."""
    return CodecConfig()


class Snake(nn.Module):
    """x + sin^2(beta x) / beta with trainable per-channel beta = exp(b) > 0."""

    def __init__(self, channels: int, log_beta_init: float = 0.0):
        super().__init__()
        self.log_beta = nn.Parameter(torch.full((1, channels, 1), float(log_beta_init)))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        beta = torch.exp(self.log_beta)
        return x + torch.sin(beta * x) ** 2 / beta


class ResUnit(nn.Module):
    def __init__(self, channels: int, dilation: int, log_beta_init: float = 0.0):
        super().__init__()
        self.block = nn.Sequential(
            Snake(channels, log_beta_init),
            WNConv1d(channels, channels, 7, dilation=dilation, padding=dilation * 3),
            Snake(channels, log_beta_init),
            WNConv1d(channels, channels, 1),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.block(x)


class Encoder(nn.Module):
    def __init__(self, cfg: CodecConfig):
        super().__init__()
        layers: list[nn.Module] = [WNConv1d(cfg.channels, cfg.widths[0], 7, padding=3)]
        for i, stride in enumerate(cfg.strides):
            w_in, w_out = cfg.widths[i], cfg.widths[i + 1]
            for d in cfg.res_dilations:
                layers.append(ResUnit(w_in, d, cfg.snake_log_beta_init))
            layers.append(Snake(w_in, cfg.snake_log_beta_init))
            k = 2 * stride
            layers.append(WNConv1d(w_in, w_out, k, stride=stride, padding=(k - stride + 1) // 2))
        layers.append(Snake(cfg.widths[-1], cfg.snake_log_beta_init))
        layers.append(WNConv1d(cfg.widths[-1], 2 * cfg.latent_channels, 3, padding=1))
        self.net = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class Decoder(nn.Module):
    def __init__(self, cfg: CodecConfig):
        super().__init__()
        layers: list[nn.Module] = [WNConv1d(cfg.latent_channels, cfg.widths[-1], 7, padding=3)]
        for i in reversed(range(len(cfg.strides))):
            stride = cfg.strides[i]
            w_in, w_out = cfg.widths[i + 1], cfg.widths[i]
            layers.append(Snake(w_in, cfg.snake_log_beta_init))
            layers.append(WNConvTranspose1d(w_in, w_out, 2 * stride, stride=stride, padding=stride // 2))
            for d in cfg.res_dilations:
                layers.append(ResUnit(w_out, d, cfg.snake_log_beta_init))
        layers.append(Snake(cfg.widths[0], cfg.snake_log_beta_init))
        # final layer is affine: no tanh at the decoder output
        layers.append(WNConv1d(cfg.widths[0], cfg.channels, 7, padding=3))
        self.net = nn.Sequential(*layers)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        return self.net(z)


@dataclass
class GaussianPosterior:
    """Diagonal Gaussian over latent frames; log-variance clamped to a safe range."""

    mean: torch.Tensor  # [B, C_lat, T_lat]
    log_variance: torch.Tensor
    latent_rate: float
    orig_samples: int  # input length before stride padding

    def __post_init__(self) -> None:
        if self.mean.shape != self.log_variance.shape:
            raise ConfigurationError("posterior mean/log-variance shapes disagree")
        self.log_variance = self.log_variance.clamp(LOGVAR_MIN, LOGVAR_MAX)


def sample_posterior(p: GaussianPosterior, seed: int | torch.Generator | None = None) -> torch.Tensor:
    """Reparameterized sample: mean + exp(logvar/2) * eps; deterministic per seed."""
    if isinstance(seed, torch.Generator):
        gen = seed
    elif seed is not None:
        gen = torch.Generator().manual_seed(int(seed))
    else:
        gen = None
    eps = torch.randn(p.mean.shape, generator=gen, dtype=p.mean.dtype)
    return p.mean + torch.exp(0.5 * p.log_variance) * eps


def ms_transform(x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Stereo [.., 2, T] -> (mid, side) with mid=(L+R)/2, side=(L-R)/2."""
    if x.shape[-2] != 2:
        raise DataError(f"mid/side transform needs 2 channels, got {x.shape[-2]}")
    left, right = x[..., 0, :], x[..., 1, :]
    return (left + right) / 2.0, (left - right) / 2.0


def ms_inverse(mid: torch.Tensor, side: torch.Tensor) -> torch.Tensor:
    return torch.stack([mid + side, mid - side], dim=-2)


class AudioCodec(nn.Module):
    def __init__(self, cfg: CodecConfig):
        super().__init__()
        self.cfg = cfg
        self.encoder = Encoder(cfg)
        self.decoder = Decoder(cfg)

    @property
    def total_stride(self) -> int:
        return self.cfg.total_stride

    @property
    def latent_rate(self) -> float:
        return self.cfg.latent_rate

    def pad_to_stride(self, x: torch.Tensor) -> torch.Tensor:
        t = x.shape[-1]
        rem = t % self.total_stride
        if rem == 0:
            return x
        pad = self.total_stride - rem
        if pad < t:
            return torch.nn.functional.pad(x, (0, pad), mode="reflect")
        return torch.nn.functional.pad(x, (0, pad))

    def encode(self, x: torch.Tensor) -> GaussianPosterior:
        """Waveform tensor [B, C, T] -> posterior over latent frames.

        Inputs not divisible by the total stride are reflection-padded on the
        right; the original length is recorded on the posterior.
        """
        if x.dim() != 3:
            raise DataError(f"encode expects [batch, channels, samples], got shape {tuple(x.shape)}")
        if x.shape[-1] == 0:
            raise DataError("cannot encode an empty waveform")
        if x.shape[1] != self.cfg.channels:
            raise ConfigurationError(
                f"codec is configured for {self.cfg.channels} channels, got {x.shape[1]}"
            )
        orig = x.shape[-1]
        x = self.pad_to_stride(x)
        h = self.encoder(x)
        mean, logvar = h.chunk(2, dim=1)
        return GaussianPosterior(mean, logvar, self.latent_rate, orig)

    def decode(self, z: torch.Tensor, orig_samples: int | None = None) -> torch.Tensor:
        """Latent [B, C_lat, T_lat] -> waveform [B, C, T_lat * stride] (trimmed if asked)."""
        if z.dim() != 3 or z.shape[1] != self.cfg.latent_channels:
            raise ConfigurationError(
                f"decode expects [batch, {self.cfg.latent_channels}, frames], got {tuple(z.shape)}"
            )
        y = self.decoder(z)
        if orig_samples is not None:
            y = y[..., :orig_samples]
        return y

    def reconstruct(self, x: torch.Tensor, seed: int | torch.Generator | None = None) -> torch.Tensor:
        p = self.encode(x)
        z = sample_posterior(p, seed)
        return self.decode(z, orig_samples=p.orig_samples)

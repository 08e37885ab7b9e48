"""Codec training losses: perceptual multi-resolution STFT, KL, adversarial stack.

The STFT loss runs on the mid/side channels plus the left/right channels with
the L/R component weighted by 0.5. Perceptual weighting multiplies magnitudes
by an A-weighting curve before the log term.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..errors import DataError
from .model import GaussianPosterior, ms_transform

_EPS = 1e-7


def a_weighting(freqs_hz: np.ndarray) -> np.ndarray:
    """Linear-scale A-weighting gains for the given frequencies (0 at DC)."""
    f2 = np.asarray(freqs_hz, dtype=np.float64) ** 2
    num = (12194.0**2) * f2**2
    den = (
        (f2 + 20.6**2)
        * np.sqrt((f2 + 107.7**2) * (f2 + 737.9**2))
        * (f2 + 12194.0**2)
    )
    ra = np.zeros_like(f2)
    nz = den > 0
    ra[nz] = num[nz] / den[nz]
    return ra * 10.0 ** (2.0 / 20.0)  # +2.00 dB normalization at 1 kHz


class MultiResolutionStftLoss(nn.Module):
    """Sum over resolutions of spectral convergence + log-magnitude L1."""

    def __init__(
        self,
        fft_sizes: list[int],
        sample_rate: int,
        perceptual_weighting: bool = True,
    ):
        super().__init__()
        self.fft_sizes = list(fft_sizes)
        self.sample_rate = sample_rate
        self.perceptual_weighting = perceptual_weighting
        for n_fft in self.fft_sizes:
            self.register_buffer(f"win_{n_fft}", torch.hann_window(n_fft), persistent=False)
            freqs = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate)
            w = torch.from_numpy(a_weighting(freqs)).float()
            self.register_buffer(f"aw_{n_fft}", w[:, None], persistent=False)

    def _mag(self, x: torch.Tensor, n_fft: int) -> torch.Tensor:
        win = getattr(self, f"win_{n_fft}")
        spec = torch.stft(
            x,
            n_fft,
            hop_length=n_fft // 4,
            window=win.to(x.dtype),
            return_complex=True,
            center=True,
        )
        return spec.abs()

    def _single_resolution(self, x: torch.Tensor, y: torch.Tensor, n_fft: int) -> tuple[torch.Tensor, torch.Tensor]:
        mx = self._mag(x, n_fft)
        my = self._mag(y, n_fft)
        sc = torch.norm(mx - my, p="fro") / (torch.norm(mx, p="fro") + _EPS)
        if self.perceptual_weighting:
            w = getattr(self, f"aw_{n_fft}").to(x.dtype)
            mx = mx * w
            my = my * w
        logmag = F.l1_loss(torch.log(mx + _EPS), torch.log(my + _EPS))
        return sc, logmag

    def _channel_loss(self, x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
        # x, y: [B, T] mono signals
        total = x.new_zeros(())
        for n_fft in self.fft_sizes:
            sc, logmag = self._single_resolution(x, y, n_fft)
            total = total + sc + logmag
        return total

    def forward(self, x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
        """x is the reference, y the estimate; both [B, C, T]."""
        if x.shape != y.shape:
            raise DataError(f"stft loss needs equal shapes, got {tuple(x.shape)} vs {tuple(y.shape)}")
        if x.shape[1] == 2:
            mid_x, side_x = ms_transform(x)
            mid_y, side_y = ms_transform(y)
            loss = self._channel_loss(mid_x, mid_y) + self._channel_loss(side_x, side_y)
            lr = self._channel_loss(x[:, 0], y[:, 0]) + self._channel_loss(x[:, 1], y[:, 1])
            return loss + 0.5 * lr
        return self._channel_loss(x[:, 0], y[:, 0])


def kl_loss(p: GaussianPosterior) -> torch.Tensor:
    """Mean over elements of KL(q || N(0, 1)) for a diagonal Gaussian."""
    mu = p.mean
    logvar = p.log_variance
    return 0.5 * (mu.pow(2) + logvar.exp() - logvar - 1.0).mean()


class SpectrogramDiscriminator(nn.Module):
    """One STFT-scale discriminator over stacked real/imag spectrogram channels."""

    def __init__(self, n_fft: int, channels: int = 8):
        super().__init__()
        self.n_fft = n_fft
        self.register_buffer("window", torch.hann_window(n_fft), persistent=False)
        c = channels
        self.convs = nn.ModuleList(
            [
                nn.Conv2d(2, c, (3, 9), padding=(1, 4)),
                nn.Conv2d(c, c, (3, 9), stride=(2, 1), padding=(1, 4)),
                nn.Conv2d(c, c, (3, 9), stride=(2, 1), padding=(1, 4)),
                nn.Conv2d(c, c, (3, 3), padding=(1, 1)),
            ]
        )
        self.out = nn.Conv2d(c, 1, (3, 3), padding=(1, 1))

    def spectrogram(self, x: torch.Tensor) -> torch.Tensor:
        # fold channels into the batch: [B, C, T] -> [B*C, 2, F, T']
        b, ch, t = x.shape
        spec = torch.stft(
            x.reshape(b * ch, t),
            self.n_fft,
            hop_length=self.n_fft // 4,
            window=self.window.to(x.dtype),
            return_complex=True,
            center=True,
        )
        return torch.stack([spec.real, spec.imag], dim=1)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, list[torch.Tensor]]:
        h = self.spectrogram(x)
        feats = []
        for conv in self.convs:
            h = F.leaky_relu(conv(h), 0.1)
            feats.append(h)
        return self.out(h), feats


class DiscriminatorSet(nn.Module):
    """Five STFT-scale convolutional discriminators with hinge objectives."""

    def __init__(self, fft_sizes: list[int], channels: int = 8):
        super().__init__()
        self.discriminators = nn.ModuleList(
            [SpectrogramDiscriminator(n, channels) for n in fft_sizes]
        )

    def forward(self, x: torch.Tensor) -> list[tuple[torch.Tensor, list[torch.Tensor]]]:
        return [d(x) for d in self.discriminators]

    def generator_losses(self, real: torch.Tensor, fake: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Hinge generator loss and feature-matching L1, averaged over scales."""
        adv = fake.new_zeros(())
        fm = fake.new_zeros(())
        n = len(self.discriminators)
        for d in self.discriminators:
            logits_fake, feats_fake = d(fake)
            with torch.no_grad():
                _, feats_real = d(real)
            adv = adv + F.relu(1.0 - logits_fake).mean()
            layer_fm = fake.new_zeros(())
            for fr, ff in zip(feats_real, feats_fake):
                layer_fm = layer_fm + F.l1_loss(ff, fr.detach())
            fm = fm + layer_fm / len(feats_fake)
        return adv / n, fm / n

    def discriminator_loss(self, real: torch.Tensor, fake: torch.Tensor) -> torch.Tensor:
        """Hinge loss: mean over scales of relu(1 - D(real)) + relu(1 + D(fake))."""
        total = real.new_zeros(())
        for d in self.discriminators:
            logits_real, _ = d(real)
            logits_fake, _ = d(fake.detach())
            total = total + F.relu(1.0 - logits_real).mean() + F.relu(1.0 + logits_fake).mean()
        return total / len(self.discriminators)


def discriminator_losses(
    disc: DiscriminatorSet, real: torch.Tensor, fake: torch.Tensor
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """(adv_g, adv_d, feature_match) for one real/fake pair."""
    if real.shape != fake.shape:
        raise DataError("discriminator losses need equal shapes")
    adv_g, fm = disc.generator_losses(real, fake)
    adv_d = disc.discriminator_loss(real, fake)
    return adv_g, adv_d, fm

"""Shared signal helpers: mel filterbank and log-mel frames."""

from __future__ import annotations

import numpy as np
import torch


def hz_to_mel(f: np.ndarray | float) -> np.ndarray | float:
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m: np.ndarray | float) -> np.ndarray | float:
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int, n_fft: int, sample_rate: int, fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    """Triangular mel filterbank, shape [n_mels, n_fft // 2 + 1]."""
    fmax = fmax if fmax is not None else sample_rate / 2.0
    mel_pts = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)
    bins = np.fft.rfftfreq(n_fft, 1.0 / sample_rate)
    fb = np.zeros((n_mels, len(bins)))
    for i in range(n_mels):
        lo, ctr, hi = hz_pts[i], hz_pts[i + 1], hz_pts[i + 2]
        up = (bins - lo) / max(ctr - lo, 1e-9)
        down = (hi - bins) / max(hi - ctr, 1e-9)
        fb[i] = np.clip(np.minimum(up, down), 0.0, None)
    return fb


def log_mel_frames(
    x: torch.Tensor,
    sample_rate: int,
    n_fft: int = 512,
    hop: int = 256,
    n_mels: int = 40,
) -> torch.Tensor:
    """Log-mel spectrogram frames; input [..., T] -> [..., n_mels, frames]."""
    window = torch.hann_window(n_fft, dtype=x.dtype, device=x.device)
    spec = torch.stft(
        x.reshape(-1, x.shape[-1]),
        n_fft,
        hop_length=hop,
        window=window,
        return_complex=True,
        center=True,
    ).abs()
    fb = torch.from_numpy(mel_filterbank(n_mels, n_fft, sample_rate)).to(x.dtype)
    mel = fb @ spec
    out = torch.log(mel + 1e-5)
    return out.reshape(*x.shape[:-1], n_mels, -1)

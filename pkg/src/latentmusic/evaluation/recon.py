"""Reconstruction metrics: STFT distance, MEL distance, SI-SDR."""

from __future__ import annotations

import math

import numpy as np
import torch

from ..audio import Waveform
from ..dsp import mel_filterbank
from ..errors import DataError

SI_SDR_SENTINEL_DB = 100.0
_EPS = 1e-7
DEFAULT_FFT_SIZES = (512, 1024, 2048)


def _as_tensor(w: Waveform | torch.Tensor) -> torch.Tensor:
    if isinstance(w, Waveform):
        return torch.from_numpy(w.data)
    return w


def _mags(x: torch.Tensor, n_fft: int) -> torch.Tensor:
    win = torch.hann_window(n_fft, dtype=x.dtype)
    return torch.stft(x, n_fft, hop_length=n_fft // 4, window=win, return_complex=True, center=True).abs()


def _sc_and_logmag(mx: torch.Tensor, my: torch.Tensor) -> float:
    sc = torch.norm(mx - my, p="fro") / (torch.norm(mx, p="fro") + _EPS)
    logmag = (torch.log(mx + _EPS) - torch.log(my + _EPS)).abs().mean()
    return float(sc + logmag)


def stft_distance(
    x: Waveform | torch.Tensor,
    y: Waveform | torch.Tensor,
    fft_sizes: tuple[int, ...] = DEFAULT_FFT_SIZES,
) -> float:
    """Multi-resolution spectral convergence + log-magnitude L1 (x is reference)."""
    xt, yt = _as_tensor(x), _as_tensor(y)
    if xt.shape != yt.shape:
        raise DataError(f"stft_distance needs equal shapes, got {tuple(xt.shape)} vs {tuple(yt.shape)}")
    total = 0.0
    for n_fft in fft_sizes:
        total += _sc_and_logmag(_mags(xt, n_fft), _mags(yt, n_fft))
    return total / len(fft_sizes)


def mel_distance(
    x: Waveform | torch.Tensor,
    y: Waveform | torch.Tensor,
    sample_rate: int | None = None,
    fft_sizes: tuple[int, ...] = DEFAULT_FFT_SIZES,
    n_mels: int = 64,
) -> float:
    """Same structure as stft_distance on mel-projected magnitudes."""
    if sample_rate is None:
        if not isinstance(x, Waveform):
            raise DataError("mel_distance needs a sample rate for tensor inputs")
        sample_rate = x.sample_rate
    xt, yt = _as_tensor(x), _as_tensor(y)
    if xt.shape != yt.shape:
        raise DataError("mel_distance needs equal shapes")
    total = 0.0
    for n_fft in fft_sizes:
        fb = torch.from_numpy(mel_filterbank(min(n_mels, n_fft // 2), n_fft, sample_rate)).to(xt.dtype)
        mx = fb @ _mags(xt, n_fft)
        my = fb @ _mags(yt, n_fft)
        total += _sc_and_logmag(mx, my)
    return total / len(fft_sizes)


def si_sdr(x: Waveform | torch.Tensor, y: Waveform | torch.Tensor) -> float:
    """Scale-invariant SDR of estimate y against reference x, in dB.

    Both signals are zero-meaned; a (near-)exact match returns the +100 dB
    sentinel. An all-zero reference is undefined and raises.
    """
    xt = _as_tensor(x).double().reshape(-1)
    yt = _as_tensor(y).double().reshape(-1)
    if xt.shape != yt.shape:
        raise DataError("si_sdr needs equal shapes")
    xt = xt - xt.mean()
    yt = yt - yt.mean()
    energy = float(xt.pow(2).sum())
    if energy == 0.0:
        raise DataError("si_sdr undefined for an all-zero reference")
    proj = (float(torch.dot(yt, xt)) / energy) * xt
    noise = yt - proj
    p_signal = float(proj.pow(2).sum())
    p_noise = float(noise.pow(2).sum())
    if p_noise <= 0.0 or p_signal / p_noise > 10.0 ** (SI_SDR_SENTINEL_DB / 10.0):
        return SI_SDR_SENTINEL_DB
    return 10.0 * math.log10(p_signal / p_noise)

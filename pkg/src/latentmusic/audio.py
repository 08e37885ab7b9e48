"""Waveform container and WAV file I/O (PCM16 and float32)."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import DataError


@dataclass
class Waveform:
    """Multi-channel audio: ``data`` is (channels, samples) float, plus a sample rate.

    Samples may exceed [-1, 1] transiently inside loss computation; file writes
    clamp to [-1, 1].
    """

    data: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2:
            raise DataError(f"waveform data must be (channels, samples), got shape {arr.shape}")
        if arr.shape[1] == 0:
            raise DataError("waveform has zero samples")
        if not np.all(np.isfinite(arr)):
            raise DataError("waveform contains non-finite samples")
        self.data = arr.astype(np.float32, copy=False)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def samples(self) -> int:
        return self.data.shape[1]

    @property
    def seconds(self) -> float:
        return self.samples / self.sample_rate

    def to_mono(self) -> "Waveform":
        return Waveform(self.data.mean(axis=0, keepdims=True), self.sample_rate)


def rms_dbfs(x: np.ndarray) -> float:
    """RMS level in dB relative to full scale; -inf for exact silence."""
    rms = float(np.sqrt(np.mean(np.square(x, dtype=np.float64))))
    if rms <= 0.0:
        return float("-inf")
    return 20.0 * np.log10(rms)


def write_wav(path: str | Path, w: Waveform, fmt: str = "float32") -> None:
    """Write a waveform to disk; output samples are clamped to [-1, 1]."""
    data = np.clip(w.data.T, -1.0, 1.0)  # scipy expects (samples, channels)
    if fmt == "float32":
        wavfile.write(str(path), w.sample_rate, data.astype(np.float32))
    elif fmt == "pcm16":
        wavfile.write(str(path), w.sample_rate, np.round(data * 32767.0).astype(np.int16))
    else:
        raise DataError(f"unknown wav format {fmt!r} (use 'float32' or 'pcm16')")


def read_wav(path: str | Path) -> Waveform:
    sr, data = wavfile.read(str(path))
    if data.ndim == 1:
        data = data[:, None]
    if data.dtype == np.int16:
        arr = data.astype(np.float32) / 32767.0
    elif data.dtype == np.int32:
        arr = data.astype(np.float32) / 2147483647.0
    elif data.dtype in (np.float32, np.float64):
        arr = data.astype(np.float32)
    else:
        raise DataError(f"unsupported wav sample dtype {data.dtype}")
    return Waveform(arr.T, int(sr))

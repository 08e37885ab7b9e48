"""Deterministic batch construction from a corpus manifest.

Two regimes:
  * window batches — full tracks padded with trailing silence up to a fixed
    window; tracks longer than the window are excluded. Each item carries its
    true seconds_total for timing conditioning.
  * crop batches — fixed-length random crops for codec/embedder training.
    Crops may run past the content end into the silence tail so the codec
    learns to reconstruct silence.

Both are pure functions of (manifest, split, seed, step), which makes
training resumable: the batch at step k never depends on loader state.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import torch

from ..audio import Waveform, read_wav
from ..conditioning.metadata import TrackMetadata
from ..errors import DataError
from .corpus import CorpusManifest, TrackRecord


@dataclass
class Batch:
    waveforms: torch.Tensor  # [B, C, S]
    seconds_total: list[float]
    metadata: list[TrackMetadata]
    track_ids: list[str]


@lru_cache(maxsize=256)
def _cached_wave(path: str) -> Waveform:
    return read_wav(path)


def _split_records(manifest: CorpusManifest, split: str) -> list[TrackRecord]:
    recs = manifest.split(split)
    if not recs:
        raise DataError(f"split {split!r} is empty")
    return recs


def window_batch(
    manifest: CorpusManifest,
    split: str,
    window_seconds: float,
    batch_size: int,
    seed: int,
    step: int,
) -> Batch:
    """Full tracks silence-padded to the window; longer tracks are excluded."""
    recs = [r for r in _split_records(manifest, split) if r.seconds <= window_seconds + 1e-9]
    if not recs:
        raise DataError(f"no tracks fit a {window_seconds}s window in split {split!r}")
    rng = np.random.default_rng([seed, step])
    idx = rng.integers(0, len(recs), size=batch_size)
    sr = manifest.sample_rate
    win = int(round(window_seconds * sr))
    waves, totals, metas, ids = [], [], [], []
    for i in idx:
        rec = recs[int(i)]
        w = _cached_wave(str(manifest.resolve(rec)))
        data = np.zeros((w.channels, win), dtype=np.float32)
        n = min(w.samples, win)
        data[:, :n] = w.data[:, :n]
        waves.append(torch.from_numpy(data))
        totals.append(min(rec.seconds, window_seconds))
        metas.append(rec.metadata)
        ids.append(rec.track_id)
    return Batch(torch.stack(waves), totals, metas, ids)


def crop_batch(
    manifest: CorpusManifest,
    split: str,
    crop_seconds: float,
    batch_size: int,
    seed: int,
    step: int,
    silence_tail_prob: float = 0.25,
) -> Batch:
    """Random fixed-length crops; some crops deliberately include silence tails."""
    recs = _split_records(manifest, split)
    rng = np.random.default_rng([seed, step])
    sr = manifest.sample_rate
    crop = int(round(crop_seconds * sr))
    waves, totals, metas, ids = [], [], [], []
    for i in rng.integers(0, len(recs), size=batch_size):
        rec = recs[int(i)]
        w = _cached_wave(str(manifest.resolve(rec)))
        tail = crop if rng.random() < silence_tail_prob else 0
        padded = np.concatenate(
            [w.data, np.zeros((w.channels, max(0, crop - w.samples) + tail), dtype=np.float32)],
            axis=1,
        )
        start = int(rng.integers(0, max(1, padded.shape[1] - crop + 1)))
        waves.append(torch.from_numpy(np.ascontiguousarray(padded[:, start : start + crop])))
        totals.append(rec.seconds)
        metas.append(rec.metadata)
        ids.append(rec.track_id)
    return Batch(torch.stack(waves), totals, metas, ids)


def batch_loader(
    manifest: CorpusManifest,
    split: str,
    window_seconds: float,
    batch_size: int,
    seed: int,
    mode: str = "window",
    crop_seconds: float | None = None,
    n_batches: int | None = None,
):
    """Yield a deterministic stream of batches (step-indexed under the hood)."""
    recs = _split_records(manifest, split)
    total = n_batches if n_batches is not None else max(1, len(recs) // batch_size)
    for step in range(total):
        if mode == "window":
            yield window_batch(manifest, split, window_seconds, batch_size, seed, step)
        elif mode == "crop":
            yield crop_batch(manifest, split, crop_seconds or window_seconds, batch_size, seed, step)
        else:
            raise DataError(f"unknown loader mode {mode!r}")

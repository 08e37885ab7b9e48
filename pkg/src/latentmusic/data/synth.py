"""Deterministic synthesis of structured stereo tracks.

Each track follows a section plan (e.g. A B A); sections sharing a label
reuse the same motif seed, so repeats are acoustically near-identical up to a
small seeded ornament jitter. Distinct labels draw different scales, registers
and timbres, giving distinct spectra. This puts ground-truth long-range
structure into the corpus for the self-similarity tooling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..audio import Waveform
from ..errors import DataError

PENTATONIC = np.array([0, 2, 4, 7, 9])


@dataclass
class SectionPlan:
    labels: list[str]
    durations: list[float]  # seconds per section, same label -> same duration
    motif_seeds: dict[str, int]
    genre: str = "electronic"
    moods: list[str] = field(default_factory=list)
    instruments: list[str] = field(default_factory=lambda: ["synth"])
    bpm: float = 120.0

    def __post_init__(self) -> None:
        if len(self.labels) != len(self.durations):
            raise DataError("labels and durations must align")
        if any(d <= 0 for d in self.durations):
            raise DataError("section durations must be positive")
        for lab in self.labels:
            if lab not in self.motif_seeds:
                raise DataError(f"missing motif seed for section {lab!r}")

    @property
    def total_seconds(self) -> float:
        return float(sum(self.durations))

    def to_dict(self) -> dict:
        return {
            "labels": self.labels,
            "durations": self.durations,
            "motif_seeds": self.motif_seeds,
            "genre": self.genre,
            "moods": self.moods,
            "instruments": self.instruments,
            "bpm": self.bpm,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SectionPlan":
        return cls(
            labels=list(d["labels"]),
            durations=[float(x) for x in d["durations"]],
            motif_seeds={k: int(v) for k, v in d["motif_seeds"].items()},
            genre=d.get("genre", "electronic"),
            moods=list(d.get("moods", [])),
            instruments=list(d.get("instruments", ["synth"])),
            bpm=float(d.get("bpm", 120.0)),
        )


def _tone(freq: float, n: int, sr: int, harmonics: np.ndarray, phase: float = 0.0) -> np.ndarray:
    t = np.arange(n) / sr
    out = np.zeros(n)
    for k, amp in enumerate(harmonics, start=1):
        out += amp * np.sin(2 * np.pi * freq * k * t + phase)
    return out


def _envelope(n: int, sr: int, attack_ms: float = 8.0, decay: float = 3.0) -> np.ndarray:
    att = max(1, int(sr * attack_ms / 1000))
    env = np.ones(n)
    env[:att] = np.linspace(0.0, 1.0, att)
    env *= np.exp(-decay * np.arange(n) / n)
    return env


def _render_section(
    label: str,
    seconds: float,
    motif_seed: int,
    ornament_seed: int,
    plan: SectionPlan,
    sr: int,
) -> np.ndarray:
    motif = np.random.default_rng(motif_seed)
    orn = np.random.default_rng(ornament_seed)
    n = int(round(seconds * sr))
    left = np.zeros(n)
    right = np.zeros(n)

    root = 110.0 * 2.0 ** (motif.integers(0, 13) / 12.0)
    octave = 2.0 ** motif.integers(0, 2)
    harmonics = motif.uniform(0.05, 1.0, size=4) / np.arange(1, 5) ** 1.2
    harmonics /= harmonics.sum()
    beat = 60.0 / plan.bpm
    note_len = beat / 2.0
    n_notes = max(1, int(seconds / note_len))
    degrees = motif.integers(0, len(PENTATONIC), size=16)
    # rhythm is part of the motif: which grid slots are struck is label-seeded,
    # so different labels do not share a beat-aligned energy envelope
    rhythm = motif.random(16) < 0.75
    if not rhythm.any():
        rhythm[0] = True
    melody_pan = motif.uniform(0.2, 0.8)
    bass_pan = 0.5
    drum_pan = motif.uniform(0.35, 0.65)

    # melody voice: seeded note loop on the struck slots of an eighth-note grid
    for i in range(n_notes):
        if not rhythm[i % len(rhythm)]:
            continue
        start = int(i * note_len * sr)
        dur = min(int(note_len * sr), n - start)
        if dur <= 0:
            break
        deg = PENTATONIC[degrees[i % len(degrees)]]
        freq = root * octave * 2.0 ** (deg / 12.0)
        vel = 0.5 * (1.0 + 0.06 * (orn.random() - 0.5))  # small per-occurrence jitter
        tone = _tone(freq, dur, sr, harmonics) * _envelope(dur, sr) * vel
        left[start : start + dur] += tone * np.cos(melody_pan * np.pi / 2)
        right[start : start + dur] += tone * np.sin(melody_pan * np.pi / 2)

    # bass voice: label-seeded beat pattern and note length
    bass_pattern = motif.random(8) < 0.8
    if not bass_pattern.any():
        bass_pattern[0] = True
    bass_len = beat * float(motif.choice([0.5, 1.0, 1.5]))
    for i in range(max(1, int(seconds / beat))):
        if not bass_pattern[i % len(bass_pattern)]:
            continue
        start = int(i * beat * sr)
        dur = min(int(bass_len * sr), n - start)
        if dur <= 0:
            break
        tone = _tone(root / 2.0, dur, sr, np.array([0.8, 0.2])) * _envelope(dur, sr, decay=2.0) * 0.4
        left[start : start + dur] += tone * np.cos(bass_pan * np.pi / 2)
        right[start : start + dur] += tone * np.sin(bass_pan * np.pi / 2)

    # percussion: short band-passed bursts on beats; the band is part of the
    # motif so different labels stay spectrally distinct even on the beat grid
    if "drums" in plan.instruments:
        burst_rng = np.random.default_rng(motif_seed + 1)
        burst = burst_rng.standard_normal(int(0.03 * sr))
        f0 = float(burst_rng.uniform(700.0, min(3200.0, 0.4 * sr)))
        spec = np.fft.rfft(burst)
        freqs = np.fft.rfftfreq(len(burst), 1.0 / sr)
        spec[(freqs < f0) | (freqs > 1.8 * f0)] = 0.0
        burst = np.fft.irfft(spec, n=len(burst))
        burst /= max(1e-9, np.abs(burst).max())
        burst *= np.exp(-np.arange(len(burst)) / (0.008 * sr))
        drum_pattern = burst_rng.random(8) < 0.7
        if not drum_pattern.any():
            drum_pattern[0] = True
        for i in range(max(1, int(seconds / beat))):
            if not drum_pattern[i % len(drum_pattern)]:
                continue
            start = int(i * beat * sr)
            dur = min(len(burst), n - start)
            if dur <= 0:
                break
            left[start : start + dur] += 0.5 * burst[:dur] * np.cos(drum_pan * np.pi / 2)
            right[start : start + dur] += 0.5 * burst[:dur] * np.sin(drum_pan * np.pi / 2)

    return np.stack([left, right])


def synthesize_track(plan: SectionPlan, sample_rate: int, seed: int) -> Waveform:
    """Render a section plan to stereo audio, bit-deterministic per seed."""
    if plan.total_seconds <= 0:
        raise DataError("plan has zero total duration")
    sections = []
    for i, (label, dur) in enumerate(zip(plan.labels, plan.durations)):
        ornament_seed = int(np.random.default_rng([seed, i]).integers(0, 2**31))
        sections.append(
            _render_section(label, dur, plan.motif_seeds[label], ornament_seed, plan, sample_rate)
        )
    data = np.concatenate(sections, axis=1)
    peak = np.abs(data).max()
    if peak > 0:
        data = 0.7 * data / peak
    return Waveform(data.astype(np.float32), sample_rate)

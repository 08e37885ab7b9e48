"""Corpus generation and the JSON-lines manifest schema.

Manifest records carry: id, audio_path (relative to the manifest), metadata
(description/genre/moods/instruments/bpm), the section plan, split tag,
seconds, and duplicate_of for injected exact duplicates. External corpora can
be substituted by writing the same JSONL schema.
"""

from __future__ import annotations

import json
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..audio import write_wav
from ..conditioning.metadata import TrackMetadata
from ..errors import DataError
from .synth import SectionPlan, synthesize_track

GENRES = ["rock", "pop", "jazz", "electronic", "classical", "ambient"]
MOODS = ["uplifting", "dark", "calm", "energetic", "melancholic", "dreamy"]
INSTRUMENTS = ["guitar", "piano", "drums", "bass", "synth", "strings", "flute"]
FORMS = [
    ["A", "B", "A"],
    ["A", "A", "B"],
    ["A", "B", "A", "B"],
    ["A", "B", "C", "A"],
    ["A", "A", "B", "A"],
    ["A", "B", "C"],
]
BPM_BY_GENRE = {
    "rock": (100, 140),
    "pop": (90, 125),
    "jazz": (70, 120),
    "electronic": (110, 150),
    "classical": (60, 100),
    "ambient": (60, 90),
}


@dataclass
class TrackRecord:
    track_id: str
    audio_path: str  # relative to the manifest file
    metadata: TrackMetadata
    plan: SectionPlan
    split: str
    seconds: float
    duplicate_of: str | None = None

    def to_dict(self) -> dict:
        return {
            "track_id": self.track_id,
            "audio_path": self.audio_path,
            "metadata": self.metadata.to_dict(),
            "plan": self.plan.to_dict(),
            "split": self.split,
            "seconds": self.seconds,
            "duplicate_of": self.duplicate_of,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrackRecord":
        return cls(
            track_id=d["track_id"],
            audio_path=d["audio_path"],
            metadata=TrackMetadata.from_dict(d["metadata"]),
            plan=SectionPlan.from_dict(d["plan"]),
            split=d["split"],
            seconds=float(d["seconds"]),
            duplicate_of=d.get("duplicate_of"),
        )


@dataclass
class CorpusManifest:
    root: Path
    records: list[TrackRecord] = field(default_factory=list)
    sample_rate: int = 8000
    seed: int = 0

    def split(self, name: str) -> list[TrackRecord]:
        return [r for r in self.records if r.split == name]

    def resolve(self, rec: TrackRecord) -> Path:
        return self.root / rec.audio_path

    def duplicate_pairs(self) -> list[tuple[str, str]]:
        return [(r.duplicate_of, r.track_id) for r in self.records if r.duplicate_of]


def save_manifest(manifest: CorpusManifest, path: Path | str | None = None) -> Path:
    path = Path(path) if path else manifest.root / "manifest.jsonl"
    with open(path, "w") as f:
        f.write(json.dumps({"sample_rate": manifest.sample_rate, "seed": manifest.seed}) + "\n")
        for rec in manifest.records:
            f.write(json.dumps(rec.to_dict()) + "\n")
    return path


def load_manifest(path: Path | str) -> CorpusManifest:
    path = Path(path)
    with open(path) as f:
        lines = [ln for ln in f if ln.strip()]
    header = json.loads(lines[0])
    records = [TrackRecord.from_dict(json.loads(ln)) for ln in lines[1:]]
    return CorpusManifest(
        root=path.parent,
        records=records,
        sample_rate=int(header["sample_rate"]),
        seed=int(header.get("seed", 0)),
    )


def _sample_plan(rng: np.random.Generator, target_seconds: float) -> SectionPlan:
    form = FORMS[int(rng.integers(0, len(FORMS)))]
    genre = GENRES[int(rng.integers(0, len(GENRES)))]
    lo, hi = BPM_BY_GENRE[genre]
    bpm = float(rng.integers(lo, hi + 1))
    moods = list(rng.choice(MOODS, size=int(rng.integers(1, 3)), replace=False))
    instruments = list(rng.choice(INSTRUMENTS, size=int(rng.integers(2, 4)), replace=False))
    sec = target_seconds / len(form)
    durations = [sec] * len(form)
    seeds = {lab: int(rng.integers(0, 2**31)) for lab in sorted(set(form))}
    return SectionPlan(
        labels=list(form),
        durations=durations,
        motif_seeds=seeds,
        genre=genre,
        moods=moods,
        instruments=instruments,
        bpm=bpm,
    )


def _metadata_for(plan: SectionPlan, rng: np.random.Generator) -> TrackMetadata:
    mood = plan.moods[0] if plan.moods else "calm"
    inst = ", ".join(plan.instruments[:2])
    templates = [
        f"A {mood} {plan.genre} track featuring {inst}",
        f"{plan.genre.capitalize()} piece with {inst}, {mood} feel",
        f"Instrumental {plan.genre} with {inst}",
    ]
    return TrackMetadata(
        description=templates[int(rng.integers(0, len(templates)))],
        genre=[plan.genre],
        moods=list(plan.moods),
        instruments=list(plan.instruments),
        bpm=plan.bpm,
    )


def generate_corpus(
    n_tracks: int,
    length_bounds: tuple[float, float],
    out_dir: Path | str,
    seed: int,
    sample_rate: int = 8000,
    duplicate_fraction: float = 0.02,
    split_fractions: tuple[float, float] = (0.8, 0.1),  # train, val; rest is test
) -> CorpusManifest:
    """Write WAVs + JSONL metadata; injects exact-duplicate tracks into train.

    The duplicate count is floor(n_tracks * duplicate_fraction); duplicates
    are bit-exact copies of early train tracks, recorded via duplicate_of.
    """
    out_dir = Path(out_dir)
    if n_tracks < 1:
        raise DataError("need at least one track")
    audio_dir = out_dir / "audio"
    audio_dir.mkdir(parents=True, exist_ok=True)

    n_dup = int(n_tracks * duplicate_fraction)
    n_unique = n_tracks - n_dup
    lo, hi = length_bounds

    records: list[TrackRecord] = []
    for i in range(n_unique):
        rng = np.random.default_rng([seed, i])
        target = float(rng.uniform(lo, hi))
        plan = _sample_plan(rng, target)
        meta = _metadata_for(plan, rng)
        track_id = f"track{i:05d}"
        rel = f"audio/{track_id}.wav"
        wave = synthesize_track(plan, sample_rate, seed=int(rng.integers(0, 2**31)))
        try:
            write_wav(out_dir / rel, wave, fmt="pcm16")
        except OSError as exc:
            raise DataError(f"failed to write {out_dir / rel}: {exc}") from exc

        n_train = int(round(n_unique * split_fractions[0]))
        n_val = int(round(n_unique * split_fractions[1]))
        split = "train" if i < n_train else ("val" if i < n_train + n_val else "test")
        records.append(TrackRecord(track_id, rel, meta, plan, split, wave.seconds))

    train_ids = [r for r in records if r.split == "train"]
    for j in range(n_dup):
        src = train_ids[j % len(train_ids)]
        track_id = f"track{n_unique + j:05d}"
        rel = f"audio/{track_id}.wav"
        shutil.copyfile(out_dir / src.audio_path, out_dir / rel)  # bit-exact duplicate
        records.append(
            TrackRecord(track_id, rel, src.metadata, src.plan, "train", src.seconds, duplicate_of=src.track_id)
        )

    manifest = CorpusManifest(root=out_dir, records=records, sample_rate=sample_rate, seed=seed)
    save_manifest(manifest)
    return manifest

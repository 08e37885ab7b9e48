"""Track metadata and randomized prompt-string synthesis.

Half of the prompts carry metadata-type prefixes joined by '|'
("Instruments: Guitar, Drums|Moods: Uplifting"); the other half are plain
comma-joined values. List values and field order are shuffled, a random
upper/lower case transform may apply, and a random subset of fields is kept.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..errors import DataError

FIELD_LABELS = ("Description", "Genre", "Moods", "Instruments", "BPM")
KEEP_FIELD_PROB = 0.8


@dataclass
class TrackMetadata:
    description: str = ""
    genre: list[str] = field(default_factory=list)
    moods: list[str] = field(default_factory=list)
    instruments: list[str] = field(default_factory=list)
    bpm: float | None = None

    def fields_present(self) -> list[tuple[str, list[str]]]:
        out: list[tuple[str, list[str]]] = []
        if self.description.strip():
            out.append(("Description", [self.description.strip()]))
        if self.genre:
            out.append(("Genre", list(self.genre)))
        if self.moods:
            out.append(("Moods", list(self.moods)))
        if self.instruments:
            out.append(("Instruments", list(self.instruments)))
        if self.bpm is not None:
            out.append(("BPM", [str(int(round(self.bpm)))]))
        return out

    def to_dict(self) -> dict:
        return {
            "description": self.description,
            "genre": self.genre,
            "moods": self.moods,
            "instruments": self.instruments,
            "bpm": self.bpm,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrackMetadata":
        return cls(
            description=d.get("description", ""),
            genre=list(d.get("genre", [])),
            moods=list(d.get("moods", [])),
            instruments=list(d.get("instruments", [])),
            bpm=d.get("bpm"),
        )


@dataclass
class PromptString:
    text: str
    typed: bool  # metadata-type prefixes included
    case_transform: str  # 'none' | 'upper' | 'lower'
    seed: int


def format_prompt(fields: list[tuple[str, list[str]]], typed: bool, case_transform: str = "none") -> str:
    """Deterministic core formatter; field/value order is taken as given."""
    if typed:
        text = "|".join(f"{label}: {', '.join(values)}" for label, values in fields)
    else:
        text = ", ".join(v for _, values in fields for v in values)
    if case_transform == "upper":
        return text.upper()
    if case_transform == "lower":
        return text.lower()
    return text


def build_prompt(m: TrackMetadata, seed: int) -> PromptString:
    present = m.fields_present()
    if not present:
        raise DataError("cannot build a prompt from all-empty metadata")
    rng = random.Random(seed)

    kept = [fv for fv in present if rng.random() < KEEP_FIELD_PROB]
    while not kept:
        kept = [fv for fv in present if rng.random() < KEEP_FIELD_PROB]

    shuffled = []
    for label, values in kept:
        values = list(values)
        rng.shuffle(values)
        shuffled.append((label, values))
    rng.shuffle(shuffled)

    typed = rng.random() < 0.5
    case_transform = rng.choice(("none", "upper", "lower"))
    text = format_prompt(shuffled, typed, case_transform)
    return PromptString(text=text, typed=typed, case_transform=case_transform, seed=seed)

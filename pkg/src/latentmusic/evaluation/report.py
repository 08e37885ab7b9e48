"""Metric report container emitted as JSON by the evaluation commands."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import DataError

COMPARABILITY_NOTE = (
    "Values computed with the in-repo mini embedder/tagger on the local corpus; "
    "comparative across models on this corpus only, not comparable to published "
    "absolute numbers."
)


@dataclass
class MetricReport:
    name: str
    value: float
    per_item: list[float] = field(default_factory=list)
    config_hash: str = ""
    reduction: str = "mean"
    note: str = COMPARABILITY_NOTE

    def __post_init__(self) -> None:
        if self.per_item and self.reduction == "mean":
            agg = sum(self.per_item) / len(self.per_item)
            if abs(agg - self.value) > 1e-6 * max(1.0, abs(self.value)):
                raise DataError(
                    f"report {self.name!r}: aggregate {self.value} != mean of per-item values {agg}"
                )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "per_item": self.per_item,
            "config_hash": self.config_hash,
            "reduction": self.reduction,
            "note": self.note,
        }


def save_reports(reports: list[MetricReport], path: str | Path) -> None:
    with open(path, "w") as f:
        json.dump({r.name: r.to_dict() for r in reports}, f, indent=2)

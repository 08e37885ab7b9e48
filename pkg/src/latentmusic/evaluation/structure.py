"""Binary self-similarity matrices and repeated-section detection.

Frames are log-mel vectors stacked over a short time delay; cosine similarity
is binarized by keeping the top-kappa fraction of neighbor pairs. Repeats of
earlier sections show up as off-diagonal stripes parallel to the main
diagonal; detect_repetition extracts them as (start1, start2, length) runs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..audio import Waveform
from ..dsp import log_mel_frames
from ..errors import DataError
from ..data.synth import SectionPlan


@dataclass
class SsmConfig:
    n_fft: int = 512
    hop: int = 512
    n_mels: int = 32
    delay: int = 4  # stacked consecutive frames
    kappa: float = 0.04  # kept fraction of off-diagonal pairs
    l_min: int = 8  # minimal stripe length, frames
    binarize: str = "global"  # 'global' keeps density == kappa and symmetry; 'row' is per-row top-kappa


@dataclass
class BinarySSM:
    matrix: np.ndarray  # [N, N] bool
    frame_rate: float
    config: SsmConfig

    def __post_init__(self) -> None:
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise DataError("SSM must be square")

    def save_pgm(self, path: str | Path) -> None:
        n = self.matrix.shape[0]
        img = np.where(self.matrix, 255, 0).astype(np.uint8)
        with open(path, "wb") as f:
            f.write(f"P5\n{n} {n}\n255\n".encode())
            f.write(img.tobytes())

    def save_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            for row in self.matrix.astype(int):
                writer.writerow(row.tolist())


def compute_ssm(w: Waveform, cfg: SsmConfig | None = None) -> BinarySSM:
    cfg = cfg or SsmConfig()
    mono = torch.from_numpy(w.data).mean(dim=0)
    mel = log_mel_frames(mono[None, :], w.sample_rate, cfg.n_fft, cfg.hop, cfg.n_mels)[0].numpy()
    n_frames = mel.shape[-1]
    if n_frames < cfg.delay + 2:
        raise DataError(f"track too short for SSM: {n_frames} frames < delay window")

    # time-delay embedding: stack m consecutive frames
    stacked = np.concatenate([mel[:, i : n_frames - cfg.delay + 1 + i] for i in range(cfg.delay)], axis=0).T
    stacked = stacked - stacked.mean(axis=0, keepdims=True)
    norms = np.linalg.norm(stacked, axis=1, keepdims=True)
    unit = stacked / np.maximum(norms, 1e-9)
    sim = unit @ unit.T
    n = sim.shape[0]

    off = ~np.eye(n, dtype=bool)
    if cfg.binarize == "global":
        # threshold at the global (1 - kappa) quantile: symmetric, density == kappa
        thresh = np.quantile(sim[off], 1.0 - cfg.kappa)
        binary = sim >= thresh
    elif cfg.binarize == "row":
        k = max(1, int(round(cfg.kappa * (n - 1))))
        binary = np.zeros_like(sim, dtype=bool)
        for i in range(n):
            order = np.argsort(sim[i])[::-1]
            order = order[order != i][:k]
            binary[i, order] = True
        binary |= binary.T
    else:
        raise DataError(f"unknown binarize mode {cfg.binarize!r}")
    np.fill_diagonal(binary, True)
    binary &= binary.T | np.eye(n, dtype=bool)

    frame_rate = w.sample_rate / cfg.hop
    return BinarySSM(matrix=binary, frame_rate=frame_rate, config=cfg)


@dataclass
class Stripe:
    start1: int  # frame index of the earlier occurrence
    start2: int  # frame index of the repeat
    length: int

    @property
    def offset(self) -> int:
        return self.start2 - self.start1


def detect_repetition(ssm: BinarySSM, l_min: int | None = None) -> list[Stripe]:
    """Find off-diagonal stripes of length >= l_min, merged across nearby diagonals."""
    l_min = l_min if l_min is not None else ssm.config.l_min
    m = ssm.matrix
    n = m.shape[0]
    raw: list[Stripe] = []
    for d in range(1, n):
        diag = np.diagonal(m, offset=d)
        run = 0
        for i, val in enumerate(list(diag) + [False]):
            if val:
                run += 1
            else:
                if run >= l_min:
                    raw.append(Stripe(start1=i - run, start2=i - run + d, length=run))
                run = 0

    # thick stripes register on adjacent diagonals: cluster and keep the longest
    raw.sort(key=lambda s: -s.length)
    kept: list[Stripe] = []
    for s in raw:
        clustered = False
        for t in kept:
            if abs(s.offset - t.offset) <= 3 and _overlap(s, t) > 0:
                clustered = True
                break
        if not clustered:
            kept.append(s)
    kept.sort(key=lambda s: (s.start1, s.start2))
    return kept


def _overlap(a: Stripe, b: Stripe) -> int:
    lo = max(a.start1, b.start1)
    hi = min(a.start1 + a.length, b.start1 + b.length)
    return max(0, hi - lo)


def expected_repeats(plan: SectionPlan, frame_rate: float) -> list[Stripe]:
    """Ground-truth repeat stripes implied by a section plan."""
    starts = np.concatenate([[0.0], np.cumsum(plan.durations)[:-1]])
    out = []
    for i in range(len(plan.labels)):
        for j in range(i + 1, len(plan.labels)):
            if plan.labels[i] == plan.labels[j]:
                length = int(min(plan.durations[i], plan.durations[j]) * frame_rate)
                out.append(
                    Stripe(
                        start1=int(starts[i] * frame_rate),
                        start2=int(starts[j] * frame_rate),
                        length=length,
                    )
                )
    return out


def match_stripes(
    detected: list[Stripe], expected: list[Stripe], tol_frames: int = 6
) -> tuple[int, int]:
    """(matched detected, matched expected) with offset+position tolerance."""

    def matches(d: Stripe, e: Stripe) -> bool:
        if abs(d.offset - e.offset) > tol_frames:
            return False
        lo = max(d.start1, e.start1)
        hi = min(d.start1 + d.length, e.start1 + e.length)
        return hi - lo > 0.3 * min(d.length, e.length)

    matched_det = sum(1 for d in detected if any(matches(d, e) for e in expected))
    matched_exp = sum(1 for e in expected if any(matches(d, e) for d in detected))
    return matched_det, matched_exp

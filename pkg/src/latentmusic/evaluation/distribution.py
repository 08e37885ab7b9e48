"""Distribution-level generation metrics: Frechet distance, tag KL, prompt match.

All three run on the in-repo mini embedder / tag classifier, so reported
values compare models on the same corpus and are never comparable to
published absolute numbers from third-party embedders.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..dsp import log_mel_frames
from ..errors import DataError

# no-singing prompt filter word list
VOCAL_WORDS = [
    "speech",
    "speech synthesizer",
    "hubbub",
    "babble",
    "singing",
    "male",
    "man",
    "female",
    "woman",
    "child",
    "kid",
    "synthetic singing",
    "choir",
    "chant",
    "mantra",
    "rapping",
    "humming",
    "groan",
    "grunt",
    "vocal",
    "vocalist",
    "singer",
    "voice",
    "acapella",
]
_VOCAL_RE = re.compile(
    r"\b(" + "|".join(re.escape(w) for w in sorted(VOCAL_WORDS, key=len, reverse=True)) + r")\b",
    re.IGNORECASE,
)


def filter_vocal_prompts(prompts: list[str]) -> list[str]:
    """Drop prompts containing any word from the vocal/no-singing list."""
    return [p for p in prompts if not _VOCAL_RE.search(p)]


def _sqrtm_psd(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(m)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(embeds_a: np.ndarray, embeds_b: np.ndarray, eps: float = 1e-6) -> float:
    """||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a S_b)^{1/2}).

    Covariances get an eps*I diagonal regularizer; the matrix square root uses
    a symmetric eigendecomposition of S_a^{1/2} S_b S_a^{1/2}.
    """
    a = np.asarray(embeds_a, dtype=np.float64)
    b = np.asarray(embeds_b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise DataError("embedding sets must be 2-d with a common feature dim")
    if a.shape[0] < 2 or b.shape[0] < 2:
        raise DataError("frechet_distance needs at least 2 samples per set")
    mu_a, mu_b = a.mean(0), b.mean(0)
    cov_a = np.cov(a, rowvar=False) + eps * np.eye(a.shape[1])
    cov_b = np.cov(b, rowvar=False) + eps * np.eye(b.shape[1])
    root_a = _sqrtm_psd(cov_a)
    inner = root_a @ cov_b @ root_a
    tr_cross = np.sqrt(np.clip(np.linalg.eigvalsh(inner), 0.0, None)).sum()
    diff = mu_a - mu_b
    return float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * tr_cross)


def tag_kl(p_ref: np.ndarray, p_gen: np.ndarray, eps: float = 1e-8) -> float:
    """Mean over paired items of KL(p_ref || p_gen) on tag posteriors."""
    p = np.asarray(p_ref, dtype=np.float64)
    q = np.asarray(p_gen, dtype=np.float64)
    if p.shape != q.shape:
        raise DataError(f"tag label spaces disagree: {p.shape} vs {q.shape}")
    p = (p + eps) / (p + eps).sum(axis=-1, keepdims=True)
    q = (q + eps) / (q + eps).sum(axis=-1, keepdims=True)
    return float((p * np.log(p / q)).sum(axis=-1).mean())


def embed_score(text_embeds: torch.Tensor, audio_embeds: torch.Tensor) -> float:
    """Mean cosine similarity between paired prompt and generation embeddings."""
    if text_embeds.shape != audio_embeds.shape:
        raise DataError("embed_score needs aligned lists")
    t = F.normalize(text_embeds, dim=-1)
    a = F.normalize(audio_embeds, dim=-1)
    return float((t * a).sum(dim=-1).mean())


@dataclass
class TagFeatureConfig:
    sample_rate: int = 8000
    n_fft: int = 512
    hop: int = 256
    n_mels: int = 32


class TagClassifier(nn.Module):
    """Small softmax classifier over log-mel statistics, trained on corpus labels."""

    def __init__(self, labels: list[str], feat_cfg: TagFeatureConfig | None = None):
        super().__init__()
        if not labels:
            raise DataError("tag classifier needs at least one label")
        self.labels = list(labels)
        self.feat_cfg = feat_cfg or TagFeatureConfig()
        dim = 2 * self.feat_cfg.n_mels  # mean + std over time
        self.linear = nn.Linear(dim, len(self.labels))

    def features(self, waves: torch.Tensor) -> torch.Tensor:
        cfg = self.feat_cfg
        mono = waves.mean(dim=1)
        mel = log_mel_frames(mono, cfg.sample_rate, cfg.n_fft, cfg.hop, cfg.n_mels)
        return torch.cat([mel.mean(dim=-1), mel.std(dim=-1)], dim=-1)

    def predict_proba(self, waves: torch.Tensor) -> np.ndarray:
        with torch.no_grad():
            logits = self.linear(self.features(waves))
            return torch.softmax(logits, dim=-1).numpy()

    def fit(self, waves: torch.Tensor, label_ids: torch.Tensor, steps: int = 300, lr: float = 0.05, seed: int = 0) -> float:
        torch.manual_seed(seed)
        feats = self.features(waves).detach()
        opt = torch.optim.Adam(self.parameters(), lr=lr)
        loss = torch.zeros(())
        for _ in range(steps):
            opt.zero_grad()
            loss = F.cross_entropy(self.linear(feats), label_ids)
            loss.backward()
            opt.step()
        return float(loss.detach())

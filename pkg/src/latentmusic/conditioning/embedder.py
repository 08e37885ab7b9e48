"""Mini contrastive text-audio embedder.

A byte-level tokenizer with a small learned merge table feeds a small
transformer text encoder; a log-mel conv stack encodes audio. Both project
into a shared joint space (L2-normalized) and train with a symmetric
temperature-scaled cross-entropy over cosine similarities. Cross-attention
text features are tapped from the next-to-last transformer layer.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import torch
import torch.nn.functional as F
from torch import nn

from ..dsp import log_mel_frames
from ..errors import ConfigurationError, DataError
from ..nn import attention
from ..nn.checkpoint import load_checkpoint, load_into_module, module_tensors, save_checkpoint
from .timing import sinusoidal_embed


class ByteTokenizer:
    """Byte-level tokenizer with a learned pair-merge table (BPE-style)."""

    BASE = 256

    def __init__(self, merges: list[tuple[int, int]] | None = None):
        self.merges = [tuple(m) for m in (merges or [])]

    @property
    def vocab_size(self) -> int:
        return self.BASE + len(self.merges) + 1  # +1 for the null token

    @property
    def null_id(self) -> int:
        return self.BASE + len(self.merges)

    @classmethod
    def train(cls, texts: list[str], n_merges: int = 128) -> "ByteTokenizer":
        seqs = [list(t.encode("utf-8")) for t in texts if t]
        merges: list[tuple[int, int]] = []
        for i in range(n_merges):
            counts: Counter = Counter()
            for s in seqs:
                counts.update(zip(s, s[1:]))
            if not counts:
                break
            (a, b), freq = max(counts.items(), key=lambda kv: (kv[1], -kv[0][0], -kv[0][1]))
            if freq < 2:
                break
            new_id = cls.BASE + i
            merges.append((a, b))
            seqs = [_apply_merge(s, a, b, new_id) for s in seqs]
        return cls(merges)

    def encode(self, text: str) -> list[int]:
        if not text:
            return [self.null_id]
        seq = list(text.encode("utf-8"))
        for i, (a, b) in enumerate(self.merges):
            seq = _apply_merge(seq, a, b, self.BASE + i)
        return seq

    def merges_tensor(self) -> torch.Tensor:
        if not self.merges:
            return torch.zeros(0, 2, dtype=torch.int64)
        return torch.tensor(self.merges, dtype=torch.int64)

    @classmethod
    def from_tensor(cls, t: torch.Tensor) -> "ByteTokenizer":
        return cls([(int(a), int(b)) for a, b in t.tolist()])


def _apply_merge(seq: list[int], a: int, b: int, new_id: int) -> list[int]:
    out = []
    i = 0
    while i < len(seq):
        if i + 1 < len(seq) and seq[i] == a and seq[i + 1] == b:
            out.append(new_id)
            i += 2
        else:
            out.append(seq[i])
            i += 1
    return out


@dataclass
class EmbedderConfig:
    sample_rate: int = 8000
    text_dim: int = 64
    text_layers: int = 3
    text_heads: int = 4
    max_text_len: int = 96
    n_merges: int = 128
    joint_dim: int = 64
    audio_dim: int = 64
    n_mels: int = 40
    mel_fft: int = 512
    mel_hop: int = 256
    temperature_init: float = 0.07


@dataclass
class TextEmbeddingSeq:
    """Per-token features from the penultimate layer, plus a pooled joint vector."""

    tokens: torch.Tensor  # [B, T, text_dim]
    mask: torch.Tensor  # [B, T] bool, True = real token
    pooled: torch.Tensor  # [B, joint_dim], unit norm


class _SelfAttnLayer(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        if dim % heads != 0:
            raise ConfigurationError("text_dim must be divisible by text_heads")
        self.heads = heads
        self.norm1 = nn.LayerNorm(dim)
        self.qkv = nn.Linear(dim, 3 * dim)
        self.out = nn.Linear(dim, dim)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(nn.Linear(dim, 4 * dim), nn.GELU(), nn.Linear(4 * dim, dim))

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        b, t, d = x.shape
        h = self.norm1(x)
        q, k, v = self.qkv(h).chunk(3, dim=-1)

        def split(u):
            return u.view(b, t, self.heads, d // self.heads).transpose(1, 2)

        att = attention(split(q), split(k), split(v), mask)
        x = x + self.out(att.transpose(1, 2).reshape(b, t, d))
        return x + self.mlp(self.norm2(x))


class TextEncoder(nn.Module):
    def __init__(self, cfg: EmbedderConfig, vocab_size: int):
        super().__init__()
        self.cfg = cfg
        self.embedding = nn.Embedding(vocab_size, cfg.text_dim)
        pos = sinusoidal_embed(torch.arange(cfg.max_text_len).float(), cfg.text_dim)
        self.register_buffer("pos", pos, persistent=False)
        self.layers = nn.ModuleList(
            [_SelfAttnLayer(cfg.text_dim, cfg.text_heads) for _ in range(cfg.text_layers)]
        )
        self.final_norm = nn.LayerNorm(cfg.text_dim)
        self.proj = nn.Linear(cfg.text_dim, cfg.joint_dim)

    def forward(self, tokens: torch.Tensor, mask: torch.Tensor) -> tuple[list[torch.Tensor], torch.Tensor]:
        x = self.embedding(tokens) + self.pos[: tokens.shape[1]].to(self.embedding.weight.dtype)
        states = []
        for layer in self.layers:
            x = layer(x, mask)
            states.append(x)
        pooled = (self.final_norm(x) * mask[..., None]).sum(1) / mask.sum(1, keepdim=True).clamp_min(1)
        pooled = F.normalize(self.proj(pooled), dim=-1)
        return states, pooled


class AudioEncoder(nn.Module):
    def __init__(self, cfg: EmbedderConfig):
        super().__init__()
        self.cfg = cfg
        d = cfg.audio_dim
        self.conv1 = nn.Conv1d(cfg.n_mels, d, 5, stride=2, padding=2)
        self.conv2 = nn.Conv1d(d, d, 5, stride=2, padding=2)
        self.proj = nn.Linear(d, cfg.joint_dim)

    def frame_features(self, x: torch.Tensor) -> torch.Tensor:
        """Waveform [B, C, T] -> conv features [B, audio_dim, frames]."""
        if x.shape[-1] < self.cfg.mel_hop:
            raise DataError(
                f"audio too short to embed: {x.shape[-1]} samples < one feature frame"
            )
        mono = x.mean(dim=1)
        mel = log_mel_frames(mono, self.cfg.sample_rate, self.cfg.mel_fft, self.cfg.mel_hop, self.cfg.n_mels)
        h = F.gelu(self.conv1(mel))
        return F.gelu(self.conv2(h))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.frame_features(x)
        return F.normalize(self.proj(h.mean(dim=-1)), dim=-1)


class MiniEmbedder(nn.Module):
    """Joint text/audio embedding model with a learnable temperature."""

    def __init__(self, cfg: EmbedderConfig, tokenizer: ByteTokenizer):
        super().__init__()
        self.cfg = cfg
        self.tokenizer = tokenizer
        self.text_encoder = TextEncoder(cfg, tokenizer.vocab_size)
        self.audio_encoder = AudioEncoder(cfg)
        self.log_temp = nn.Parameter(torch.tensor(math.log(1.0 / cfg.temperature_init)))

    def tokenize(self, prompts: list[str]) -> tuple[torch.Tensor, torch.Tensor]:
        seqs = [self.tokenizer.encode(p)[: self.cfg.max_text_len] for p in prompts]
        t_max = max(len(s) for s in seqs)
        tokens = torch.zeros(len(seqs), t_max, dtype=torch.int64)
        mask = torch.zeros(len(seqs), t_max, dtype=torch.bool)
        for i, s in enumerate(seqs):
            tokens[i, : len(s)] = torch.tensor(s)
            mask[i, : len(s)] = True
        return tokens, mask

    def embed_text(self, prompts: list[str]) -> TextEmbeddingSeq:
        tokens, mask = self.tokenize(prompts)
        states, pooled = self.text_encoder(tokens, mask)
        features = states[-2] if len(states) >= 2 else states[-1]  # next-to-last layer
        return TextEmbeddingSeq(tokens=features, mask=mask, pooled=pooled)

    def embed_audio(self, x: torch.Tensor) -> torch.Tensor:
        return self.audio_encoder(x)

    def temperature(self) -> torch.Tensor:
        return torch.exp(self.log_temp)

    def save(self, path: str | Path, meta: dict | None = None) -> None:
        tensors = dict(module_tensors(self))
        tensors["tokenizer.merges"] = self.tokenizer.merges_tensor()
        save_checkpoint(path, tensors, self.cfg, meta)

    @classmethod
    def load(cls, path: str | Path, cfg: EmbedderConfig) -> "MiniEmbedder":
        ck = load_checkpoint(path, expected_config=cfg)
        tokenizer = ByteTokenizer.from_tensor(ck.tensors.pop("tokenizer.merges"))
        model = cls(cfg, tokenizer)
        load_into_module(model, ck.tensors)
        return model


def contrastive_loss(
    text_emb: torch.Tensor, audio_emb: torch.Tensor, log_temp: torch.Tensor | float = 0.0
) -> torch.Tensor:
    """Symmetric InfoNCE over temperature-scaled cosine similarities.

    Rows of the two batches are aligned pairs; batch size must be >= 2.
    """
    if text_emb.shape != audio_emb.shape:
        raise DataError("contrastive batches must have matching shapes")
    n = text_emb.shape[0]
    if n < 2:
        raise DataError("contrastive loss needs a batch of at least 2 pairs")
    scale = torch.exp(log_temp) if isinstance(log_temp, torch.Tensor) else math.exp(log_temp)
    logits = scale * text_emb @ audio_emb.T
    labels = torch.arange(n)
    return 0.5 * (F.cross_entropy(logits, labels) + F.cross_entropy(logits.T, labels))

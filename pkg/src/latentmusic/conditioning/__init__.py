from .metadata import TrackMetadata, PromptString, build_prompt, format_prompt
from .embedder import (
    ByteTokenizer,
    EmbedderConfig,
    MiniEmbedder,
    TextEmbeddingSeq,
    contrastive_loss,
)
from .timing import TimingCondition, TimingEmbedder, sinusoidal_embed

__all__ = [
    "TrackMetadata",
    "PromptString",
    "build_prompt",
    "format_prompt",
    "ByteTokenizer",
    "EmbedderConfig",
    "MiniEmbedder",
    "TextEmbeddingSeq",
    "contrastive_loss",
    "TimingCondition",
    "TimingEmbedder",
    "sinusoidal_embed",
]

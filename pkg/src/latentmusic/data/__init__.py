from .synth import SectionPlan, synthesize_track
from .corpus import CorpusManifest, TrackRecord, generate_corpus, load_manifest, save_manifest
from .loader import Batch, batch_loader, crop_batch, window_batch

__all__ = [
    "SectionPlan",
    "synthesize_track",
    "CorpusManifest",
    "TrackRecord",
    "generate_corpus",
    "load_manifest",
    "save_manifest",
    "Batch",
    "batch_loader",
    "crop_batch",
    "window_batch",
]

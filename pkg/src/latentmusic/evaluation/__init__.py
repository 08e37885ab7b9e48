from .recon import SI_SDR_SENTINEL_DB, mel_distance, si_sdr, stft_distance
from .distribution import (
    TagClassifier,
    VOCAL_WORDS,
    embed_score,
    filter_vocal_prompts,
    frechet_distance,
    tag_kl,
)
from .structure import (
    BinarySSM,
    SsmConfig,
    compute_ssm,
    detect_repetition,
    expected_repeats,
    match_stripes,
)
from .memorization import NearestNeighborHit, find_duplicates, memorization_scan
from .report import MetricReport

__all__ = [
    "stft_distance",
    "mel_distance",
    "si_sdr",
    "SI_SDR_SENTINEL_DB",
    "frechet_distance",
    "tag_kl",
    "TagClassifier",
    "embed_score",
    "filter_vocal_prompts",
    "VOCAL_WORDS",
    "BinarySSM",
    "SsmConfig",
    "compute_ssm",
    "detect_repetition",
    "expected_repeats",
    "match_stripes",
    "NearestNeighborHit",
    "find_duplicates",
    "memorization_scan",
    "MetricReport",
]

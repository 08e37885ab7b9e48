from .model import (
    AudioCodec,
    CodecConfig,
    GaussianPosterior,
    Snake,
    ms_inverse,
    ms_transform,
    sample_posterior,
)
from .losses import (
    DiscriminatorSet,
    MultiResolutionStftLoss,
    a_weighting,
    kl_loss,
)

__all__ = [
    "AudioCodec",
    "CodecConfig",
    "GaussianPosterior",
    "Snake",
    "ms_transform",
    "ms_inverse",
    "sample_posterior",
    "MultiResolutionStftLoss",
    "DiscriminatorSet",
    "a_weighting",
    "kl_loss",
]

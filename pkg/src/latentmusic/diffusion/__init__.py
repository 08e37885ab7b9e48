from .schedule import (
    CosineSchedule,
    cfg_combine,
    noise_to,
    predict_eps,
    predict_x0,
    v_target,
)
from .sampler import SamplerState, audio_to_audio_init, dpm_solver_pp_sample
from .silence import trim_trailing_silence

__all__ = [
    "CosineSchedule",
    "noise_to",
    "v_target",
    "predict_x0",
    "predict_eps",
    "cfg_combine",
    "SamplerState",
    "dpm_solver_pp_sample",
    "audio_to_audio_init",
    "trim_trailing_silence",
]

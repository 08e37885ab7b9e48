from .layers import WNConv1d, WNConvTranspose1d, attention
from .gradcheck import grad_check, GradCheckReport
from .optim import AdamW, Ema, lr_schedule, gamma_for_half_life
from .checkpoint import save_checkpoint, load_checkpoint, config_hash, Checkpoint

__all__ = [
    "WNConv1d",
    "WNConvTranspose1d",
    "attention",
    "grad_check",
    "GradCheckReport",
    "AdamW",
    "Ema",
    "lr_schedule",
    "gamma_for_half_life",
    "save_checkpoint",
    "load_checkpoint",
    "config_hash",
    "Checkpoint",
]

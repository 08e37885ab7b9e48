from .model import ConditioningBundle, DiffusionTransformer, DitBlock, DitConfig, rope_apply

__all__ = ["ConditioningBundle", "DiffusionTransformer", "DitBlock", "DitConfig", "rope_apply"]

"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A model/op was wired with incompatible shapes or settings."""


class DataError(ValueError):
    """Input data violates an operation's preconditions."""


class GradientError(RuntimeError):
    """A gradient came back non-finite; message names the offending tensor."""


class SamplerError(RuntimeError):
    """Sampling produced a non-finite intermediate; message carries the step index."""


class TrainingDiverged(RuntimeError):
    """A training loss went non-finite; the last good checkpoint was kept."""


class CheckpointError(RuntimeError):
    """Checkpoint file is malformed or does not match the expected config."""

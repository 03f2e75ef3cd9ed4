"""Exception types shared across the toolkit."""


class InpaintLabError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(InpaintLabError):
    """Input data violates a shape, range or pairing contract."""


class ConfigurationError(InpaintLabError):
    """A spec or config value is invalid. Carries an optional field path."""

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class ResolutionError(InpaintLabError):
    """Input resolution incompatible with the network's stride pyramid."""


class DegenerateMaskError(InpaintLabError):
    """A masked-region quantity was requested for an empty mask."""


class NumericError(InpaintLabError):
    """NaN/Inf encountered where finite values are required."""


class BalancingError(InpaintLabError):
    """Gradient-based weight balancing hit a dead loss path."""


class IngestionError(InpaintLabError):
    """Dataset files missing or undecodable. Carries offending paths."""

    def __init__(self, message, paths=()):
        self.paths = list(paths)
        super().__init__(message)


class PreprocessingError(InpaintLabError):
    """Image cannot be preprocessed under the selected recipe."""


class EndOfData(InpaintLabError):
    """Batch source exhausted in no-repeat mode."""


class CheckpointError(InpaintLabError):
    """Checkpoint unreadable or written by an incompatible version."""


class PerceptualLoadError(InpaintLabError):
    """Perceptual backbone weights file missing or corrupt."""


class TrainingDiverged(InpaintLabError):
    """Non-finite loss during training. Points at the last good checkpoint."""

    def __init__(self, message, last_checkpoint=None):
        self.last_checkpoint = last_checkpoint
        super().__init__(message)

"""Exception types shared across the package."""


class SpliceError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(SpliceError):
    """Tensor shapes do not conform for the requested operation."""


class LayoutError(SpliceError):
    """Latent codes disagree with (or between) genome layouts."""


class DegenerateBatchError(SpliceError):
    """Batch normalization asked to normalize a batch of fewer than 2 rows."""


class NumericError(SpliceError):
    """A value that must be finite is NaN or infinite."""


class OptimizerError(SpliceError):
    """Non-finite gradient reached the optimizer; names the parameter."""


class DomainError(SpliceError):
    """A probability or other restricted-domain input is out of range."""


class DegenerateAttributeError(SpliceError):
    """An attribute has an empty label side, so its balancedness is undefined."""


class NoUsefulPairsError(SpliceError):
    """The census contains a single label pattern; no pair is useful."""


class DegenerateBoundError(SpliceError):
    """The iterative-schedule expectation bound degenerates (e.g. one attribute);
    callers should fall back to simulation."""


class SchedulerExhaustedError(SpliceError):
    """Every attribute has an empty side; the pair scheduler cannot draw."""


class UsefulnessError(SpliceError):
    """A pair of images was required to differ at an attribute but does not."""


class DatasetSpecError(SpliceError):
    """A synthetic dataset specification is unsupported or inconsistent."""


class ParseError(SpliceError):
    """Malformed external file. Carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(SpliceError):
    """Unknown or malformed configuration key. Carries the key name."""

    def __init__(self, message: str, key: str | None = None):
        self.key = key
        super().__init__(message)


class CheckpointError(SpliceError):
    """Checkpoint file is malformed or truncated."""


class TrainingAbortedError(SpliceError):
    """Training hit a non-finite loss; carries the diagnostic checkpoint path."""

    def __init__(self, message: str, checkpoint_path=None):
        self.checkpoint_path = checkpoint_path
        super().__init__(message)

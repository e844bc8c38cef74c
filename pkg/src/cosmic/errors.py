"""Shared exception hierarchy.

Every toolkit-specific failure derives from CosmicError so callers (and the
CLI) can separate data problems from programming errors.
"""


class CosmicError(Exception):
    """Base class for all toolkit errors."""


class DatasetError(CosmicError, ValueError):
    """Malformed or invalid dataset content."""


class StoreError(CosmicError, ValueError):
    """Feature-store format or lookup failure."""


class ModelError(CosmicError, ValueError):
    """Model configuration or shape problem."""


class TrainingError(CosmicError, RuntimeError):
    """Training-loop failure (bad keys, non-finite loss)."""


class AugmentError(CosmicError, ValueError):
    """Augmentation plan cannot be built or executed."""


class BenchmarkError(CosmicError, ValueError):
    """Benchmark table or correlation failure."""

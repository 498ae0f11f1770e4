class CatGANError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(CatGANError, ValueError):
    """Invalid or inconsistent experiment configuration."""


class CorpusError(CatGANError, ValueError):
    """Malformed corpus, vocabulary or dataset input."""


class ModelError(CatGANError, ValueError):
    """Inconsistent model shapes, bad ids or non-finite activations."""


class ObjectiveError(CatGANError, ValueError):
    pass


class SelectionError(CatGANError):
    pass


class TrainingError(CatGANError):
    pass


class CheckpointError(CatGANError):
    pass


class MetricError(CatGANError, ValueError):
    pass


# Errors the CLI reports as usage problems (exit code 1).
USAGE_ERRORS = (ConfigError, CorpusError)

"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage/config errors exit 1, data errors
exit 2, numeric training failures exit 3.
"""


class XlembedError(Exception):
    pass


class ConfigError(XlembedError):
    """Invalid configuration value, flag combination, or config-file key."""


class DataError(XlembedError):
    """Malformed or inconsistent input data."""


class AlignmentError(DataError):
    """Parallel corpus files disagree on line count."""


class SamplingError(DataError):
    """A sampler was asked to draw from a corpus with no eligible sentences."""


class CompositionError(DataError):
    """A composition function was called on too short a sequence."""


class OovError(DataError):
    """A query token is not in the vocabulary (rare tokens collapse to <unk>)."""


class TrainingError(XlembedError):
    """Numeric failure during optimization (non-finite gradients or weights)."""

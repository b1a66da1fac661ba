"""Exception types shared across the pipeline."""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class DataError(PipelineError):
    """Invalid input data: empty or malformed inputs, violated preconditions."""


class FormatError(DataError):
    """Unparseable or corrupt file content, wrong magic, unsupported version."""


class NumericError(PipelineError):
    """Numerical failure: diverging training, unstable filter design."""

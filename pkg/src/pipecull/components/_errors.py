from __future__ import annotations


class InvalidPipelineError(RuntimeError):
    """The component cannot run on the data it was given."""


class MissingValuesError(InvalidPipelineError):
    """Missing feature values reached a component that rejects them."""


class ArityError(InvalidPipelineError):
    """Feature count at prediction time differs from training time."""

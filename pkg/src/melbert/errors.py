"""Shared exception types.

Everything derives from ValueError so callers can catch broadly, but the
subclasses let tests pin down which contract was violated.
"""


class MelbertError(ValueError):
    """Base class for all package-specific errors."""


class DimensionError(MelbertError):
    """Tensor shapes are incompatible for the requested operation."""


class ConfigError(MelbertError):
    """A configuration value is out of its legal range or unknown."""


class ContractError(MelbertError):
    """A documented precondition of an operation was violated."""


class VocabError(MelbertError):
    """A token id or tag falls outside the vocabulary."""


class FormatError(MelbertError):
    """A file does not conform to its declared on-disk format."""


class TrainingDivergedError(MelbertError):
    """Training produced a non-finite loss; carries step diagnostics."""

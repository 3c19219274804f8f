from __future__ import annotations


class GenomaskError(RuntimeError):
    """Base class for all toolkit errors. `exit_code` is what the CLI exits with."""

    exit_code = 1


class InputError(GenomaskError, ValueError):
    """Malformed sequences, index sets, orderings, files or configs."""

    exit_code = 2


class DegenerateSensitiveError(InputError):
    """The sensitive positions are deterministic, so H(X_K) = 0."""


class CapacityError(GenomaskError):
    """An enumeration, LP or search budget would be exceeded."""

    exit_code = 3


class NumericalError(GenomaskError):
    """A probability left its valid range by more than round-off."""

    exit_code = 4


class ImpossibleContextError(NumericalError):
    """The conditioning event has probability zero."""

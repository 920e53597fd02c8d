"""Exception types shared across the package."""


class VoterMixError(Exception):
    """Base class for all package errors."""


class InvalidSizeError(VoterMixError, ValueError):
    pass


class CapacityError(VoterMixError, ValueError):
    """Raised when an exact computation would exceed its memory guard."""


class ChainSpecError(VoterMixError, ValueError):
    """Malformed chain-spec file; ``lineno`` is 1-based (0 when not tied to a line)."""

    def __init__(self, message, lineno=0):
        self.lineno = lineno
        if lineno:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class ReducibleKernelError(VoterMixError, ValueError):
    pass


class ValidityError(VoterMixError, ValueError):
    """Parameters fall outside the range where a bound is proved."""

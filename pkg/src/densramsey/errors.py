"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class DensRamseyError(Exception):
    exit_code = 1


class MalformedInput(DensRamseyError, ValueError):
    exit_code = 1


class DomainError(DensRamseyError, ValueError):
    exit_code = 2


class PreconditionError(DensRamseyError):
    exit_code = 2


class ResourceError(DensRamseyError):
    exit_code = 3


class ExtractionFailed(DensRamseyError):
    """A search finished without finding a witness."""

    exit_code = 3


class ContractError(DensRamseyError, AssertionError):
    """A postcondition that the construction guarantees did not hold."""

    exit_code = 3


class ThresholdNotComputable(DensRamseyError):
    exit_code = 3


class VerificationFailed(DensRamseyError):
    exit_code = 4

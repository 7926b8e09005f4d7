"""Exception types shared across the package."""


class IonCavError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgument(IonCavError, ValueError):
    """An argument is outside the domain an operation is defined on."""


class OutOfCutoff(IonCavError, ValueError):
    """A basis label lies outside the truncated Fock space."""


class DimensionMismatch(IonCavError, ValueError):
    """Two states live in differently truncated spaces."""


class TruncationOverflow(IonCavError, RuntimeError):
    """An evolution would push more probability past the Fock cutoff
    than the configured leak tolerance allows."""


class DegenerateMatrixElement(IonCavError, ValueError):
    """A pulse duration was requested for a vanishing matrix element."""


class StepControlFailure(IonCavError, RuntimeError):
    """The propagator could not reach the requested step-halving
    tolerance within the step budget."""

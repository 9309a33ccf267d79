"""Exception hierarchy shared by all finslerlab modules."""


class FinslerError(Exception):
    """Base class for every error raised by finslerlab."""


class DomainError(FinslerError, ValueError):
    """An elementary function was applied outside its (real or exact) domain."""


class TruncationError(FinslerError, ValueError):
    """A derivative beyond the truncation order of a jet was requested."""


class ParseError(FinslerError, ValueError):
    """Malformed coefficient expression."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class ConeDomainError(DomainError):
    """The direction lies outside the cone where the metric is defined (F <= 0)."""


class DefinitenessError(FinslerError, ValueError):
    """A matrix that must be positive definite (or invertible) is not."""


class FormulaSingularityError(FinslerError, ZeroDivisionError):
    """A closed-form formula hit a vanishing denominator."""


class AuxSingularityError(FormulaSingularityError):
    """An auxiliary curvature quantity is undefined at this point."""


class DegenerateSampleError(FinslerError, ValueError):
    """A sample set is too small or too degenerate for a fit."""


class SamplingError(FinslerError, RuntimeError):
    """Rejection sampling exhausted its retry budget."""


class InconclusiveFitError(FinslerError, RuntimeError):
    """A rational fit found no solution within the degree cap."""


class NotMinkowskiError(FinslerError, ValueError):
    """A conformal base metric has x-dependent coefficients."""


class DegenerateGammaError(FinslerError, ValueError):
    """The quadratic form gamma vanishes identically."""


class ParameterError(FinslerError, ValueError):
    """Invalid parameter combination for a proof instance or formula."""


class ConfigError(FinslerError, ValueError):
    """Invalid suite configuration or input file."""

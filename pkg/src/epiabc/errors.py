class EpiABCError(Exception):
    """Base class for all engine errors."""


class NonPositiveSusceptible(EpiABCError):
    pass


class InvalidPrior(EpiABCError):
    pass


class ShapeMismatch(EpiABCError, ValueError):
    pass


class MaxRunsExceeded(EpiABCError):
    """Run cap hit before the accepted-sample target was reached.

    Carries the partial result so callers can still inspect it.
    """

    def __init__(self, message, samples=None, stats=None):
        super().__init__(message)
        self.samples = samples if samples is not None else []
        self.stats = stats


class CountryNotFound(EpiABCError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class MalformedCsv(EpiABCError, ValueError):
    pass


class OnsetNotReached(EpiABCError, ValueError):
    pass


class EmptyPosterior(EpiABCError, ValueError):
    pass


class ConfigError(EpiABCError):
    pass


class DataWarning(UserWarning):
    """Input data needed a fix-up (non-monotone cumulative counts, negative actives...)."""

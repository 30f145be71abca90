"""Exception hierarchy shared by all conmet modules."""


class ConmetError(Exception):
    """Base class for all errors raised by conmet."""


class InputError(ConmetError):
    """Invalid argument passed to a library call (dimension mismatch etc.)."""


class ConfigurationError(ConmetError):
    """Invalid or inconsistent configuration (bad kernel parameters,
    empty collocation set, malformed config file)."""


class OutOfDomainError(InputError):
    """Point lies outside the triangulated domain."""


class NumericalError(ConmetError):
    """Numerical failure (non-finite values, failed factorization)."""


class IllConditionedError(NumericalError):
    """Gram system too ill-conditioned to solve reliably.

    Usually fixable by increasing the collocation spacing or decreasing
    the kernel scale c.
    """


class DegenerateSimplexError(NumericalError):
    """Simplex with singular shape matrix (affinely dependent vertices)."""


class ResourceError(ConmetError):
    """Requested computation exceeds the configured memory budget."""

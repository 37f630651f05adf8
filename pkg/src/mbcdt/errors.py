"""Exception hierarchy shared by all modules."""


class CDTError(Exception):
    """Base class for errors raised by mbcdt."""


class ConfigurationError(CDTError, ValueError):
    """Invalid parameters, preconditions or run configuration."""


class NumericalFailure(CDTError, RuntimeError):
    """A computation produced NaNs, lost unitarity or failed to converge."""


class SearchFailure(NumericalFailure):
    """A bracketed search found no interior minimum or root."""


class NoBoundModeError(NumericalFailure):
    """Imaginary-distance propagation did not converge to a guided mode."""


class ResolutionWarning(UserWarning):
    """The transverse grid under-resolves the propagating field."""


class ExtrapolationWarning(UserWarning):
    """A design uses coupling rates outside the calibrated spacing range."""

"""Exception hierarchy shared by all modules."""


class ContactBayesError(Exception):
    """Base class for every error raised by this package."""


class SignalValidityError(ContactBayesError, ValueError):
    """A sensor sample was NaN or infinite."""


class InsufficientDataError(ContactBayesError, ValueError):
    """The acceleration window has not been filled yet."""


class DegenerateSpectrumError(ContactBayesError, ValueError):
    """A power spectrum carries zero total power."""


class FitError(ContactBayesError, ValueError):
    """KDE fitting failed (too few samples, zero variance, non-finite values)."""


class ConfigError(ContactBayesError, ValueError):
    """A configuration object failed validation."""


class TraceFormatError(ContactBayesError, ValueError):
    """A trace or model file could not be parsed or violates its schema."""


class MissingLabelsError(ContactBayesError, ValueError):
    """Evaluation was requested on a trace without ground-truth labels."""

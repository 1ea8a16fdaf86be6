"""
Exception hierarchy for iga_spectra
"""


class IgaSpectraError(Exception):
    """Base class for every error raised by the package"""


class DomainError(IgaSpectraError, ValueError):
    """An argument is outside the mathematical domain of an operation"""


class UnsupportedDegreeError(DomainError):
    """No superconvergent reference points exist for the requested degree"""


class DimensionMismatchError(IgaSpectraError, ValueError):
    pass


class NumericalError(IgaSpectraError, ArithmeticError):
    """Base for failures of a numerical procedure"""


class SingularMapError(NumericalError):
    pass


class RankDeficiencyError(NumericalError):
    pass


class FactorizationError(NumericalError):
    pass


class NonConvergenceError(NumericalError):
    """An iteration hit its limit; the best estimate and its residual are kept"""

    def __init__(self, message, best_estimate=None, residual=None):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.residual = residual


class InsufficientDataError(IgaSpectraError, ValueError):
    pass


class UnknownLawError(IgaSpectraError, KeyError):
    pass


class ConfigError(IgaSpectraError, ValueError):
    """A configuration value failed validation; `key` names the offending entry"""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key

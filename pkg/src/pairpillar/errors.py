"""Exception types shared across the toolkit."""


class PairPillarError(Exception):
    """Base class for all toolkit errors."""


class InvalidParameterError(PairPillarError, ValueError):
    """An input violates a documented precondition."""


class ResonanceNotFoundError(PairPillarError):
    """The scan window does not contain a usable cavity resonance."""


class AmbiguousWindowError(PairPillarError):
    """The scan window contains more than one candidate resonance."""


class NumericalFailureError(PairPillarError):
    """An iterative numerical routine failed to converge.

    Carries whatever diagnostic payload the routine could salvage in
    ``details``.
    """

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = details


class FitFailureError(NumericalFailureError):
    """A nonlinear fit did not converge; ``details`` holds best-so-far parameters."""


class AmbiguousIrfError(PairPillarError):
    """The instrument-response trace is not unimodal."""


class InsufficientDataError(PairPillarError):
    """Not enough events or bins to form the requested estimate."""


class InconsistentCalibrationError(PairPillarError):
    """Measured rates imply an efficiency above one for the given chain."""


class GridCapExceededError(PairPillarError):
    """A sweep grid exceeds the configured evaluation cap."""


class ConfigError(PairPillarError):
    """A configuration file failed validation.

    ``diagnostics`` is a list of (key_path, message) pairs.
    """

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        lines = "; ".join(f"{k}: {m}" for k, m in self.diagnostics)
        super().__init__(f"invalid configuration: {lines}")

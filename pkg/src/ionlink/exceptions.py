"""Exception types shared across the package."""


class IonlinkError(Exception):
    """Base class for all package errors."""


class UnknownMode(IonlinkError):
    """A mode label is not present in the state."""


class CutoffOverflow(IonlinkError):
    """An operation would push population above the per-mode cutoff."""


class InvalidPattern(IonlinkError):
    """A herald pattern is malformed or references bad modes."""


class DomainError(IonlinkError):
    """An input lies outside the mathematical domain of a formula."""


class DegenerateInput(IonlinkError):
    """An input combination makes a quantity undefined (e.g. tan^2 diverges)."""


class TopologyMismatch(IonlinkError):
    """Link arguments are inconsistent with the requested swap topology."""


class ZeroProbability(IonlinkError):
    """A conditional map was requested on an event of probability zero."""


class ConfigError(IonlinkError):
    """A scenario or sweep configuration is invalid.

    Carries a ``field`` attribute naming the offending entry when known.
    """

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(message if field is None else f"{field}: {message}")

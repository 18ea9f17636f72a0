"""ionlink: hybrid ion / SPDC+memory entanglement-link simulator."""

__version__ = "0.1.0"

from .exceptions import (  # noqa: F401
    ConfigError,
    CutoffOverflow,
    DegenerateInput,
    DomainError,
    InvalidPattern,
    IonlinkError,
    TopologyMismatch,
    UnknownMode,
    ZeroProbability,
)

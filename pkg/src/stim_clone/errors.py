"""exception hierarchy shared by all simulation layers"""

from typing import Tuple


class StimCloneError(Exception):
    """base class for every error raised by the package"""


class ConfigurationError(StimCloneError, ValueError):
    """invalid configuration value; carries the dotted field path"""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class UsageError(StimCloneError, ValueError):
    """an operation was called with arguments that violate its contract"""


class TruncationError(StimCloneError):
    """a creation operator pushed a term past the fock cutoff"""

    def __init__(self, occupation: Tuple[int, ...], cutoff: int):
        self.occupation = occupation
        self.cutoff = cutoff
        super().__init__(
            f"photon number {sum(occupation)} exceeds cutoff {cutoff} at {occupation}"
        )


class DegenerateStateError(StimCloneError, ValueError):
    """the zero state was passed where a physical state is required"""


class SimulationError(StimCloneError):
    """numerical failure while evolving or detecting"""


class AnalysisError(StimCloneError):
    """scan data cannot support the requested estimate"""

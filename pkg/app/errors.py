class AQDError(Exception):
    """Base class for every error raised by the simulator."""


class DomainError(AQDError, ValueError):
    """An operation was called outside its precondition."""


class DegenerateGainError(DomainError):
    """The averaged gain is zero, so the matched-filter direction is undefined."""


class AmbiguousPairError(DomainError):
    """Two codewords are indistinguishable under the given gains."""


class NearSingularGainError(DomainError):
    """A gain component is too small to invert."""


class ConfigError(AQDError):
    def __init__(self, message: str, field_path: str = ""):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}" if field_path else message)

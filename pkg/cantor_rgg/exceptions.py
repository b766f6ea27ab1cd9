class CantorError(Exception):
    """Base class for every error raised by cantor_rgg

    Attributes:
        reason (str): Human readable description of what went wrong
    """

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


class DomainError(CantorError, ValueError):
    """Thrown if an argument lies outside the domain of an operation"""


class ParameterDomainError(DomainError):
    """Thrown if the distribution parameter phi is not inside the open interval (0, 1/2)

    Attributes:
        phi (object): The rejected value, as given
    """

    def __init__(self, phi: object):
        self.phi = phi
        super().__init__(f"phi must lie in the open interval (0, 1/2), got {phi}")


class ConsistencyError(CantorError):
    """Thrown if two inputs that must describe the same distribution disagree, e.g. a sequence and a
    rate constant computed for different values of phi"""


class SamplerConsistencyError(CantorError):
    """Thrown if a sampled point falls inside a deleted middle gap. This signals a sampler bug.

    Attributes:
        point (float): The offending point
        level (int): The construction level at which the point fell into a gap
    """

    def __init__(self, point: float, level: int):
        self.point = point
        self.level = level
        super().__init__(f"point {point!r} lies inside a deleted gap of level {level}")


class ConfigError(CantorError):
    """Thrown if an experiment config can not be read or fails validation

    Attributes:
        field (str): Name of the offending field, or None if the file itself is malformed
    """

    def __init__(self, reason: str, field: str = None):
        self.field = field
        super().__init__(f"{field}: {reason}" if field else reason)

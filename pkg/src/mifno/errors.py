"""Exception hierarchy shared by every mifno module."""


class MifnoError(Exception):
    """Base class for all errors raised by mifno."""


class ParseError(MifnoError):
    pass


class ConsistencyError(MifnoError):
    """Two sources disagree on a value that must be unique."""


class InvalidOccupation(MifnoError):
    pass


class InvalidPartition(MifnoError):
    pass


class CapacityError(MifnoError):
    """A dense or statevector representation would exceed its documented cap."""


class DegeneracyError(MifnoError):
    """A perturbative denominator vanished for a non-vanishing numerator."""


class PolicyError(MifnoError):
    pass


class OrderError(MifnoError):
    pass


class DependencyError(MifnoError):
    pass


class IncompleteExpansion(MifnoError):
    def __init__(self, missing):
        self.missing = sorted(tuple(s) for s in missing)
        super().__init__(f"{len(self.missing)} increment(s) unsolved: {self.missing[:10]}")


class ShapeError(MifnoError, ValueError):
    pass


class ConvergenceError(MifnoError):
    def __init__(self, message, residual):
        self.residual = residual
        super().__init__(f"{message} (best residual {residual:.3e})")


class InvalidAmplitude(MifnoError):
    pass


class ConfigError(MifnoError):
    pass

"""Exception hierarchy shared across the package."""


class CapstreamError(Exception):
    """Base class for all capstream errors."""


class InvalidParameterError(CapstreamError):
    """A parameter is outside its documented domain."""


class InsufficientDataError(CapstreamError):
    """An operation received fewer samples than it needs."""


class OrderingError(CapstreamError):
    """Samples were fed out of index order."""


class CapacityError(CapstreamError):
    """A requested history range was already evicted from a ring buffer."""


class ModelError(CapstreamError):
    """Model dimensions or contents are inconsistent."""


class TrainingDivergedError(CapstreamError):
    """A gradient became non-finite during training."""


class ProtocolError(CapstreamError):
    """A wire message violates the command protocol."""


class ConfigError(CapstreamError):
    """A configuration file or flag set is invalid."""

"""Exception types shared across the stack."""


class RpncError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(RpncError, ValueError):
    pass


class RangeError(RpncError, IndexError):
    """A search window or region falls outside the available samples."""


class EstimationError(RpncError, ValueError):
    pass


class DemapError(RpncError, ValueError):
    pass


class FormatError(RpncError, ValueError):
    """Malformed packet image or field value."""


class SequencingError(RpncError, RuntimeError):
    """Slot-timing operation called out of order."""


class MeasurementError(RpncError, ValueError):
    pass


class ConfigError(RpncError, ValueError):
    pass

"""Exception hierarchy shared across the toolkit."""


class EvfieldError(Exception):
    """Base class for all toolkit errors."""


class RefractoryExceedsInterval(EvfieldError):
    """The hypothesised refractory period does not fit inside an event interval."""


class GeometryMismatch(EvfieldError):
    """Two streams or images disagree on sensor geometry."""


class ChannelMismatch(EvfieldError):
    """A radiance source does not provide the channels the sensor expects."""


class NonFiniteRadiance(EvfieldError):
    """A radiance source returned NaN or infinity."""


class OutOfRange(EvfieldError):
    """A query time lies outside the supported span."""


class InvalidParams(EvfieldError):
    """Parameters violate a documented precondition."""


class DegenerateRay(EvfieldError):
    """Ray has a non-positive sampling interval."""


class EmptyInterval(EvfieldError):
    """A time interval has non-positive length."""


class EmptyBatch(EvfieldError):
    """A batch reduction was requested over zero elements."""


class NoIntervals(EvfieldError):
    """A stream contains no per-pixel consecutive event pair."""


class DivergedLoss(EvfieldError):
    """Training loss became non-finite."""


class RankDeficient(EvfieldError):
    """A least-squares fit has no unique solution."""


class ShapeMismatch(EvfieldError):
    """Two images differ in shape."""


class TooSmall(EvfieldError):
    """An image is smaller than the analysis window."""


class InvalidCovariance(EvfieldError):
    """A covariance value violates the Cauchy-Schwarz bound."""


class BadMagic(EvfieldError):
    """A binary file does not start with the expected magic bytes."""


class FormatError(EvfieldError):
    """A file violates its documented layout."""


class ConfigError(EvfieldError):
    """A run configuration is malformed or has unknown keys."""

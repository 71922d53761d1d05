"""Exception hierarchy shared across the package."""


class NerkitError(Exception):
    """Base class for every error raised by nerkit."""


class ConfigError(NerkitError):
    """Invalid run configuration, detected before any processing starts."""


class UnknownModel(ConfigError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class MissingResource(ConfigError):
    """A backend needs a resource (e.g. gazetteer) that is not loaded."""


class UnknownLabel(NerkitError, ValueError):
    """Raised by strict label normalization when no alias matches."""


class BoundsError(NerkitError, ValueError):
    pass


# ingestion

class IoError(NerkitError, OSError):
    pass


class DecodeError(NerkitError, ValueError):
    pass


class ParseError(NerkitError, ValueError):
    pass


class MissingContent(ParseError):
    """Structured record has none of the recognised text keys."""


class GazetteerError(ParseError):
    pass


class BadTagSequence(ParseError):
    """IOB sequence anomaly, only raised in strict mode."""


# network (store and model servers)

class TransportError(NerkitError):
    """Connection failure, timeout, or exhausted retries."""


class NotFound(NerkitError, LookupError):
    pass


class Conflict(NerkitError):
    """Revision mismatch on write."""


class ProtocolError(NerkitError):
    """Remote body does not conform to the wire schema."""


class RemoteError(NerkitError):
    """Remote server rejected the request (4xx)."""

    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status


# pipeline / service

class SinkError(NerkitError):
    pass


class BadFilter(NerkitError, ValueError):
    pass


class TaskNotConfigured(NerkitError):
    pass


class UnknownTask(NerkitError):
    pass


class UpstreamError(NerkitError):
    pass


class BindError(NerkitError, OSError):
    pass


class SourceError(NerkitError):
    pass


class Busy(NerkitError):
    """A processing run is already in progress."""

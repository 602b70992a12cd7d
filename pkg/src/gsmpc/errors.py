"""Exception types raised across the package."""


class GsmpcError(Exception):
    """Base class for all package errors."""


class BehindCamera(GsmpcError):
    pass


class DimensionMismatch(GsmpcError, ValueError):
    pass


class EmptyScene(GsmpcError, ValueError):
    pass


class NoViews(GsmpcError, ValueError):
    pass


class NoObservations(GsmpcError, ValueError):
    pass


class EmptyCloud(GsmpcError, ValueError):
    pass


class InvalidAction(GsmpcError, ValueError):
    pass


class AlreadySolved(GsmpcError):
    pass


class EmptySet(GsmpcError, ValueError):
    pass


class ShapeMismatch(GsmpcError, ValueError):
    pass


class LengthMismatch(GsmpcError, ValueError):
    pass


class EmptyDataset(GsmpcError, ValueError):
    pass


class EmptyQuerySet(GsmpcError, ValueError):
    pass


class NoValidActions(GsmpcError):
    pass


class MissingFrames(GsmpcError):
    pass


class ParseError(GsmpcError, ValueError):
    pass

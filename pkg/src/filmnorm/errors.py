"""Exception types shared across the package."""


class FilmNormError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(FilmNormError):
    """Two rasters that must be aligned have different dimensions."""


class EmptySelection(FilmNormError):
    """A pixel selection (mask region) contains zero pixels."""


class ZeroMean(FilmNormError):
    """A channel mean needed as a divisor is zero."""


class DegenerateHistogram(FilmNormError):
    """A histogram has too little structure to threshold."""


class NoBlobsFound(FilmNormError):
    """Area granulometry found no dominant blob scale."""


class DegenerateChannel(FilmNormError):
    """A channel is constant where per-channel spread is required."""


class ZeroVector(FilmNormError):
    """An RGB vector is (0, 0, 0) where a direction is required."""


class SceneInfeasible(FilmNormError):
    """A synthetic scene recipe cannot be realized."""


class DecodeError(FilmNormError):
    """An input file is not a raster this package can read."""

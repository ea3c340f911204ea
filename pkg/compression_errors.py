class CompressionError(Exception):
    """Base class for every error raised by the toolkit."""


class ConfigError(CompressionError, ValueError):
    pass


class InvalidImageError(CompressionError, ValueError):
    pass


class ShapeMismatchError(CompressionError, ValueError):
    pass


class DegenerateInputError(CompressionError, ValueError):
    """Fewer distinct colors (or points) than the requested cluster count."""


class MalformedContainerError(CompressionError, ValueError):
    pass


class BadMagicError(MalformedContainerError):
    pass


class UnsupportedVersionError(MalformedContainerError):
    pass


class TruncatedStreamError(MalformedContainerError):
    pass


class IndexOutOfRangeError(MalformedContainerError):
    pass


class UndefinedTestError(CompressionError, ValueError):
    """The signed-rank test has nothing to rank (all differences zero)."""


class RasterReadError(CompressionError, OSError):
    pass


class RasterWriteError(CompressionError, OSError):
    pass


class EmptyInputError(CompressionError, ValueError):
    """No frames or images to process."""

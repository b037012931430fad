"""Exception hierarchy shared by every stage of the pipeline."""


class FungiSpikeError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(FungiSpikeError):
    """A row or header of an input file could not be parsed."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)


class SchemaError(ParseError):
    """A column named by the schema is missing from the input."""


class OrderingError(ParseError):
    """Timestamps are not strictly increasing."""


class GapError(ParseError):
    """Timestamps leave a hole larger than the tolerated jitter."""


class FormatError(ParseError):
    """An image file is empty, truncated or has an unsupported pixel layout."""


class SizeError(FungiSpikeError, ValueError):
    """An input sequence is too short or lengths disagree."""


class DomainError(FungiSpikeError, ValueError):
    """A parameter lies outside the domain where a formula is defined."""


class RangeError(FungiSpikeError, IndexError):
    """A region of interest falls outside the image."""


class ConfigurationError(FungiSpikeError, ValueError):
    """Pipeline or stage configuration is inconsistent."""


class SpecError(ConfigurationError):
    """A synthetic-recording spec cannot be realised."""


class ClassificationError(FungiSpikeError, ValueError):
    """A value cannot be assigned to a colour band."""


class RangeWarning(UserWarning):
    """Samples fall outside the logger's acquisition range."""


class JitterWarning(UserWarning):
    """Timestamps deviate from the uniform grid by more than the tolerance."""

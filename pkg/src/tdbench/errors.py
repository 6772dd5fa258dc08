"""Exception hierarchy shared across the package.

Every error raised by tdbench derives from :class:`TdbenchError` so callers
(and the CLI) can catch one type and still report a precise message.
"""


class TdbenchError(Exception):
    """Base class for all tdbench errors."""


class FrameFormatError(TdbenchError):
    """A frame file is malformed (bad magic, truncated body, bogus counts)."""


class FrameDataError(TdbenchError):
    """A frame file parsed structurally but carries invalid data values."""


class BitstreamError(TdbenchError):
    """A codec bitstream is malformed or fails its integrity check."""


class CapacityError(TdbenchError):
    """Input exceeds what a codec configuration can represent."""


class ConfigError(TdbenchError):
    """A configuration value is out of its documented range."""


class SceneError(TdbenchError):
    """Scene synthesis cannot satisfy the requested parameters."""


class StageError(TdbenchError):
    """A pipeline stage failed; the message names the stage and config."""

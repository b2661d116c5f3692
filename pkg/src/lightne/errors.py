"""Exception types shared across the package."""


class LightneError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(LightneError):
    """Malformed input data or file (bad edge list, bad magic, bad header)."""


class CapacityError(LightneError):
    """A fixed-capacity structure ran out of room.

    The message names the capacity that would have been required so callers
    can retry with a larger ``capacity_multiplier``.
    """


class ResourceError(LightneError):
    """Allocation failure, annotated with the estimated bytes required."""

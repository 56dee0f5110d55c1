"""Exception hierarchy.

Every error raised for bad input or an impossible model state derives from
:class:`DefiTvrError`, which the CLI maps to exit status 1.
"""


class DefiTvrError(Exception):
    """Base class for domain errors."""


class SchemaError(DefiTvrError, ValueError):
    """A snapshot, scenario or script file violates its schema.

    ``path`` names the offending field, e.g. ``tokens[2].supply``.
    """

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class DanglingReferenceError(SchemaError):
    """An id is referenced but never declared."""


class MissingPriceError(DefiTvrError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "missing price"


class CyclicWrapError(DefiTvrError):
    """The underlying-token graph contains a cycle."""


class ZeroSupplyError(DefiTvrError, ZeroDivisionError):
    pass


class InconsistentStateError(DefiTvrError):
    """An update would drive a quantity negative or break an accounting identity."""


class UndefinedMultiplierError(DefiTvrError, ZeroDivisionError):
    pass


class UnbalancedEntryError(DefiTvrError):
    pass


class UnknownTemplateError(DefiTvrError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown template"


class UnknownHolderError(DefiTvrError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown holder"


class TruncatedPushError(DefiTvrError):
    def __init__(self, offset, width, available):
        self.offset = offset
        self.width = width
        self.available = available
        super().__init__(
            f"PUSH{width} at offset {offset} needs {width} immediate bytes, "
            f"only {available} available"
        )


class InsufficientDataError(DefiTvrError):
    pass


class UndefinedCorrelationError(DefiTvrError):
    pass

"""Exception hierarchy shared by every module."""


class HanError(Exception):
    """Base class for all package errors."""


class DimensionError(HanError, ValueError):
    pass


class NumericError(HanError, ArithmeticError):
    pass


class EmptySequenceError(HanError, ValueError):
    pass


class ConfigError(HanError, ValueError):
    pass


class ConsistencyError(HanError, ValueError):
    """A trace or gradient set does not belong to the model it is used with."""


class FormatError(HanError):
    """Base for binary file decoding failures."""


class BadMagicError(FormatError):
    pass


class UnsupportedVersionError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class PayloadLengthError(FormatError):
    """File holds more bytes than its header accounts for."""


class HeaderFieldError(FormatError):
    """A header field has an impossible value (stream count, dtype tag, zero size)."""


class ShapeInconsistencyError(FormatError):
    pass


class ConfigMismatchError(FormatError):
    pass

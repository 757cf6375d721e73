"""
Exception hierarchy shared by every package. Input problems derive from ValueError so callers that only know the
standard library still catch them; engine faults derive from RuntimeError.
"""


class MarketError(Exception):
    pass


class InputError(MarketError, ValueError):
    pass


class AlignmentError(InputError):
    pass


class ParseError(InputError):
    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super(ParseError, self).__init__(message)
        self.row = row


class IntegrityError(InputError):
    pass


class CoverageError(InputError):
    pass


class SizeError(InputError):
    pass


class UndefinedPriceError(MarketError, ValueError):
    pass


class UndefinedMetricError(MarketError, ValueError):
    pass


class CapacityError(MarketError, RuntimeError):
    pass


class InvariantViolation(MarketError, RuntimeError):
    pass

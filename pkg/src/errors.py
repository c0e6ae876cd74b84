class DisplaySimError(Exception):
    '''
    Base class of every error raised by the display simulator.
    '''


class GeometryError(DisplaySimError):
    '''
    A DisplayGeometry (or a value derived from it) violates one of its invariants.
    '''


class NonPositiveDistance(DisplaySimError):
    '''
    An axial distance (viewing distance or LED-lens gap) is zero or negative.
    '''


class EmptyGrid(DisplaySimError):
    '''
    A sampling grid is empty or not strictly increasing.
    '''


class ZeroIntendedSignal(DisplaySimError):
    '''
    The intended signal integrated over a crosstalk window is (numerically) zero.
    '''


class BadViewCount(DisplaySimError):
    '''
    The number of views does not fit the requested multiplexing mode.
    '''


class EmptyMaskList(DisplaySimError):
    pass


class MaskLengthMismatch(DisplaySimError):
    pass


class DimensionMismatch(DisplaySimError):
    pass


class FrameCountMismatch(DisplaySimError):
    pass


class EmptyRange(DisplaySimError):
    pass


class ParseError(DisplaySimError):
    '''
    A scenario file could not be parsed.

    Attributes:
        line (int): The 1-based line of the offending text (0 when unknown).
        message (str): What went wrong.
    '''
    def __init__(self, line: int, message: str) -> None:
        super().__init__(f'line {line}: {message}')
        self.line = line
        self.message = message


class ValidationError(DisplaySimError):
    '''
    A parsed scenario holds a value that is missing, unknown or out of range.

    Attributes:
        field (str): Dotted name of the offending key.
        reason (str): Why the value was rejected.
    '''
    def __init__(self, field: str, reason: str) -> None:
        super().__init__(f'{field}: {reason}')
        self.field = field
        self.reason = reason

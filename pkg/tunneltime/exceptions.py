class TunnelTimeError(Exception):
    """Base class for every error raised by tunneltime."""

    exit_code = 3

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


class ValidationError(TunnelTimeError):
    exit_code = 2

    def __init__(self, message, field=None, **details):
        super().__init__(message, field=field, **details)
        self.field = field


class ConfigError(TunnelTimeError):
    exit_code = 2

    def __init__(self, message, key=None, **details):
        super().__init__(message, key=key, **details)
        self.key = key


class NumericalError(TunnelTimeError):
    exit_code = 3


class ConvergenceError(NumericalError):
    def __init__(self, message, index=None, **details):
        super().__init__(message, index=index, **details)
        self.index = index


class PoleCollisionError(NumericalError):
    pass


class OutOfRangeError(NumericalError):
    pass


class NodeError(NumericalError):
    pass


class TruncationError(NumericalError):
    pass


class BracketError(NumericalError):
    def __init__(self, message, interval=None, **details):
        super().__init__(message, interval=interval, **details)
        self.interval = interval


class OutputError(TunnelTimeError):
    exit_code = 4

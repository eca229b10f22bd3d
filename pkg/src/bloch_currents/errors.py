"""Exception hierarchy shared by all modules."""


class BlochCurrentsError(Exception):
    """Base class for every error raised by the package."""


class InvalidQuantumNumbers(BlochCurrentsError, ValueError):
    pass


class OutOfBand(BlochCurrentsError, ValueError):
    pass


class GridTooSmall(BlochCurrentsError, ValueError):
    pass


class OrderingUndefined(BlochCurrentsError, ValueError):
    pass


class OrderingMismatch(BlochCurrentsError, ValueError):
    pass


class BandOverflow(BlochCurrentsError, ArithmeticError):
    pass


class AsymmetricB(BlochCurrentsError, ValueError):
    pass


class StepTooLarge(BlochCurrentsError, ArithmeticError):
    pass


class DegenerateMeanSpin(BlochCurrentsError, ValueError):
    pass


class AxisUnsupported(BlochCurrentsError, ValueError):
    pass


class DegenerateField(BlochCurrentsError, ValueError):
    pass


class AmbiguousIndex(BlochCurrentsError, ArithmeticError):
    pass


class PoleEncounter(BlochCurrentsError, ArithmeticError):
    pass


class CalibrationFailed(BlochCurrentsError, RuntimeError):
    pass


class ConfigError(BlochCurrentsError, ValueError):
    """Invalid scenario configuration; ``line`` points into the source file."""

    def __init__(self, message, line=None, source=None, field=None):
        self.line = line
        self.field = field
        self.source = source
        where = ""
        if source is not None and line is not None:
            where = f"{source}:{line}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class PoleSingularity(BlochCurrentsError, UserWarning):
    """Warning category: grid values next to a pole look divergent."""

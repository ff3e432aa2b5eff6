"""Exception and warning types raised across the package."""


class StableLassoError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(StableLassoError, ValueError):
    pass


class ConstantColumn(StableLassoError, ValueError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"column {column} is constant (sd below 1e-12)")


class ParseError(StableLassoError, ValueError):
    def __init__(self, row, col, value):
        self.row, self.col, self.value = row, col, value
        super().__init__(f"cannot parse {value!r} as a float at row {row}, column {col}")


class MissingResponseColumn(StableLassoError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "response column not found"


class RaggedRows(StableLassoError, ValueError):
    def __init__(self, row, expected, got):
        self.row = row
        super().__init__(f"row {row} has {got} fields, expected {expected}")


class SingularSystem(StableLassoError, ArithmeticError):
    pass


class AllWeightsZero(StableLassoError, ValueError):
    pass


class NonConvexDiverged(StableLassoError, ArithmeticError):
    pass


class MaxIterExceeded(UserWarning):
    """Coordinate descent hit the sweep limit; the last iterate is returned."""


class EmptyProfile(StableLassoError, ValueError):
    pass


class LambdaNotInProfile(StableLassoError, KeyError):
    pass


class InvalidRho(StableLassoError, ValueError):
    pass


class OracleUnavailable(StableLassoError, ValueError):
    pass


class OlsUnderdetermined(StableLassoError, ValueError):
    pass


class TaggedError(StableLassoError):
    """Wraps an error raised inside a batched computation with its origin."""

    def __init__(self, tags, cause):
        self.tags = dict(tags)
        self.cause = cause
        where = ", ".join(f"{k}={v}" for k, v in self.tags.items())
        super().__init__(f"{type(cause).__name__} at ({where}): {cause}")

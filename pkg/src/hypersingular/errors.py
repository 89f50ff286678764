"""Exception hierarchy shared by all modules."""


class HypersingularError(Exception):
    """Base class for every error raised by the package."""


class SpecError(HypersingularError, ValueError):
    """Invalid problem description (input error)."""


class MissingCoefficient(SpecError):
    pass


class UnexpectedCoefficient(SpecError):
    pass


class IllegalSign(SpecError):
    pass


class UnsupportedDimension(SpecError):
    pass


class MeshError(SpecError):
    pass


class ExprSyntaxError(SpecError):
    """Malformed coefficient expression; ``offset`` is the byte offset of the failure."""

    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifier(SpecError):
    def __init__(self, name, offset=None):
        where = "" if offset is None else f" at offset {offset}"
        super().__init__(f"unknown identifier {name!r}{where}")
        self.name = name
        self.offset = offset


class NumericalError(HypersingularError, ArithmeticError):
    """Runtime numerical failure (CLI exit code 3)."""


class EvalError(NumericalError):
    pass


class DivideByZero(NumericalError, ZeroDivisionError):
    pass


class LnOfNonpositive(NumericalError):
    pass


class NonFiniteExponent(NumericalError):
    pass


class QuadratureError(NumericalError):
    pass


class NonpositiveArgument(NumericalError):
    pass


class ComplexRoots(NumericalError):
    pass


class RootNotBracketed(NumericalError):
    pass


class NonpositiveValue(NumericalError):
    def __init__(self, index):
        super().__init__(f"nonpositive value at node {index}")
        self.index = index


class ZeroPivot(NumericalError):
    def __init__(self, row):
        super().__init__(f"zero pivot in row {row}")
        self.row = row


class SolverOverflow(NumericalError):
    pass


class MaxIterationsError(NumericalError):
    pass

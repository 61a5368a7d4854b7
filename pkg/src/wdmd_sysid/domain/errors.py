class WdmdError(Exception):
    """Base class for every error raised by the identification toolkit."""


class InvalidSpec(WdmdError, ValueError):
    pass


class NyquistViolation(InvalidSpec):
    pass


class EmptySignal(WdmdError, ValueError):
    pass


class InvalidLevel(WdmdError, ValueError):
    pass


class BankMismatch(WdmdError, ValueError):
    pass


class EmptyData(WdmdError, ValueError):
    pass


class TooFewColumns(WdmdError, ValueError):
    pass


class ShapeMismatch(WdmdError, ValueError):
    pass


class DegenerateData(WdmdError, ValueError):
    pass


class InsufficientData(WdmdError, ValueError):
    pass


class MissingStates(WdmdError, ValueError):
    pass


class FormatError(WdmdError, ValueError):
    pass


class ZeroReference(WdmdError, ArithmeticError):
    pass


class ZeroModeVector(WdmdError, ArithmeticError):
    pass


class InsufficientExcitation(WdmdError, ArithmeticError):
    pass


class SvdFailure(WdmdError, ArithmeticError):
    pass


class SingularResolvent(WdmdError, ArithmeticError):
    pass


class ExpmFailure(WdmdError, ArithmeticError):
    pass


class EigFailure(WdmdError, ArithmeticError):
    pass

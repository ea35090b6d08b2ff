"""Exception hierarchy shared by all budgetsvm modules."""


class BudgetSVMError(Exception):
    """Base class for every error raised by this package."""


class ParseError(BudgetSVMError, ValueError):
    def __init__(self, line, reason):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class InvalidFraction(BudgetSVMError, ValueError):
    pass


class DegenerateWeights(BudgetSVMError, ValueError):
    """Coefficient sum too close to zero for a weighted mean."""


class ZeroCoefficient(BudgetSVMError, ValueError):
    pass


class ConfigError(BudgetSVMError, ValueError):
    pass


class InsufficientSVs(BudgetSVMError, ValueError):
    pass


class UnknownPreset(BudgetSVMError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown preset"


class ModelFormatError(BudgetSVMError, ValueError):
    pass

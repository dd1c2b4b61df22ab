"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where an operation is defined."""


class ContractError(TypeError):
    """A caller-supplied object lacks something the operation needs."""


class NumericError(ArithmeticError):
    """Non-finite values appeared during a numerical evaluation."""


class BudgetExceeded(RuntimeError):
    """A search ran past its index/step budget.

    ``partial`` carries whatever was certified before the budget ran out.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class FlowBlowUp(RuntimeError):
    """The numerical flow left its safety box."""

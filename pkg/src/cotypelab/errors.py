"""Exception hierarchy.

Every refusal names the module that raised it; the CLI maps
:class:`PreconditionError` to exit code 1 and :class:`InvariantError` to 2.
"""


class LabError(Exception):
    exit_code = 1

    def __init__(self, message: str, module: str = "lab"):
        super().__init__(f"[{module}] {message}")
        self.module = module
        self.detail = message


class PreconditionError(LabError, ValueError):
    """An input violates a documented precondition."""


class DimensionError(PreconditionError):
    pass


class BudgetExceeded(PreconditionError):
    def __init__(self, required: int, budget: int, module: str):
        super().__init__(f"exhaustive mode needs budget {required}, got {budget}", module=module)
        self.required = required
        self.budget = budget


class IncompleteTableError(PreconditionError):
    pass


class MembershipError(PreconditionError):
    pass


class InvariantError(LabError, AssertionError):
    """An internal invariant failed; ``invariant`` names it."""

    exit_code = 2

    def __init__(self, invariant: str, message: str, module: str = "lab"):
        super().__init__(f"invariant '{invariant}' violated: {message}", module=module)
        self.invariant = invariant


class FamilyShortfallWarning(UserWarning):
    """Greedy harvest produced fewer triples than the guaranteed count."""

    def __init__(self, bit: int, found: int, required: int):
        super().__init__(f"bit {bit}: {found} disjoint triples, guarantee asks for {required}")
        self.bit = bit
        self.found = found
        self.required = required

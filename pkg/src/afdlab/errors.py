"""Exception hierarchy shared by all afdlab modules."""


class AfdError(Exception):
    """Base class for every error raised by afdlab."""


class ContractError(AfdError, ValueError):
    """An argument violates an operation's precondition."""


class SchemaError(ContractError):
    """A relation header or attribute reference is malformed."""


class ParseError(AfdError):
    """An input file could not be parsed."""


class RefusalError(AfdError):
    """The operation declines to run, e.g. a size guard was exceeded."""


class BudgetExceeded(RefusalError):
    """A per-candidate wall-clock budget ran out."""

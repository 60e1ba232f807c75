"""Exception hierarchy shared by every module of the toolkit."""

from __future__ import annotations

from typing import List, Sequence


class QBKError(RuntimeError):
    """Base class for every library error.

    ``details`` holds one human-readable line per individual problem so the CLI
    can print them the same way configuration errors are printed.
    """

    def __init__(self, message: str, *, details: Sequence[str] | None = None):
        super().__init__(message)
        self.message = message
        self.details: List[str] = list(details or [])


class CaptureError(QBKError):
    """A term is not free for the variable it is substituted for."""


class NotASubformula(QBKError):
    """The formula to replace does not occur at the requested positions."""


class FormulaSyntaxError(QBKError):
    """Formula text does not match the grammar."""

    def __init__(
        self,
        message: str,
        *,
        position: int,
        line: int = 1,
        column: int = 1,
        expected: Sequence[str] = (),
    ):
        detail = f"expected one of: {', '.join(expected)}" if expected else None
        super().__init__(message, details=[detail] if detail else None)
        self.position = position
        self.line = line
        self.column = column
        self.expected = tuple(expected)


class ArityError(QBKError):
    """An atom is applied to the wrong number of arguments."""


class UnknownSymbol(QBKError):
    """A predicate is not declared, or a name is used in two roles."""


class SchemaError(QBKError):
    """A JSON document does not match its schema."""

    def __init__(self, message: str, *, path: str = "", details: Sequence[str] | None = None):
        super().__init__(message, details=details)
        self.path = path


class InvariantViolation(QBKError):
    """A loaded or constructed structure breaks one of its invariants."""

    def __init__(self, condition: str, message: str, *, details: Sequence[str] | None = None):
        super().__init__(f"{condition}: {message}", details=details)
        self.condition = condition


class UnboundVariable(QBKError):
    """A free variable has no value in the evaluation environment."""


class IndividualOutOfDomain(QBKError):
    """An environment value is not in the domain of the current world."""


class BoundsTooLarge(QBKError):
    """The requested enumeration exceeds the configured model cap."""

    def __init__(self, estimate: int, cap: int):
        super().__init__(
            f"enumeration bound {estimate} exceeds the cap of {cap} models",
            details=["lower --max-worlds/--max-domain or raise --max-models"],
        )
        self.estimate = estimate
        self.cap = cap


class NotApplicable(QBKError):
    """A transformation was asked to run outside its preconditions."""


class NotNNF(QBKError):
    """A formula is not in negative normal form."""


class NotNelson(QBKError):
    """A formula contains a modal operator where none is allowed."""


class NotASentence(QBKError):
    """A formula required to be closed has free variables."""


class ClassViolation(QBKError):
    """A model does not belong to the class an operation requires."""

    def __init__(self, message: str, *, violations: Sequence[str]):
        super().__init__(message, details=violations)
        self.violations = tuple(violations)


__all__ = [
    "ArityError",
    "BoundsTooLarge",
    "CaptureError",
    "ClassViolation",
    "FormulaSyntaxError",
    "IndividualOutOfDomain",
    "InvariantViolation",
    "NotNelson",
    "NotASentence",
    "NotASubformula",
    "NotApplicable",
    "NotNNF",
    "QBKError",
    "SchemaError",
    "UnboundVariable",
    "UnknownSymbol",
]

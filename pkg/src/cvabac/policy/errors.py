from __future__ import annotations


class PolicyError(Exception):
    """Base class for policy parse, load and evaluation problems."""


class PolicySyntaxError(PolicyError):
    def __init__(self, position: int, expected: str, found: str = ""):
        self.position = position
        self.expected = expected
        self.found = found
        detail = f", found {found!r}" if found else ""
        super().__init__(f"at position {position}: expected {expected}{detail}")


class KindError(PolicyError):
    def __init__(self, attribute: str, expected: str, message: str = ""):
        self.attribute = attribute
        self.expected = expected
        super().__init__(message or f"{attribute}: expected {expected}")


class UnboundVariable(PolicyError):
    def __init__(self, name: str, position: int = -1):
        self.name = name
        self.position = position
        super().__init__(f"unbound variable {name!r} at position {position}")


class SchemaError(PolicyError):
    """A policy document is structurally invalid or has a bad condition."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        super().__init__(message)


class DuplicateOperation(SchemaError):
    pass


class PolicyIoError(PolicyError, OSError):
    pass

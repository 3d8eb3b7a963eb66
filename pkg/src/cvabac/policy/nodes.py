"""AST node types for authorization conditions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from ..model import Atom

REFS = ("source", "target", "system")
SET_RELATIONS = ("subset", "subseteq", "nsubseteq", "intersects")


# -- terms ---------------------------------------------------------------

@dataclass(frozen=True)
class EffAtt:
    attribute: str
    ref: str


@dataclass(frozen=True)
class DirectAtt:
    attribute: str
    ref: str


@dataclass(frozen=True)
class Literal:
    value: Atom


@dataclass(frozen=True)
class SetLiteral:
    values: frozenset


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Union_:
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class Intersect:
    left: "Term"
    right: "Term"


Term = Union[EffAtt, DirectAtt, Literal, SetLiteral, Var, Union_, Intersect]


# -- formulas ------------------------------------------------------------

@dataclass(frozen=True)
class And:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Or:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class Exists:
    var: str
    domain: Term
    body: "Expr"


@dataclass(frozen=True)
class Forall:
    var: str
    domain: Term
    body: "Expr"


@dataclass(frozen=True)
class SetRel:
    op: str
    left: Term
    right: Term


@dataclass(frozen=True)
class In:
    element: Term
    collection: Term


@dataclass(frozen=True)
class NotIn:
    element: Term
    collection: Term


@dataclass(frozen=True)
class Eq:
    left: Term
    right: Term


@dataclass(frozen=True)
class Neq:
    left: Term
    right: Term


@dataclass(frozen=True)
class Const:
    value: bool


Expr = Union[And, Or, Not, Exists, Forall, SetRel, In, NotIn, Eq, Neq, Const]

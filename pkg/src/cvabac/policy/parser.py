"""Text syntax for authorization conditions.

Grammar, lowest precedence first::

    expr     := conj ('||' conj)*
    conj     := unary ('&&' unary)*
    unary    := '!' unary | quant | primary
    quant    := ('exists' | 'forall') NAME 'in' operand ':' expr
    primary  := relation | '(' expr ')' | 'true' | 'false'
    relation := operand RELOP operand
    operand  := opatom (('union' | 'intersect') opatom)*
    opatom   := ('eff' | 'att') '(' STRING ',' REF ')' | '{' atoms? '}'
              | STRING | NUMBER | 'true' | 'false' | 'null' | NAME | '(' operand ')'

RELOP is one of ``== != in notin subset subseteq nsubseteq intersects`` and
REF one of ``source target system``.  A quantifier body runs to the end of
the enclosing parenthesis or of the whole expression.
"""

from __future__ import annotations

import json
import re
from typing import Mapping, Optional

from ..model import Kind
from .errors import KindError, PolicySyntaxError, UnboundVariable
from .nodes import (REFS, SET_RELATIONS, And, Const, DirectAtt, EffAtt, Eq, Exists, Expr,
                    Forall, In, Intersect, Literal, Neq, Not, NotIn, Or, SetLiteral, SetRel,
                    Term, Union_, Var)

KEYWORDS = frozenset({
    "exists", "forall", "in", "notin", "subset", "subseteq", "nsubseteq", "intersects",
    "union", "intersect", "eff", "att", "true", "false", "null", *REFS,
})
RELOPS = ("==", "!=", "in", "notin", *SET_RELATIONS)

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<number>-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>&&|\|\||==|!=|[!(){},:])
""", re.VERBOSE)


class Token:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind: str, text: str, pos: int):
        self.kind, self.text, self.pos = kind, text, pos

    def __repr__(self) -> str:
        return f"Token({self.kind}, {self.text!r}, {self.pos})"


def tokenize(text: str) -> list:
    tokens, pos = [], 0
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if match is None:
            raise PolicySyntaxError(pos, "a token", text[pos])
        kind = match.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, match.group(), pos))
        pos = match.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


def _schema_kind(entry) -> Kind:
    return Kind(getattr(entry, "kind", entry))


class _Parser:
    def __init__(self, text: str, schema: Optional[Mapping]):
        self.tokens = tokenize(text)
        self.i = 0
        self.schema = schema
        self.scope: list = []

    # -- token helpers -------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def at(self, *texts: str) -> bool:
        return self.tok.kind in ("op", "name") and self.tok.text in texts

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(repr(text))
        token = self.tok
        self.i += 1
        return token

    def fail(self, expected: str):
        raise PolicySyntaxError(self.tok.pos, expected, self.tok.text or "end of input")

    # -- formulas ------------------------------------------------------

    def parse(self) -> Expr:
        expr = self.disjunction()
        if self.tok.kind != "end":
            self.fail("end of input")
        return expr

    def disjunction(self) -> Expr:
        left = self.conjunction()
        while self.accept("||"):
            left = Or(left, self.conjunction())
        return left

    def conjunction(self) -> Expr:
        left = self.unary()
        while self.accept("&&"):
            left = And(left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.accept("!"):
            return Not(self.unary())
        if self.at("exists", "forall"):
            return self.quantifier()
        return self.primary()

    def quantifier(self) -> Expr:
        node = Exists if self.tok.text == "exists" else Forall
        self.i += 1
        token = self.tok
        if token.kind != "name" or token.text in KEYWORDS:
            self.fail("a variable name")
        self.i += 1
        self.expect("in")
        domain = self.operand()
        self.require(domain, Kind.SET, "quantifier domain")
        self.expect(":")
        self.scope.append(token.text)
        try:
            body = self.disjunction()
        finally:
            self.scope.pop()
        return node(token.text, domain, body)

    def primary(self) -> Expr:
        start = self.i
        if self.at("(", "true", "false"):
            try:
                return self.relation()
            except PolicySyntaxError as first:
                self.i = start
                if self.accept("("):
                    try:
                        inner = self.disjunction()
                        self.expect(")")
                    except PolicySyntaxError as second:
                        raise max(first, second, key=lambda e: e.position) from None
                    return inner
                token = self.tok
                self.i += 1
                return Const(token.text == "true")
        return self.relation()

    def relation(self) -> Expr:
        left = self.operand()
        if not (self.tok.kind in ("op", "name") and self.tok.text in RELOPS):
            self.fail("a relational operator")
        op = self.tok.text
        self.i += 1
        right = self.operand()
        if op in ("==", "!="):
            self.require(left, Kind.ATOMIC, f"left side of {op}")
            self.require(right, Kind.ATOMIC, f"right side of {op}")
            return (Eq if op == "==" else Neq)(left, right)
        if op in ("in", "notin"):
            self.require(left, Kind.ATOMIC, f"left side of {op}")
            self.require(right, Kind.SET, f"right side of {op}")
            return (In if op == "in" else NotIn)(left, right)
        self.require(left, Kind.SET, f"left side of {op}")
        self.require(right, Kind.SET, f"right side of {op}")
        return SetRel(op, left, right)

    # -- terms ---------------------------------------------------------

    def operand(self) -> Term:
        left = self.operand_atom()
        while self.at("union", "intersect"):
            node = Union_ if self.tok.text == "union" else Intersect
            self.i += 1
            right = self.operand_atom()
            self.require(left, Kind.SET, "set operation")
            self.require(right, Kind.SET, "set operation")
            left = node(left, right)
        return left

    def operand_atom(self) -> Term:
        token = self.tok
        if self.at("eff", "att"):
            self.i += 1
            self.expect("(")
            if self.tok.kind != "string":
                self.fail("an attribute name string")
            attribute = _decode_string(self.tok)
            self.i += 1
            self.expect(",")
            if not self.at(*REFS):
                self.fail("one of source, target, system")
            ref = self.tok.text
            self.i += 1
            self.expect(")")
            self.kind_of_attribute(attribute)
            return (EffAtt if token.text == "eff" else DirectAtt)(attribute, ref)
        if self.accept("{"):
            values = []
            if not self.at("}"):
                values.append(self.set_member())
                while self.accept(","):
                    values.append(self.set_member())
            self.expect("}")
            return SetLiteral(frozenset(values))
        if self.accept("("):
            inner = self.operand()
            self.expect(")")
            return inner
        if token.kind == "name" and token.text not in KEYWORDS:
            if token.text not in self.scope:
                raise UnboundVariable(token.text, token.pos)
            self.i += 1
            return Var(token.text)
        return Literal(self.literal())

    def literal(self):
        token = self.tok
        if token.kind == "string":
            value = _decode_string(token)
        elif token.kind == "number":
            value = float(token.text) if any(c in token.text for c in ".eE") else int(token.text)
        elif self.at("true", "false"):
            value = token.text == "true"
        elif self.at("null"):
            value = None
        else:
            self.fail("an operand")
        self.i += 1
        return value

    def set_member(self):
        if self.at("null"):
            self.fail("a non-null set member")
        return self.literal()

    # -- kinds ---------------------------------------------------------

    def kind_of_attribute(self, attribute: str) -> Optional[Kind]:
        if self.schema is None:
            return None
        if attribute not in self.schema:
            raise KindError(attribute, "a declared attribute", f"unknown attribute {attribute!r}")
        return _schema_kind(self.schema[attribute])

    def kind_of(self, term: Term) -> Optional[Kind]:
        if isinstance(term, (EffAtt, DirectAtt)):
            return self.kind_of_attribute(term.attribute)
        if isinstance(term, (SetLiteral, Union_, Intersect)):
            return Kind.SET
        return Kind.ATOMIC

    def require(self, term: Term, kind: Kind, where: str) -> None:
        actual = self.kind_of(term)
        if actual is not None and actual is not kind:
            name = getattr(term, "attribute", print_term(term))
            raise KindError(name, f"{kind.value} operand in {where}")


def _decode_string(token: Token) -> str:
    try:
        return json.loads(token.text)
    except ValueError:
        raise PolicySyntaxError(token.pos, "a valid string literal", token.text) from None


def parse_expr(text: str, schema: Optional[Mapping] = None) -> Expr:
    """Parse a condition.  With ``schema`` (attribute name to kind or
    :class:`~cvabac.model.AttributeSchema`) attribute references are checked."""
    return _Parser(text, schema).parse()


# -- printing --------------------------------------------------------------

def atom_text(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return json.dumps(value)


def _atom_order(value):
    return (type(value).__name__, atom_text(value))


def print_term(term: Term) -> str:
    if isinstance(term, EffAtt):
        return f"eff({json.dumps(term.attribute)}, {term.ref})"
    if isinstance(term, DirectAtt):
        return f"att({json.dumps(term.attribute)}, {term.ref})"
    if isinstance(term, Literal):
        return atom_text(term.value)
    if isinstance(term, SetLiteral):
        return "{" + ", ".join(atom_text(v) for v in sorted(term.values, key=_atom_order)) + "}"
    if isinstance(term, Var):
        return term.name
    if isinstance(term, Union_):
        return f"({print_term(term.left)} union {print_term(term.right)})"
    if isinstance(term, Intersect):
        return f"({print_term(term.left)} intersect {print_term(term.right)})"
    raise TypeError(f"not a term: {term!r}")


_RELATION_TEXT = {In: "in", NotIn: "notin", Eq: "==", Neq: "!="}


def print_expr(expr: Expr) -> str:
    """Canonical, fully parenthesized text for ``expr``."""
    if isinstance(expr, And):
        return f"({print_expr(expr.left)} && {print_expr(expr.right)})"
    if isinstance(expr, Or):
        return f"({print_expr(expr.left)} || {print_expr(expr.right)})"
    if isinstance(expr, Not):
        inner = print_expr(expr.operand)
        if isinstance(expr.operand, (SetRel, In, NotIn, Eq, Neq)):
            inner = f"({inner})"
        return "!" + inner
    if isinstance(expr, (Exists, Forall)):
        word = "exists" if isinstance(expr, Exists) else "forall"
        return f"({word} {expr.var} in {print_term(expr.domain)} : {print_expr(expr.body)})"
    if isinstance(expr, SetRel):
        return f"{print_term(expr.left)} {expr.op} {print_term(expr.right)}"
    if isinstance(expr, (In, NotIn)):
        word = _RELATION_TEXT[type(expr)]
        return f"{print_term(expr.element)} {word} {print_term(expr.collection)}"
    if isinstance(expr, (Eq, Neq)):
        word = _RELATION_TEXT[type(expr)]
        return f"{print_term(expr.left)} {word} {print_term(expr.right)}"
    if isinstance(expr, Const):
        return "true" if expr.value else "false"
    raise TypeError(f"not an expression: {expr!r}")

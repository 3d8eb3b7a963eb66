"""Evaluation of condition ASTs against a registry."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

from ..inheritance import atom_sort_key, eff_value
from ..model import SYSTEM_ID, Kind, Registry
from .errors import PolicyError, UnboundVariable
from .nodes import (And, Const, DirectAtt, EffAtt, Eq, Exists, Expr, Forall, In, Intersect,
                    Literal, Neq, Not, NotIn, Or, SetLiteral, SetRel, Term, Union_, Var)


@dataclass
class EvalContext:
    """Who is asking (``source``), about what (``target``), and the variable
    bindings of the enclosing quantifiers.

    ``overlay`` holds request-supplied attributes of the source; they shadow
    the registry for ``att``/``eff`` lookups on ``source``.  ``steps`` counts
    evaluated nodes and serves as a deterministic cost measure.
    """

    registry: Registry
    source: str
    target: str
    bindings: dict = field(default_factory=dict)
    overlay: Mapping = field(default_factory=dict)
    steps: int = 0

    def entity(self, ref: str) -> str:
        if ref == "source":
            return self.source
        if ref == "target":
            return self.target
        return SYSTEM_ID


def _lookup(term, ctx: EvalContext):
    schema = ctx.registry.attribute(term.attribute)
    if term.ref == "source" and term.attribute in ctx.overlay:
        value = ctx.overlay[term.attribute]
        if schema.kind is Kind.SET:
            return frozenset(value or ())
        return value
    entity_id = ctx.entity(term.ref)
    if isinstance(term, EffAtt):
        return eff_value(ctx.registry, entity_id, term.attribute)
    return ctx.registry.direct_value(entity_id, term.attribute)


def evaluate_term(term: Term, ctx: EvalContext):
    ctx.steps += 1
    if isinstance(term, (EffAtt, DirectAtt)):
        return _lookup(term, ctx)
    if isinstance(term, Literal):
        return term.value
    if isinstance(term, SetLiteral):
        return term.values
    if isinstance(term, Var):
        try:
            return ctx.bindings[term.name]
        except KeyError:
            raise UnboundVariable(term.name) from None
    if isinstance(term, (Union_, Intersect)):
        left = _as_set(evaluate_term(term.left, ctx))
        right = _as_set(evaluate_term(term.right, ctx))
        return left | right if isinstance(term, Union_) else left & right
    raise TypeError(f"not a term: {term!r}")


def _as_set(value) -> frozenset:
    if not isinstance(value, frozenset):
        raise PolicyError(f"expected a set value, got {value!r}")
    return value


def _as_atom(value):
    if isinstance(value, frozenset):
        raise PolicyError(f"expected an atomic value, got set {sorted(value, key=atom_sort_key)!r}")
    return value


def _is_null_literal(term: Term) -> bool:
    return isinstance(term, Literal) and term.value is None


def _witness(expr, ctx: EvalContext, want: bool) -> bool:
    """True if some domain value makes the body evaluate to ``want``."""
    domain = _as_set(evaluate_term(expr.domain, ctx))
    missing = object()
    saved = ctx.bindings.get(expr.var, missing)
    try:
        for value in sorted(domain, key=atom_sort_key):
            ctx.bindings[expr.var] = value
            if evaluate_expr(expr.body, ctx) is want:
                return True
        return False
    finally:
        if saved is missing:
            ctx.bindings.pop(expr.var, None)
        else:
            ctx.bindings[expr.var] = saved


def evaluate_expr(expr: Expr, ctx: EvalContext) -> bool:
    """Two-valued evaluation.

    Null never compares equal, unequal or as a member of anything, except in
    an explicit comparison against the ``null`` literal.
    """
    ctx.steps += 1
    if isinstance(expr, And):
        return evaluate_expr(expr.left, ctx) and evaluate_expr(expr.right, ctx)
    if isinstance(expr, Or):
        return evaluate_expr(expr.left, ctx) or evaluate_expr(expr.right, ctx)
    if isinstance(expr, Not):
        return not evaluate_expr(expr.operand, ctx)
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Exists):
        return _witness(expr, ctx, True)
    if isinstance(expr, Forall):
        return not _witness(expr, ctx, False)
    if isinstance(expr, (Eq, Neq)):
        left = _as_atom(evaluate_term(expr.left, ctx))
        right = _as_atom(evaluate_term(expr.right, ctx))
        if left is None or right is None:
            explicit = _is_null_literal(expr.left) or _is_null_literal(expr.right)
            if not explicit:
                return False
            both_null = left is None and right is None
            return both_null if isinstance(expr, Eq) else not both_null
        return (left == right) if isinstance(expr, Eq) else (left != right)
    if isinstance(expr, (In, NotIn)):
        element = _as_atom(evaluate_term(expr.element, ctx))
        collection = _as_set(evaluate_term(expr.collection, ctx))
        if element is None:
            return False
        return (element in collection) if isinstance(expr, In) else (element not in collection)
    if isinstance(expr, SetRel):
        left = _as_set(evaluate_term(expr.left, ctx))
        right = _as_set(evaluate_term(expr.right, ctx))
        if expr.op == "subset":
            return left < right
        if expr.op == "subseteq":
            return left <= right
        if expr.op == "nsubseteq":
            return not left <= right
        return bool(left & right)
    raise TypeError(f"not an expression: {expr!r}")


def evaluate(expr: Expr, registry: Registry, source: str, target: str,
             overlay: Optional[Mapping] = None) -> bool:
    return evaluate_expr(expr, EvalContext(registry, source, target, overlay=overlay or {}))

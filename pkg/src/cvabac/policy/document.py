"""Policy documents and the authorization decision functions."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from ..model import Registry, RegistryError
from .errors import DuplicateOperation, PolicyError, PolicyIoError, PolicySyntaxError, SchemaError
from .evaluate import EvalContext, evaluate_expr
from .nodes import Expr
from .parser import parse_expr, print_expr

ALLOW = "allowed"
NO_POLICY = "no-policy"
SOURCE_FAILED = "source-condition-failed"
TARGET_FAILED = "target-condition-failed"
EVALUATION_ERROR = "evaluation-error"


@dataclass(frozen=True)
class ScopeRule:
    when: Expr
    notify_groups: tuple


@dataclass(frozen=True)
class OperationPolicy:
    operation: str
    source_condition: Expr
    target_condition: Expr
    scope_rules: tuple = ()


@dataclass(frozen=True)
class PolicyDocument:
    policies: Mapping = field(default_factory=dict)

    def get(self, operation: str) -> Optional[OperationPolicy]:
        return self.policies.get(operation)

    def __contains__(self, operation: str) -> bool:
        return operation in self.policies

    def to_dict(self) -> dict:
        out = []
        for policy in self.policies.values():
            entry = {
                "operation": policy.operation,
                "source_condition": print_expr(policy.source_condition),
                "target_condition": print_expr(policy.target_condition),
            }
            if policy.scope_rules:
                entry["scope_rules"] = [{"when": print_expr(r.when),
                                         "notify_groups": list(r.notify_groups)}
                                        for r in policy.scope_rules]
            out.append(entry)
        return {"policies": out}


@dataclass(frozen=True)
class Decision:
    allowed: bool
    reason: str
    operation: Optional[str] = None
    detail: str = ""
    steps: int = field(default=0, compare=False)

    def __bool__(self) -> bool:
        return self.allowed


def _condition(text, schema, where: str) -> Expr:
    if not isinstance(text, str):
        raise SchemaError(f"{where}: condition must be a string")
    try:
        return parse_expr(text, schema)
    except PolicySyntaxError as err:
        raise SchemaError(f"{where}: {err}", err.position) from err
    except PolicyError as err:
        raise SchemaError(f"{where}: {err}", getattr(err, "position", None)) from err


def policy_document_from_dict(data, schema: Optional[Mapping] = None) -> PolicyDocument:
    if not isinstance(data, Mapping) or not isinstance(data.get("policies"), list):
        raise SchemaError("policy document must be an object with a 'policies' list")
    policies: dict = {}
    for index, entry in enumerate(data["policies"]):
        where = f"policies[{index}]"
        if not isinstance(entry, Mapping) or not isinstance(entry.get("operation"), str):
            raise SchemaError(f"{where}: missing 'operation' name")
        operation = entry["operation"]
        if operation in policies:
            raise DuplicateOperation(f"{where}: duplicate operation {operation!r}")
        for key in ("source_condition", "target_condition"):
            if key not in entry:
                raise SchemaError(f"{where}: missing {key!r}")
        rules = []
        for r_index, rule in enumerate(entry.get("scope_rules") or ()):
            r_where = f"{where}.scope_rules[{r_index}]"
            groups = rule.get("notify_groups") if isinstance(rule, Mapping) else None
            if not isinstance(groups, list) or not all(isinstance(g, str) for g in groups):
                raise SchemaError(f"{r_where}: 'notify_groups' must be a list of group ids")
            rules.append(ScopeRule(_condition(rule.get("when"), schema, r_where + ".when"),
                                   tuple(groups)))
        policies[operation] = OperationPolicy(
            operation,
            _condition(entry["source_condition"], schema, where + ".source_condition"),
            _condition(entry["target_condition"], schema, where + ".target_condition"),
            tuple(rules),
        )
    return PolicyDocument(policies)


def load_policy_document(file, schema: Optional[Mapping] = None) -> PolicyDocument:
    """Load from a path or an open text file."""
    try:
        if isinstance(file, (str, os.PathLike)):
            with open(file, encoding="utf-8") as handle:
                text = handle.read()
        else:
            text = file.read()
    except OSError as err:
        raise PolicyIoError(str(err)) from err
    try:
        data = json.loads(text)
    except ValueError as err:
        raise SchemaError(f"invalid JSON: {err}") from err
    return policy_document_from_dict(data, schema)


def auth_op(registry: Registry, source_id: str, operation: str, target_id: str,
            document: PolicyDocument, *, overlay: Optional[Mapping] = None) -> Decision:
    """Decide ``Auth_op(source, target)``.  Any failure denies."""
    policy = document.get(operation)
    if policy is None:
        return Decision(False, NO_POLICY, operation)
    ctx = EvalContext(registry, source_id, target_id, overlay=overlay or {})
    try:
        for entity_id in (source_id, target_id):
            registry.kind_of(entity_id)
        if not evaluate_expr(policy.source_condition, ctx):
            return Decision(False, SOURCE_FAILED, operation, steps=ctx.steps)
        if not evaluate_expr(policy.target_condition, ctx):
            return Decision(False, TARGET_FAILED, operation, steps=ctx.steps)
    except (PolicyError, RegistryError) as err:
        return Decision(False, EVALUATION_ERROR, operation, str(err), steps=ctx.steps)
    return Decision(True, ALLOW, operation, steps=ctx.steps)


def authorize_activity(registry: Registry, activity: Iterable, source_id: str,
                       document: PolicyDocument, *, overlay: Optional[Mapping] = None) -> Decision:
    """Allow only if every ``(operation, target)`` of the activity is allowed."""
    activity = list(activity)
    if not activity:
        raise ValueError("activity must contain at least one operation")
    steps = 0
    for operation, target_id in activity:
        decision = auth_op(registry, source_id, operation, target_id, document, overlay=overlay)
        steps += decision.steps
        if not decision.allowed:
            return Decision(False, decision.reason, operation,
                            decision.detail or f"target {target_id!r}", steps=steps)
    return Decision(True, ALLOW, None, steps=steps)

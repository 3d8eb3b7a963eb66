"""Effective attributes of groups, clustered objects and objects.

Set-valued attributes accumulate by union up the hierarchy.  Atomic
attributes take the most recently updated non-null value offered by a
parent; an entity keeps its own value only when every parent resolves to
null.  Recency is the ``updated_seq`` of the assignment that originally
supplied the value, carried unchanged through intermediate groups.

``oracle_eff_all`` recomputes the same views without recursion and is used
only by tests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .model import AttrValue, Kind, Registry, UnknownEntity


@dataclass(frozen=True)
class Resolved:
    value: AttrValue
    seq: Optional[int] = field(default=None, compare=False)
    origin: Optional[str] = field(default=None, compare=False)


@dataclass
class EffectiveView:
    entity_id: str
    values: dict
    provenance: dict = field(default_factory=dict, compare=False, repr=False)

    def to_jsonable(self) -> dict:
        return {name: sorted(v, key=atom_sort_key) if isinstance(v, frozenset) else v
                for name, v in sorted(self.values.items())}

    def to_json(self) -> str:
        return json.dumps(self.to_jsonable(), sort_keys=True)


def atom_sort_key(atom):
    return (type(atom).__name__, str(atom))


def _direct(registry: Registry, entity, attribute: str) -> Resolved:
    kind = registry.schema[attribute].kind
    assignment = entity.direct_atts.get(attribute)
    if assignment is None:
        return Resolved(frozenset() if kind is Kind.SET else None)
    return Resolved(assignment.value, assignment.updated_seq, entity.id)


def _inherit(registry: Registry, own: Resolved, parents: list, attribute: str) -> Resolved:
    if registry.schema[attribute].kind is Kind.SET:
        value = own.value
        for parent in parents:
            value = value | parent.value
        return Resolved(value)
    offered = [p for p in parents if p.value is not None]
    if not offered:
        return own
    return max(offered, key=lambda p: p.seq)


class _Resolver:
    """One query's worth of memoized group resolution."""

    def __init__(self, registry: Registry, attribute: str):
        registry.attribute(attribute)
        self.registry = registry
        self.attribute = attribute
        self.memo: dict = {}
        self.active: set = set()

    def group(self, group_id: str) -> Resolved:
        if group_id in self.memo:
            return self.memo[group_id]
        # acyclicity is enforced by the registry; this guards the recursion anyway
        assert group_id not in self.active, f"group {group_id!r} revisited"
        self.active.add(group_id)
        group = self.registry.group(group_id)
        parents = [self.group(p) for p in sorted(group.parents)]
        result = _inherit(self.registry, _direct(self.registry, group, self.attribute),
                          parents, self.attribute)
        self.active.discard(group_id)
        self.memo[group_id] = result
        return result

    def clustered_object(self, co_id: str) -> Resolved:
        co = self.registry.clustered_object(co_id)
        parents = [] if co.direct_group is None else [self.group(co.direct_group)]
        return _inherit(self.registry, _direct(self.registry, co, self.attribute),
                        parents, self.attribute)

    def object(self, object_id: str) -> Resolved:
        try:
            obj = self.registry.objects[object_id]
        except KeyError:
            raise UnknownEntity(f"unknown object {object_id!r}") from None
        return _inherit(self.registry, _direct(self.registry, obj, self.attribute),
                        [self.clustered_object(obj.parent_co)], self.attribute)

    def any(self, entity_id: str) -> Resolved:
        kind = self.registry.kind_of(entity_id)
        if kind == "group":
            return self.group(entity_id)
        if kind == "clustered_object":
            return self.clustered_object(entity_id)
        if kind == "object":
            return self.object(entity_id)
        # sources and the system pseudo-entity have nothing to inherit from
        return _direct(self.registry, self.registry.sources[entity_id], self.attribute)


def resolve(registry: Registry, entity_id: str, attribute: str) -> Resolved:
    """Effective value of ``attribute`` on any entity, with provenance."""
    return _Resolver(registry, attribute).any(entity_id)


def eff_group(registry: Registry, group_id: str, attribute: str) -> AttrValue:
    return _Resolver(registry, attribute).group(group_id).value


def eff_co(registry: Registry, co_id: str, attribute: str) -> AttrValue:
    return _Resolver(registry, attribute).clustered_object(co_id).value


def eff_object(registry: Registry, object_id: str, attribute: str) -> AttrValue:
    return _Resolver(registry, attribute).object(object_id).value


def eff_value(registry: Registry, entity_id: str, attribute: str) -> AttrValue:
    return resolve(registry, entity_id, attribute).value


def inheritance_chain(registry: Registry, entity_id: str) -> list:
    """The entity followed by every entity it can inherit from."""
    kind = registry.kind_of(entity_id)
    if kind == "object":
        co_id = registry.objects[entity_id].parent_co
        return [entity_id] + inheritance_chain(registry, co_id)
    if kind == "clustered_object":
        group_id = registry.clustered_objects[entity_id].direct_group
        return [entity_id] + ([] if group_id is None else inheritance_chain(registry, group_id))
    if kind == "group":
        return [entity_id] + registry.parents_closure(entity_id)
    return [entity_id]


def _visible_attributes(registry: Registry, chain: list) -> set:
    names: set = set()
    for entity_id in chain:
        names.update(registry.entity(entity_id).direct_atts)
    return names


def eff_all(registry: Registry, entity_id: str) -> EffectiveView:
    chain = inheritance_chain(registry, entity_id)
    values, provenance = {}, {}
    for attribute in sorted(_visible_attributes(registry, chain)):
        resolved = resolve(registry, entity_id, attribute)
        values[attribute] = resolved.value
        if resolved.origin is not None:
            provenance[attribute] = (resolved.origin, resolved.seq)
    return EffectiveView(entity_id, values, provenance)


def oracle_eff_all(registry: Registry, entity_id: str) -> EffectiveView:
    """Closed-form recomputation of :func:`eff_all`.

    Works on the materialized ancestor closure instead of recursing:

    * set attribute: union of direct values over the entity and all ancestors;
    * atomic attribute: among the entity and its ancestors, keep nodes with a
      non-null direct value that have no non-null strict ancestor; the one
      written last wins.  With no such node the value is null.
    """
    def parents_of(node):
        kind = registry.kind_of(node)
        if kind == "object":
            return [registry.objects[node].parent_co]
        if kind == "clustered_object":
            group_id = registry.clustered_objects[node].direct_group
            return [] if group_id is None else [group_id]
        if kind == "group":
            return list(registry.groups[node].parents)
        return []

    def strict_ancestors(node):
        seen, stack = set(), parents_of(node)
        while stack:
            current = stack.pop()
            if current not in seen:
                seen.add(current)
                stack.extend(parents_of(current))
        return seen

    nodes = {entity_id} | strict_ancestors(entity_id)
    above = {node: strict_ancestors(node) for node in nodes}
    directs = {node: registry.entity(node).direct_atts for node in nodes}
    names = set().union(*(d.keys() for d in directs.values()))

    values = {}
    for attribute in sorted(names):
        if registry.schema[attribute].kind is Kind.SET:
            acc = frozenset()
            for node in nodes:
                if attribute in directs[node]:
                    acc |= directs[node][attribute].value
            values[attribute] = acc
            continue
        live = {node for node in nodes
                if attribute in directs[node] and directs[node][attribute].value is not None}
        maximal = [node for node in live if not (above[node] & live)]
        if maximal:
            winner = max(maximal, key=lambda node: directs[node][attribute].updated_seq)
            values[attribute] = directs[winner][attribute].value
        else:
            values[attribute] = None
    return EffectiveView(entity_id, values)

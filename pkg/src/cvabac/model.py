"""Entity registry: sources, clustered objects, objects and groups.

The registry owns direct attribute assignments and the structural links
(``directG``, ``parentCO``, group parents).  Every structural invariant is
checked when the mutation happens, so a registry can never be observed in an
inconsistent state.
"""

from __future__ import annotations

import enum
import heapq
import itertools
import threading
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Optional, Union

SYSTEM_ID = "system"

Atom = Union[str, int, float, bool, None]
AttrValue = Union[Atom, frozenset]


class RegistryError(Exception):
    """Base class for registry mutation and lookup failures."""


class DuplicateId(RegistryError):
    pass


class UnknownEntity(RegistryError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class UnknownGroup(UnknownEntity):
    pass


class UnknownParent(UnknownGroup):
    pass


class UnknownAttribute(RegistryError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class CycleDetected(RegistryError):
    pass


class KindMismatch(RegistryError, TypeError):
    pass


class OutOfRange(RegistryError, ValueError):
    pass


class ImmutableParent(RegistryError):
    pass


class Kind(str, enum.Enum):
    SET = "set"
    ATOMIC = "atomic"


@dataclass(frozen=True)
class AttributeSchema:
    name: str
    kind: Kind
    range: Optional[tuple] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.range is not None:
            values = tuple(self.range)
            if not values:
                raise ValueError(f"attribute {self.name!r}: range must be non-empty")
            if len(set(values)) != len(values):
                raise ValueError(f"attribute {self.name!r}: range has duplicates")
            object.__setattr__(self, "range", values)


@dataclass(frozen=True)
class AttributeAssignment:
    attribute: str
    value: AttrValue
    updated_seq: int


@dataclass
class Group:
    id: str
    parents: frozenset = frozenset()
    direct_atts: dict = field(default_factory=dict)
    level: int = 0


@dataclass
class ClusteredObject:
    id: str
    direct_group: Optional[str] = None
    direct_atts: dict = field(default_factory=dict)
    group_seq: Optional[int] = None


@dataclass
class ObjectEntity:
    id: str
    parent_co: str
    direct_atts: dict = field(default_factory=dict)


@dataclass
class Source:
    id: str
    direct_atts: dict = field(default_factory=dict)
    preference_policy: Optional[str] = None


def is_atom(value: Any) -> bool:
    return value is None or isinstance(value, (str, int, float, bool))


class Registry:
    """Holds every entity of the model plus the attribute schema.

    Writers are serialized by a re-entrant lock.  ``updated_seq`` values come
    from a single registry-wide counter, so any two writes are totally ordered.
    """

    def __init__(self) -> None:
        self._lock = threading.RLock()
        self._counter = itertools.count(1)
        self.schema: dict[str, AttributeSchema] = {}
        self.groups: dict[str, Group] = {}
        self.clustered_objects: dict[str, ClusteredObject] = {}
        self.objects: dict[str, ObjectEntity] = {}
        self.sources: dict[str, Source] = {SYSTEM_ID: Source(SYSTEM_ID)}
        self._children: dict[str, set] = {}
        self._objects_of: dict[str, set] = {}

    # -- schema ---------------------------------------------------------

    def declare_attribute(self, name: str, kind: Union[str, Kind],
                          range: Optional[Iterable[Atom]] = None) -> AttributeSchema:
        with self._lock:
            if name in self.schema:
                raise DuplicateId(f"attribute {name!r} already declared")
            schema = AttributeSchema(name, Kind(kind), None if range is None else tuple(range))
            self.schema[name] = schema
            return schema

    def attribute(self, name: str) -> AttributeSchema:
        try:
            return self.schema[name]
        except KeyError:
            raise UnknownAttribute(f"unknown attribute {name!r}") from None

    # -- entity lookup --------------------------------------------------

    def kind_of(self, entity_id: str) -> str:
        if entity_id == SYSTEM_ID:
            return "system"
        if entity_id in self.groups:
            return "group"
        if entity_id in self.clustered_objects:
            return "clustered_object"
        if entity_id in self.objects:
            return "object"
        if entity_id in self.sources:
            return "source"
        raise UnknownEntity(f"unknown entity {entity_id!r}")

    def __contains__(self, entity_id: str) -> bool:
        return (entity_id in self.groups or entity_id in self.clustered_objects
                or entity_id in self.objects or entity_id in self.sources)

    def entity(self, entity_id: str):
        for table in (self.groups, self.clustered_objects, self.objects, self.sources):
            if entity_id in table:
                return table[entity_id]
        raise UnknownEntity(f"unknown entity {entity_id!r}")

    def group(self, group_id: str) -> Group:
        try:
            return self.groups[group_id]
        except KeyError:
            raise UnknownGroup(f"unknown group {group_id!r}") from None

    def clustered_object(self, co_id: str) -> ClusteredObject:
        try:
            return self.clustered_objects[co_id]
        except KeyError:
            raise UnknownEntity(f"unknown clustered object {co_id!r}") from None

    def _check_new_id(self, entity_id: str) -> None:
        if not isinstance(entity_id, str) or not entity_id:
            raise ValueError("entity id must be a non-empty string")
        if entity_id in self:
            raise DuplicateId(f"entity id {entity_id!r} already in use")

    # -- registration ---------------------------------------------------

    def register_group(self, group_id: str, parents: Iterable[str] = ()) -> Group:
        parents = frozenset(parents)
        with self._lock:
            if group_id in parents:
                raise CycleDetected(f"group {group_id!r} cannot be its own parent")
            self._check_new_id(group_id)
            for parent in sorted(parents):
                if parent not in self.groups:
                    raise UnknownParent(f"unknown parent group {parent!r}")
            level = 1 + max((self.groups[p].level for p in parents), default=-1)
            group = Group(group_id, parents, {}, level)
            self.groups[group_id] = group
            self._children[group_id] = set()
            for parent in parents:
                self._children[parent].add(group_id)
            return group

    def link_groups(self, child_id: str, parent_id: str) -> None:
        """Add ``parent_id`` as an extra parent of ``child_id``.

        Rejected with :class:`CycleDetected` if ``parent_id`` already inherits
        from ``child_id``.
        """
        with self._lock:
            child = self.group(child_id)
            if parent_id not in self.groups:
                raise UnknownParent(f"unknown parent group {parent_id!r}")
            if parent_id == child_id or child_id in self.ancestors(parent_id):
                raise CycleDetected(f"linking {child_id!r} under {parent_id!r} creates a cycle")
            child.parents = child.parents | {parent_id}
            self._children[parent_id].add(child_id)
            self._relevel(child_id)

    def _relevel(self, group_id: str) -> None:
        pending = [group_id]
        while pending:
            gid = pending.pop()
            group = self.groups[gid]
            level = 1 + max((self.groups[p].level for p in group.parents), default=-1)
            if level != group.level or gid == group_id:
                group.level = level
                pending.extend(self._children[gid])

    def register_clustered_object(self, co_id: str) -> ClusteredObject:
        with self._lock:
            self._check_new_id(co_id)
            co = ClusteredObject(co_id)
            self.clustered_objects[co_id] = co
            self._objects_of[co_id] = set()
            return co

    def register_object(self, object_id: str, parent_co: str) -> ObjectEntity:
        with self._lock:
            if object_id in self.objects:
                raise ImmutableParent(f"object {object_id!r} already has parent "
                                      f"{self.objects[object_id].parent_co!r}")
            self._check_new_id(object_id)
            self.clustered_object(parent_co)
            obj = ObjectEntity(object_id, parent_co)
            self.objects[object_id] = obj
            self._objects_of[parent_co].add(object_id)
            return obj

    def register_source(self, source_id: str) -> Source:
        with self._lock:
            self._check_new_id(source_id)
            source = Source(source_id)
            self.sources[source_id] = source
            return source

    # -- attributes -----------------------------------------------------

    def _normalize(self, schema: AttributeSchema, value: Any) -> AttrValue:
        if schema.kind is Kind.ATOMIC:
            if not is_atom(value):
                raise KindMismatch(f"attribute {schema.name!r} is atomic, got {type(value).__name__}")
            atoms = () if value is None else (value,)
        else:
            if value is None:
                value = ()
            if is_atom(value) or isinstance(value, Mapping):
                raise KindMismatch(f"attribute {schema.name!r} is set-valued, got {type(value).__name__}")
            value = frozenset(value)
            for atom in value:
                if atom is None or not is_atom(atom):
                    raise KindMismatch(f"attribute {schema.name!r}: invalid set member {atom!r}")
            atoms = value
        if schema.range is not None:
            for atom in atoms:
                if atom not in schema.range:
                    raise OutOfRange(f"{atom!r} not in range of {schema.name!r}")
        return value

    def set_attribute(self, entity_id: str, attribute: str, value: Any) -> AttributeAssignment:
        """Directly assign ``value``; atomic ``None`` is the null value."""
        with self._lock:
            entity = self.entity(entity_id) if entity_id != SYSTEM_ID else self.sources[SYSTEM_ID]
            schema = self.attribute(attribute)
            assignment = AttributeAssignment(attribute, self._normalize(schema, value), next(self._counter))
            entity.direct_atts[attribute] = assignment
            return assignment

    def direct(self, entity_id: str, attribute: str) -> Optional[AttributeAssignment]:
        self.attribute(attribute)
        return self.entity(entity_id).direct_atts.get(attribute)

    def direct_value(self, entity_id: str, attribute: str) -> AttrValue:
        """Direct value, with null (atomic) or the empty set standing in for no assignment."""
        schema = self.attribute(attribute)
        assignment = self.entity(entity_id).direct_atts.get(attribute)
        if assignment is None:
            return frozenset() if schema.kind is Kind.SET else None
        return assignment.value

    # -- membership -----------------------------------------------------

    def assign_direct_group(self, co_id: str, group_id: str) -> Optional[str]:
        with self._lock:
            co = self.clustered_object(co_id)
            self.group(group_id)
            previous = co.direct_group
            co.direct_group = group_id
            co.group_seq = next(self._counter)
            return previous

    def members_of(self, group_id: str, transitive: bool = False) -> set:
        self.group(group_id)
        groups = {group_id}
        if transitive:
            groups |= self.descendants(group_id)
        return {co.id for co in self.clustered_objects.values() if co.direct_group in groups}

    def objects_of(self, co_id: str) -> set:
        self.clustered_object(co_id)
        return set(self._objects_of[co_id])

    def children(self, group_id: str) -> set:
        self.group(group_id)
        return set(self._children[group_id])

    def ancestors(self, group_id: str) -> set:
        seen: set = set()
        stack = list(self.group(group_id).parents)
        while stack:
            gid = stack.pop()
            if gid not in seen:
                seen.add(gid)
                stack.extend(self.groups[gid].parents)
        return seen

    def descendants(self, group_id: str) -> set:
        seen: set = set()
        self.group(group_id)
        stack = list(self._children[group_id])
        while stack:
            gid = stack.pop()
            if gid not in seen:
                seen.add(gid)
                stack.extend(self._children[gid])
        return seen

    def parents_closure(self, group_id: str) -> list:
        """All ancestors, nearest first: a topological order over the ancestor
        subgraph (children before parents) with ties broken by id."""
        ancestors = self.ancestors(group_id)
        nodes = ancestors | {group_id}
        pending = {g: sum(1 for c in self._children[g] if c in nodes) for g in nodes}
        heap = [g for g, n in pending.items() if n == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            gid = heapq.heappop(heap)
            order.append(gid)
            for parent in self.groups[gid].parents:
                pending[parent] -= 1
                if pending[parent] == 0:
                    heapq.heappush(heap, parent)
        return [g for g in order if g != group_id]

    def toposort(self) -> list:
        """Topological order of all groups (parents first); raises on a cycle."""
        indegree = {gid: len(g.parents) for gid, g in self.groups.items()}
        heap = [gid for gid, n in indegree.items() if n == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            gid = heapq.heappop(heap)
            order.append(gid)
            for child in self._children[gid]:
                indegree[child] -= 1
                if indegree[child] == 0:
                    heapq.heappush(heap, child)
        if len(order) != len(self.groups):
            raise CycleDetected("group hierarchy contains a cycle")
        return order

    def entity_ids(self) -> list:
        return sorted(set(self.groups) | set(self.clustered_objects)
                      | set(self.objects) | set(self.sources))

    def snapshot(self) -> dict:
        """Plain-data copy of all direct state, for before/after comparisons."""
        def atts(entity):
            return {name: (a.value, a.updated_seq) for name, a in entity.direct_atts.items()}
        with self._lock:
            return {
                "groups": {g.id: (g.parents, g.level, atts(g)) for g in self.groups.values()},
                "clustered_objects": {c.id: (c.direct_group, atts(c))
                                      for c in self.clustered_objects.values()},
                "objects": {o.id: (o.parent_co, atts(o)) for o in self.objects.values()},
                "sources": {s.id: atts(s) for s in self.sources.values()},
            }

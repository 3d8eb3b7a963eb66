"""Hypothesis strategies shared by the property and acceptance tests."""

from __future__ import annotations

from functools import lru_cache

from hypothesis import strategies as st

from cvabac.model import Kind, Registry
from cvabac.policy.nodes import (And, Const, DirectAtt, EffAtt, Eq, Exists, Forall, In, Intersect,
                                 Literal, Neq, Not, NotIn, Or, SetLiteral, SetRel, Union_, Var)

VALUES = ("a", "b", "c", "d")


# -- random registries -------------------------------------------------------

@st.composite
def registries(draw, max_groups=8, max_cos=6, max_objects=3, max_attributes=4, max_writes=30):
    """A random registry: group DAG, COs with objects, mixed attributes, writes.

    Writes include null atomics and empty sets so revocation is exercised,
    and direct-group reassignments so membership changes interleave with
    attribute updates.
    """
    reg = Registry()
    n_atts = draw(st.integers(1, max_attributes))
    attributes = []
    for i in range(n_atts):
        kind = draw(st.sampled_from([Kind.SET, Kind.ATOMIC]))
        reg.declare_attribute(f"att{i}", kind)
        attributes.append((f"att{i}", kind))

    n_groups = draw(st.integers(1, max_groups))
    groups = []
    for i in range(n_groups):
        parents = draw(st.sets(st.sampled_from(groups), max_size=3)) if groups else set()
        reg.register_group(f"g{i}", parents)
        groups.append(f"g{i}")

    cos, objects = [], []
    for i in range(draw(st.integers(0, max_cos))):
        co = f"co{i}"
        reg.register_clustered_object(co)
        cos.append(co)
        for j in range(draw(st.integers(0, max_objects))):
            reg.register_object(f"{co}.o{j}", co)
            objects.append(f"{co}.o{j}")

    entities = groups + cos + objects
    for _ in range(draw(st.integers(0, max_writes))):
        op = draw(st.sampled_from(["set", "set", "set", "assign"] if cos else ["set"]))
        if op == "assign":
            reg.assign_direct_group(draw(st.sampled_from(cos)), draw(st.sampled_from(groups)))
            continue
        name, kind = draw(st.sampled_from(attributes))
        if kind is Kind.SET:
            value = draw(st.frozensets(st.sampled_from(VALUES), max_size=3))
        else:
            value = draw(st.one_of(st.none(), st.sampled_from(VALUES)))
        reg.set_attribute(draw(st.sampled_from(entities)), name, value)
    return reg


# -- random policy ASTs ------------------------------------------------------

SET_ATTS = ("tags", "zones")
ATOMIC_ATTS = ("name", "level")
SCHEMA = {"tags": Kind.SET, "zones": Kind.SET, "name": Kind.ATOMIC, "level": Kind.ATOMIC}
REF = st.sampled_from(["source", "target", "system"])
ATOMS = st.one_of(st.sampled_from(VALUES), st.integers(0, 3), st.booleans())


@lru_cache(maxsize=None)
def atomic_terms(bound):
    options = [
        st.builds(EffAtt, st.sampled_from(ATOMIC_ATTS), REF),
        st.builds(DirectAtt, st.sampled_from(ATOMIC_ATTS), REF),
        st.builds(Literal, ATOMS),
    ]
    if bound:
        options.append(st.builds(Var, st.sampled_from(sorted(bound))))
    return st.one_of(options)


@lru_cache(maxsize=None)
def set_terms():
    leaf = st.one_of(
        st.builds(EffAtt, st.sampled_from(SET_ATTS), REF),
        st.builds(DirectAtt, st.sampled_from(SET_ATTS), REF),
        st.builds(SetLiteral, st.frozensets(ATOMS, max_size=3)),
    )
    return st.recursive(leaf, lambda inner: st.one_of(st.builds(Union_, inner, inner),
                                                      st.builds(Intersect, inner, inner)),
                        max_leaves=3)


@lru_cache(maxsize=None)
def relations(bound):
    atom, sets = atomic_terms(bound), set_terms()
    null = st.just(Literal(None))
    return st.one_of(
        st.builds(Eq, atom, st.one_of(atom, null)),
        st.builds(Neq, st.one_of(atom, null), atom),
        st.builds(In, atom, sets),
        st.builds(NotIn, atom, sets),
        st.builds(SetRel, st.sampled_from(["subset", "subseteq", "nsubseteq", "intersects"]),
                  sets, sets),
        st.builds(Const, st.booleans()),
    )


@st.composite
def expressions(draw, bound=frozenset(), depth=3):
    if depth == 0 or draw(st.integers(0, 3)) == 0:
        return draw(relations(bound))
    shape = draw(st.sampled_from(["and", "or", "not", "exists", "forall"]))
    sub = expressions(bound, depth - 1)
    if shape == "and":
        return And(draw(sub), draw(sub))
    if shape == "or":
        return Or(draw(sub), draw(sub))
    if shape == "not":
        return Not(draw(sub))
    var = draw(st.sampled_from(["x", "y"]))
    body = draw(expressions(bound | {var}, depth - 1))
    node = Exists if shape == "exists" else Forall
    return node(var, draw(set_terms()), body)


@st.composite
def eval_registries(draw):
    """Registry with entities ``src`` and ``tgt`` carrying the AST attributes."""
    reg = Registry()
    for name, kind in SCHEMA.items():
        reg.declare_attribute(name, kind)
    reg.register_group("top")
    reg.register_clustered_object("tgt")
    reg.assign_direct_group("tgt", "top")
    reg.register_source("src")
    for entity in ("top", "tgt", "src", "system"):
        for name in SET_ATTS:
            if draw(st.booleans()):
                reg.set_attribute(entity, name, draw(st.frozensets(ATOMS, max_size=3)))
        for name in ATOMIC_ATTS:
            if draw(st.booleans()):
                reg.set_attribute(entity, name, draw(st.one_of(st.none(), ATOMS)))
    return reg

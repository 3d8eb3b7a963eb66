import pytest
from hypothesis import given, settings

from cvabac.model import (CycleDetected, DuplicateId, ImmutableParent, KindMismatch, OutOfRange,
                          Registry, UnknownAttribute, UnknownGroup, UnknownParent)
from generators import registries


def test_group_levels(county):
    assert county.group("County-XYZ").level == 0
    assert county.group("Location-A").level == 1
    assert county.group("Car-A").level == 2


def test_self_loop_rejected():
    reg = Registry()
    with pytest.raises(CycleDetected):
        reg.register_group("G", {"G"})
    assert "G" not in reg


def test_unknown_parent_and_duplicate():
    reg = Registry()
    with pytest.raises(UnknownParent):
        reg.register_group("child", {"missing"})
    reg.register_group("G")
    with pytest.raises(DuplicateId):
        reg.register_group("G")
    with pytest.raises(DuplicateId):
        reg.register_clustered_object("G")


def test_link_groups_rejects_cycle():
    reg = Registry()
    reg.register_group("a")
    reg.register_group("b", {"a"})
    reg.register_group("c", {"b"})
    with pytest.raises(CycleDetected):
        reg.link_groups("a", "c")
    reg.register_group("d")
    reg.link_groups("a", "d")
    assert reg.group("c").level == 3
    assert reg.toposort().index("d") < reg.toposort().index("a")


def test_set_attribute_fresh_seq(county):
    first = county.set_attribute("Location-A", "Deer_Threat", "ON")
    second = county.set_attribute("Location-B", "Deer_Threat", "OFF")
    assert first.value == "ON"
    assert second.updated_seq > first.updated_seq


def test_vin_stored_verbatim(county):
    county.set_attribute("Vehicle-2", "VIN", "9246572903752")
    assert county.direct_value("Vehicle-2", "VIN") == "9246572903752"


def test_kind_mismatch(county):
    with pytest.raises(KindMismatch):
        county.set_attribute("Vehicle-1", "Type", {"Car"})
    with pytest.raises(KindMismatch):
        county.set_attribute("Vehicle-1", "Tags", "Car")
    with pytest.raises(KindMismatch):
        county.set_attribute("Vehicle-1", "Tags", {"a", None})


def test_range_and_unknown_attribute():
    reg = Registry()
    reg.declare_attribute("Deer_Threat", "atomic", ["ON", "OFF"])
    reg.register_group("L")
    reg.set_attribute("L", "Deer_Threat", None)
    with pytest.raises(OutOfRange):
        reg.set_attribute("L", "Deer_Threat", "MAYBE")
    with pytest.raises(UnknownAttribute):
        reg.set_attribute("L", "Colour", "red")


def test_unset_direct_values(county):
    assert county.direct_value("Car-A", "Location") is None
    assert county.direct_value("Car-A", "Tags") == frozenset()


def test_assign_direct_group(county):
    assert county.assign_direct_group("Vehicle-1", "Car-A") is None
    assert county.assign_direct_group("Vehicle-1", "Car-B") == "Car-A"
    assert county.members_of("Car-A") == set()
    assert county.members_of("Car-B") == {"Vehicle-1"}
    with pytest.raises(UnknownGroup):
        county.assign_direct_group("Vehicle-1", "NoSuchGroup")


def test_members_of(county):
    county.assign_direct_group("Vehicle-1", "Car-A")
    county.assign_direct_group("Vehicle-2", "Car-A")
    assert county.members_of("Car-A") == {"Vehicle-1", "Vehicle-2"}
    county.register_clustered_object("Bus-1")
    county.assign_direct_group("Bus-1", "Bus-A")
    assert county.members_of("Location-A") == set()
    assert county.members_of("Location-A", transitive=True) == {"Vehicle-1", "Vehicle-2", "Bus-1"}
    assert county.members_of("Car-D") == set()


def test_parents_closure(county):
    assert county.parents_closure("Car-A") == ["Location-A", "County-XYZ"]
    assert county.parents_closure("County-XYZ") == []


def test_parents_closure_diamond():
    reg = Registry()
    reg.register_group("a")
    reg.register_group("b", {"a"})
    reg.register_group("c", {"a"})
    reg.register_group("d", {"b", "c"})
    closure = reg.parents_closure("d")
    assert sorted(closure) == ["a", "b", "c"]
    assert closure[-1] == "a"


def test_object_parent_immutable(county):
    county.register_object("Engine", "Vehicle-2")
    with pytest.raises(ImmutableParent):
        county.register_object("Engine", "Vehicle-1")
    assert county.objects_of("Vehicle-2") == {"Engine"}


def _brute_ancestors(reg, gid):
    found, frontier = set(), set(reg.group(gid).parents)
    while frontier:
        found |= frontier
        frontier = {p for g in frontier for p in reg.group(g).parents} - found
    return found


@settings(max_examples=150, deadline=None)
@given(registries())
def test_registry_invariants(reg):
    order = reg.toposort()
    position = {g: i for i, g in enumerate(order)}
    for gid, group in reg.groups.items():
        assert all(position[p] < position[gid] for p in group.parents)
        assert set(reg.parents_closure(gid)) == _brute_ancestors(reg, gid)
    seqs = [a.updated_seq for eid in reg.entity_ids() for a in reg.entity(eid).direct_atts.values()]
    assert len(seqs) == len(set(seqs))
    owners = [o.parent_co for o in reg.objects.values()]
    assert sum(len(reg.objects_of(co)) for co in reg.clustered_objects) == len(owners)
    for co in reg.clustered_objects.values():
        memberships = [g for g in reg.groups if co.id in reg.members_of(g)]
        assert len(memberships) <= 1

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvabac.bus import shadow_topic
from cvabac.config import (DEFAULT_FLEET, DEFAULT_POLICY, ConfigError, build_world, data_path,
                           load_json)
from cvabac.controller import BadCoordinates, Geofence, ServiceRequest, parse_coordinates
from cvabac.inheritance import eff_all, eff_co

PAPER_POINT = {"Latitude": "29.4769353", "Longitude": "-98.5018237"}


def _move(world, thing, lat, lon):
    world.broker.publish(shadow_topic(thing), {"state": {"reported": {"Latitude": lat, "Longitude": lon}}})


def _views(world):
    reg = world.registry
    return {e: eff_all(reg, e) for e in reg.entity_ids()}


def test_reassignment_to_car_a(cold_world):
    events = []
    cold_world.controller.on_event = lambda kind, fields: events.append((kind, dict(fields)))
    _move(cold_world, "Vehicle-1", "29.4655", "-98.5030")
    assert cold_world.registry.clustered_objects["Vehicle-1"].direct_group == "Car-D"
    cold_world.broker.publish(shadow_topic("Vehicle-1"), {"state": {"reported": PAPER_POINT}})
    assert cold_world.registry.clustered_objects["Vehicle-1"].direct_group == "Car-A"
    assert events[-1] == ("assign", {"thing": "Vehicle-1", "from": "Car-D", "to": "Car-A"})
    assert cold_world.broker.get_shadow("Vehicle-1").reported["Latitude"] == "29.4769353"


def test_no_event_inside_current_fence(world):
    sub = world.broker.subscribe("groups/#")
    before = world.registry.clustered_objects["Vehicle-1"].group_seq
    _move(world, "Vehicle-1", "29.4750", "-98.5000")
    assert world.registry.clustered_objects["Vehicle-1"].group_seq == before
    assert sub.drain() == []


def test_outside_every_fence_keeps_assignment(world):
    events = []
    world.controller.on_event = lambda kind, fields: events.append(kind)
    _move(world, "Vehicle-1", "10.0", "10.0")
    assert world.registry.clustered_objects["Vehicle-1"].direct_group == "Car-A"
    assert events == ["out-of-coverage"]


def test_bad_coordinates_are_reported(world):
    events = []
    world.controller.on_event = lambda kind, fields: events.append(kind)
    _move(world, "Vehicle-1", "north", "-98.5")
    assert events == ["bad-coordinates"]
    with pytest.raises(BadCoordinates):
        parse_coordinates({"Latitude": "95", "Longitude": "0"})


def test_assign_group(world):
    ctl = world.controller
    assert ctl.assign_group(29.4769353, -98.5018237, "Car") == "Car-A"
    assert ctl.assign_group(29.475, -98.490, "Bus") == "Bus-B"
    assert ctl.assign_group(29.475, -98.498, "Car") == "Car-A"
    assert ctl.assign_group(0.0, 0.0, "Car") is None


def test_overlapping_fences_rejected(fleet_config):
    fleet_config["groups"][2]["geofence"] = dict(fleet_config["groups"][1]["geofence"])
    with pytest.raises(ConfigError):
        build_world(fleet_config)


def test_geofence_contains_edges():
    fence = Geofence("g", 1.0, 2.0, 3.0, 4.0)
    assert fence.contains(1.0, 3.0) and fence.contains(2.0, 4.0)
    assert not fence.contains(2.0001, 3.5)


def test_assignment_table_matches_registry(world):
    rows = world.controller.assignment_table()
    assert [(r.thing_name, r.location_group, r.subgroup) for r in rows] == [
        ("Vehicle-1", "Location-A", "Car-A"), ("Vehicle-2", "Location-A", "Car-A")]
    assert "Vehicle-2  Location-A  Car-A" in world.controller.render_assignment_table()


def test_deer_threat_propagation(cold_world):
    for thing in ("Vehicle-1", "Vehicle-2"):
        cold_world.broker.publish(shadow_topic(thing), {"state": {"reported": PAPER_POINT}})
    sub = cold_world.broker.subscribe("notify/#")
    record = cold_world.controller.propagate_group_attribute("Sensor-X", "Location-A", "Deer_Threat", "ON")
    assert record.allowed and record.notified == {"Vehicle-1", "Vehicle-2"}
    assert sorted(m.topic for m in sub.drain()) == ["notify/Car-A/Vehicle-1", "notify/Car-A/Vehicle-2"]
    assert eff_all(cold_world.registry, "Vehicle-2").values["Deer_Threat"] == "ON"
    off = cold_world.controller.propagate_group_attribute("Sensor-X", "Location-A", "Deer_Threat", "OFF")
    assert off.notified == {"Vehicle-1", "Vehicle-2"}
    assert eff_co(cold_world.registry, "Vehicle-2", "Deer_Threat") == "OFF"


def test_denied_propagation_changes_nothing(world):
    sub = world.broker.subscribe("notify/#")
    snapshot, views = world.registry.snapshot(), _views(world)
    record = world.controller.propagate_group_attribute("Sensor-X", "Location-B", "Deer_Threat", "ON")
    assert not record.allowed and record.notified == frozenset()
    assert record.reason == "target-condition-failed"
    assert world.registry.snapshot() == snapshot and _views(world) == views
    assert sub.drain() == []
    assert world.controller.audit


def _request(source, destination):
    return ServiceRequest("Requestor", "car_pool_notification",
                          {"source": source, "destination": destination})


def _spread(world):
    """One Car in every location plus Vehicle-1/2 in Location-A."""
    reg = world.registry
    points = {"B": ("29.475", "-98.490"), "C": ("29.465", "-98.490"), "D": ("29.465", "-98.505")}
    for letter, (lat, lon) in points.items():
        reg.register_clustered_object(f"Car-in-{letter}")
        reg.set_attribute(f"Car-in-{letter}", "Type", "Car")
        _move(world, f"Car-in-{letter}", lat, lon)


def test_car_pool_scoping(world):
    _spread(world)
    ctl, reg = world.controller, world.registry
    same = ctl.handle_service_request(_request("Location-A", "Location-A"))
    assert same.notified == reg.members_of("Car-A") == {"Vehicle-1", "Vehicle-2"}
    cross = ctl.handle_service_request(_request("Location-A", "Location-B"))
    assert cross.notified == reg.members_of("Car-A") | reg.members_of("Car-B") | reg.members_of("Car-C")
    assert "Car-in-D" not in cross.notified


def test_car_pool_uncovered_destination(world):
    record = world.controller.handle_service_request(_request("Location-A", "Location-Z"))
    assert not record.allowed and record.notified == frozenset()


def test_car_pool_over_the_bus(world):
    sub = world.broker.subscribe("notify/requestor/#")
    world.broker.publish(shadow_topic("Requestor"), _request("Location-A", "Location-A").payload())
    record = world.controller.records[-1]
    assert record.notified == {"Vehicle-1", "Vehicle-2"}
    assert sub.get().data["accepted"] == ["Vehicle-1", "Vehicle-2"]


def test_broadcast_counts_whole_fleet(world):
    _spread(world)
    record = world.controller.broadcast_all(_request("Location-A", "Location-A"))
    assert len(record.notified) == len(world.registry.clustered_objects) == 5


def test_broadcast_empty_fleet(fleet_config, policy_config):
    fleet_config["clustered_objects"], fleet_config["objects"] = [], []
    fleet_config["preferences"], fleet_config["warmup"] = [], []
    world = build_world(fleet_config, policy_config)
    assert world.controller.broadcast_all(_request("Location-A", "Location-A")).notified == frozenset()


LAT = st.floats(29.455, 29.485).map(lambda v: f"{v:.6f}")
LON = st.floats(-98.512, -98.484).map(lambda v: f"{v:.6f}")


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["Vehicle-1", "Vehicle-2"]), LAT, LON), max_size=12),
       st.sampled_from(["A", "B", "C", "D"]), st.sampled_from(["A", "B", "C", "D"]))
def test_controller_properties(moves, src, dst):
    world = build_world(load_json(data_path(DEFAULT_FLEET)), load_json(data_path(DEFAULT_POLICY)))
    ctl, reg = world.controller, world.registry
    last = {}
    for thing, lat, lon in moves:
        _move(world, thing, lat, lon)
        if ctl.assign_group(float(lat), float(lon), "Car") is not None:
            last[thing] = (float(lat), float(lon))
    for thing, (lat, lon) in last.items():
        group = reg.clustered_objects[thing].direct_group
        assert ctl.geofences[ctl.location_of(group)].contains(lat, lon)
    table = {r.thing_name: r.subgroup for r in ctl.assignment_table()}
    assert table == {c.id: c.direct_group for c in reg.clustered_objects.values() if c.direct_group}
    scoped = ctl.handle_service_request(_request(f"Location-{src}", f"Location-{dst}"))
    expected = set().union(*(reg.members_of(g) for g in scoped.groups)) if scoped.groups else set()
    assert scoped.notified == expected
    assert scoped.accepted <= scoped.notified
    assert scoped.notified <= ctl.broadcast_all(_request("x", "y")).notified

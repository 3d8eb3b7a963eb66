import pytest

from cvabac.config import DEFAULT_FLEET, DEFAULT_POLICY, build_world, data_path, load_json
from cvabac.model import Registry


@pytest.fixture
def fleet_config():
    return load_json(data_path(DEFAULT_FLEET))


@pytest.fixture
def policy_config():
    return load_json(data_path(DEFAULT_POLICY))


@pytest.fixture
def world(fleet_config, policy_config):
    """Bundled fleet after its scripted warm-up (vehicles placed, Deer_Threat ON)."""
    w = build_world(fleet_config, policy_config)
    w.apply_warmup()
    return w


@pytest.fixture
def cold_world(fleet_config, policy_config):
    return build_world(fleet_config, policy_config)


@pytest.fixture
def county():
    """County-XYZ / Location-{A..D} / {Car,Bus}-{A..D} built by hand."""
    reg = Registry()
    for name in ("Deer_Threat", "Location", "Type", "VIN", "thingName",
                 "Center-Latitude", "Center-Longitude"):
        reg.declare_attribute(name, "atomic")
    reg.declare_attribute("Tags", "set")
    reg.register_group("County-XYZ")
    for letter in "ABCD":
        reg.register_group(f"Location-{letter}", {"County-XYZ"})
        reg.register_group(f"Car-{letter}", {f"Location-{letter}"})
        reg.register_group(f"Bus-{letter}", {f"Location-{letter}"})
    for co in ("Vehicle-1", "Vehicle-2"):
        reg.register_clustered_object(co)
    return reg

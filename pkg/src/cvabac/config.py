"""Fleet/group configuration files and assembly of a running world."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Mapping, Optional, Union

from .bus import Broker, shadow_topic
from .controller import Controller, Geofence
from .model import SYSTEM_ID, Registry, RegistryError
from .policy import PolicyDocument, PolicyError, policy_document_from_dict
from .privacy import PrivacyEdge


class ConfigError(Exception):
    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


def data_path(name: str) -> str:
    return str(resources.files("cvabac") / "data" / name)


DEFAULT_FLEET = "fleet.json"
DEFAULT_POLICY = "policies.json"


def load_json(path: Union[str, os.PathLike]) -> dict:
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except OSError as err:
        raise ConfigError(str(err), str(path)) from err
    except ValueError as err:
        raise ConfigError(f"invalid JSON: {err}", str(path)) from err


def _list(config: Mapping, key: str) -> list:
    value = config.get(key, [])
    if not isinstance(value, list):
        raise ConfigError("must be a list", key)
    return value


def _apply_atts(registry: Registry, entity_id: str, atts, where: str) -> None:
    if not isinstance(atts, Mapping):
        raise ConfigError("'atts' must be an object", where)
    for name, value in atts.items():
        try:
            registry.set_attribute(entity_id, name, value)
        except RegistryError as err:
            raise ConfigError(str(err), f"{where}.atts.{name}") from err


def build_registry(config: Mapping) -> tuple:
    """Registry plus the controller's geofences and subgroup vehicle types."""
    if not isinstance(config, Mapping):
        raise ConfigError("configuration must be a JSON object")
    registry = Registry()
    for i, entry in enumerate(_list(config, "attributes")):
        where = f"attributes[{i}]"
        try:
            registry.declare_attribute(entry["name"], entry["kind"], entry.get("range"))
        except (KeyError, TypeError, ValueError, RegistryError) as err:
            raise ConfigError(f"bad attribute declaration ({err})", where) from err

    pending = list(enumerate(_list(config, "groups")))
    geofences, subgroup_types = [], {}
    while pending:
        progressed, waiting = False, []
        for i, entry in pending:
            where = f"groups[{i}]"
            if not isinstance(entry, Mapping) or "id" not in entry:
                raise ConfigError("group needs an 'id'", where)
            parents = entry.get("parents", [])
            if not all(p in registry.groups for p in parents):
                waiting.append((i, entry))
                continue
            try:
                registry.register_group(entry["id"], parents)
            except RegistryError as err:
                raise ConfigError(str(err), where) from err
            _apply_atts(registry, entry["id"], entry.get("atts", {}), where)
            if "geofence" in entry:
                fence = entry["geofence"]
                try:
                    geofences.append(Geofence(entry["id"], float(fence["lat_min"]),
                                              float(fence["lat_max"]), float(fence["lon_min"]),
                                              float(fence["lon_max"])))
                except (KeyError, TypeError, ValueError) as err:
                    raise ConfigError(f"bad geofence ({err})", where + ".geofence") from err
            if "vehicle_type" in entry:
                subgroup_types[entry["id"]] = entry["vehicle_type"]
            progressed = True
        if not progressed:
            i, entry = waiting[0]
            missing = [p for p in entry.get("parents", []) if p not in registry.groups]
            raise ConfigError(f"unknown parent group(s) {missing} or cyclic hierarchy", f"groups[{i}]")
        pending = waiting

    for i, entry in enumerate(_list(config, "clustered_objects")):
        where = f"clustered_objects[{i}]"
        try:
            registry.register_clustered_object(entry["id"])
            if entry.get("group"):
                registry.assign_direct_group(entry["id"], entry["group"])
        except (KeyError, RegistryError) as err:
            raise ConfigError(str(err), where) from err
        _apply_atts(registry, entry["id"], entry.get("atts", {}), where)
    for i, entry in enumerate(_list(config, "objects")):
        where = f"objects[{i}]"
        try:
            registry.register_object(entry["id"], entry["parent_co"])
        except (KeyError, RegistryError) as err:
            raise ConfigError(str(err), where) from err
        _apply_atts(registry, entry["id"], entry.get("atts", {}), where)
    for i, entry in enumerate(_list(config, "sources")):
        where = f"sources[{i}]"
        try:
            registry.register_source(entry["id"])
        except (KeyError, RegistryError) as err:
            raise ConfigError(str(err), where) from err
        _apply_atts(registry, entry["id"], entry.get("atts", {}), where)
    if "system" in config:
        _apply_atts(registry, SYSTEM_ID, config["system"].get("atts", {}), "system")
    return registry, geofences, subgroup_types


@dataclass
class World:
    registry: Registry
    broker: Broker
    controller: Controller
    privacy: PrivacyEdge
    document: PolicyDocument
    config: Mapping = field(default_factory=dict)

    def apply_warmup(self) -> None:
        """Replay the configuration's scripted administrative steps."""
        for i, step in enumerate(self.config.get("warmup", [])):
            where = f"warmup[{i}]"
            try:
                if "shadow" in step:
                    self.broker.publish(shadow_topic(step["shadow"]),
                                        {"state": {"reported": step["reported"]}})
                elif "propagate" in step:
                    p = step["propagate"]
                    self.controller.propagate_group_attribute(p["source"], p["group"],
                                                              p["attribute"], p["value"])
                elif "set" in step:
                    s = step["set"]
                    self.registry.set_attribute(s["entity"], s["attribute"], s["value"])
                else:
                    raise ConfigError("unknown warmup step", where)
            except (KeyError, TypeError) as err:
                raise ConfigError(f"malformed step ({err})", where) from err
            except RegistryError as err:
                raise ConfigError(str(err), where) from err


def build_world(config: Mapping, policy: Union[Mapping, PolicyDocument, None] = None, *,
                policy_enabled: bool = True, timing: str = "wall",
                on_event: Optional[Callable] = None,
                before_controller: Optional[Callable[[Registry], None]] = None) -> World:
    """Assemble registry, broker, privacy edge and controller.

    Policy parse failures propagate as :class:`~cvabac.policy.PolicyError`;
    everything else wrong with the configuration raises :class:`ConfigError`.
    """
    registry, geofences, subgroup_types = build_registry(config)
    if before_controller is not None:
        before_controller(registry)
    if isinstance(policy, PolicyDocument):
        document = policy
    else:
        document = policy_document_from_dict(policy if policy is not None else {"policies": []},
                                             registry.schema)
    for operation_policy in document.policies.values():
        for rule in operation_policy.scope_rules:
            for group_id in rule.notify_groups:
                if group_id not in registry.groups:
                    raise ConfigError(f"scope rule names unknown group {group_id!r}",
                                      f"policy {operation_policy.operation}")
    privacy = PrivacyEdge(registry)
    for i, entry in enumerate(_list(config, "preferences")):
        try:
            privacy.register_preference(entry["vehicle"], entry["condition"])
        except (KeyError, RegistryError) as err:
            raise ConfigError(str(err), f"preferences[{i}]") from err
    broker = Broker(is_thing=registry.__contains__)
    try:
        controller = Controller(registry, broker, document, geofences, subgroup_types, privacy,
                                policy_enabled=policy_enabled, timing=timing, on_event=on_event)
    except (ValueError, RegistryError) as err:
        raise ConfigError(str(err), "groups") from err
    return World(registry, broker, controller, privacy, document, config)


__all__ = ["ConfigError", "World", "build_registry", "build_world", "data_path", "load_json",
           "DEFAULT_FLEET", "DEFAULT_POLICY", "PolicyError"]

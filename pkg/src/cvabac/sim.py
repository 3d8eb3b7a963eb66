"""Deterministic scenario driver and metrics output."""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

from .bus import shadow_topic
from .config import ConfigError, World, build_world
from .controller import NotificationRecord, ServiceRequest, natural_key
from .inheritance import eff_value
from .model import Registry

SCENARIOS = ("deer-threat", "car-pool", "mixed")
CAR_POOL = "car_pool"
DEER_THREAT = "deer_threat"
CAR_POOL_OPERATION = "car_pool_notification"
DEER_THREAT_ATTRIBUTE = "Deer_Threat"
CSV_HEADER = ("request_index", "scenario", "policy_enabled", "vehicles_notified",
              "vehicles_accepted", "policy_eval_time_us")


@dataclass(frozen=True)
class ScheduledRequest:
    tick: int
    kind: str
    params: Mapping = field(default_factory=dict)


@dataclass
class ScenarioConfig:
    seed: int
    fleet_size: int
    paths: dict
    request_schedule: list
    ticks: int
    vehicle_types: dict = field(default_factory=dict)
    vins: dict = field(default_factory=dict)
    requestor: str = "Requestor"
    sensor: str = "Sensor-X"


@dataclass(frozen=True)
class MetricsRecord:
    request_index: int
    scenario: str
    policy_enabled: bool
    vehicles_notified: int
    vehicles_accepted: int
    policy_eval_time_us: float


@dataclass
class ScenarioResult:
    records: list
    notifications: list
    log: list
    world: World

    @property
    def event_log(self) -> str:
        return "".join(line + "\n" for line in self.log)


class EventLog:
    """Line-oriented ``tick=<n> event=<kind> key=value ...`` log."""

    def __init__(self) -> None:
        self.tick = 0
        self.lines: list = []

    def __call__(self, kind: str, fields: Mapping) -> None:
        parts = [f"tick={self.tick}", f"event={kind}"]
        for key, value in fields.items():
            text = "-" if value is None else str(value)
            if not text or any(c.isspace() for c in text) or '"' in text:
                text = json.dumps(text)
            parts.append(f"{key}={text}")
        self.lines.append(" ".join(parts))


def _bbox(config: Mapping) -> tuple:
    fences = [g["geofence"] for g in config.get("groups", []) if "geofence" in g]
    if not fences:
        raise ConfigError("no geofences configured; cannot synthesize vehicle paths", "groups")
    return (min(f["lat_min"] for f in fences), max(f["lat_max"] for f in fences),
            min(f["lon_min"] for f in fences), max(f["lon_max"] for f in fences))


def _locations(config: Mapping) -> list:
    return sorted(g["id"] for g in config.get("groups", []) if "geofence" in g)


def make_scenario(kind: str, fleet_config: Mapping, *, vehicles: int = 50, requests: int = 25,
                  seed: int = 0, waypoints: int = 6, ticks: Optional[int] = None) -> ScenarioConfig:
    """Draw a fleet, per-vehicle waypoint loops and a request schedule from ``seed``.

    Configured clustered objects count towards ``vehicles``; the remainder
    are generated as ``Vehicle-<n>``.  Request ``i`` fires at tick ``i``, after
    every vehicle has reported its position for that tick.
    """
    if kind not in SCENARIOS:
        raise ConfigError(f"unknown scenario {kind!r}; expected one of {', '.join(SCENARIOS)}")
    rng = random.Random(seed)
    lat_min, lat_max, lon_min, lon_max = _bbox(fleet_config)
    locations = _locations(fleet_config)
    existing = [co["id"] for co in fleet_config.get("clustered_objects", [])]
    names, types, vins = list(existing), {}, {}
    n = 1
    while len(names) < vehicles:
        name = f"Vehicle-{n}"
        if name not in names:
            names.append(name)
            types[name] = "Car" if rng.random() < 0.8 else "Bus"
            vins[name] = "".join(str(rng.randrange(10)) for _ in range(13))
        n += 1
    paths = {}
    for name in sorted(names, key=natural_key):
        paths[name] = [(f"{rng.uniform(lat_min, lat_max):.7f}", f"{rng.uniform(lon_min, lon_max):.7f}")
                       for _ in range(waypoints)]
    schedule = []
    for i in range(1, requests + 1):
        if kind == "car-pool" or (kind == "mixed" and i % 2 == 1):
            schedule.append(ScheduledRequest(i, CAR_POOL, {"source": rng.choice(locations),
                                                           "destination": rng.choice(locations)}))
        else:
            schedule.append(ScheduledRequest(i, DEER_THREAT, {"location": rng.choice(locations),
                                                              "value": rng.choice(["ON", "OFF"])}))
    return ScenarioConfig(seed, len(names), paths, schedule,
                          requests + 1 if ticks is None else ticks, types, vins)


def _add_fleet(scenario: ScenarioConfig) -> Callable[[Registry], None]:
    def add(registry: Registry) -> None:
        for name in sorted(scenario.vehicle_types, key=natural_key):
            if name in registry:
                continue
            registry.register_clustered_object(name)
            registry.set_attribute(name, "Type", scenario.vehicle_types[name])
            registry.set_attribute(name, "VIN", scenario.vins[name])
            registry.set_attribute(name, "thingName", name)
        for actor in (scenario.requestor, scenario.sensor):
            if actor not in registry:
                registry.register_source(actor)
    return add


def run_scenario(scenario: ScenarioConfig, document, fleet_config: Mapping, *,
                 policy_enabled: bool = True, timing: str = "wall",
                 observer: Optional[Callable] = None) -> ScenarioResult:
    """Drive the fleet tick by tick and collect one metrics record per request.

    ``observer(scheduled_request, notification_record, world)`` runs right
    after each request, while the registry still reflects request time.
    """
    log = EventLog()
    world = build_world(fleet_config, document, policy_enabled=policy_enabled, timing=timing,
                        on_event=log, before_controller=_add_fleet(scenario))
    world.apply_warmup()
    controller = world.controller
    first_index = len(controller.records)
    by_tick: dict = {}
    for request in scenario.request_schedule:
        by_tick.setdefault(request.tick, []).append(request)

    records, notifications = [], []
    for tick in range(scenario.ticks):
        log.tick = tick
        for name in sorted(scenario.paths, key=natural_key):
            path = scenario.paths[name]
            lat, lon = path[tick % len(path)]
            log("move", {"thing": name, "lat": lat, "lon": lon})
            world.broker.publish(shadow_topic(name),
                                 {"state": {"reported": {"Latitude": lat, "Longitude": lon}}})
        for request in by_tick.get(tick, ()):
            record = _fire(world, scenario, request)
            notifications.append(record)
            index = record.request_index - first_index
            records.append(MetricsRecord(index, request.kind, policy_enabled, len(record.notified),
                                         len(record.accepted), record.eval_time_us))
            if observer is not None:
                observer(request, record, world)
    return ScenarioResult(records, notifications, log.lines, world)


def _fire(world: World, scenario: ScenarioConfig, request: ScheduledRequest) -> NotificationRecord:
    controller, registry = world.controller, world.registry
    if request.kind == CAR_POOL:
        service = ServiceRequest(scenario.requestor, CAR_POOL_OPERATION, dict(request.params))
        world.broker.publish(shadow_topic(scenario.requestor), service.payload())
        return controller.records[-1]
    location = request.params["location"]
    if "Location" in registry.schema:
        registry.set_attribute(scenario.sensor, "Location", eff_value(registry, location, "Location"))
    return controller.propagate_group_attribute(scenario.sensor, location, DEER_THREAT_ATTRIBUTE,
                                                request.params["value"])


def emit_metrics_csv(records, path, *, footer: bool = False) -> None:
    """Write records sorted by request index, LF line endings.

    With ``footer`` a trailing ``#`` comment line carries per-scenario totals
    of the policy evaluation time.
    """
    rows = sorted(records, key=lambda r: r.request_index)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in rows:
            writer.writerow([r.request_index, r.scenario, "true" if r.policy_enabled else "false",
                             r.vehicles_notified, r.vehicles_accepted, f"{r.policy_eval_time_us:.3f}"])
        if footer:
            handle.write(summary_line(rows) + "\n")


def summary_line(records) -> str:
    totals: dict = {}
    for r in records:
        count, total = totals.get(r.scenario, (0, 0.0))
        totals[r.scenario] = (count + 1, total + r.policy_eval_time_us)
    parts = [f"requests={len(records)}",
             f"total_policy_eval_time_us={sum(r.policy_eval_time_us for r in records):.3f}"]
    for scenario in sorted(totals):
        count, total = totals[scenario]
        parts.append(f"{scenario}={count}:{total:.3f}")
    return "# summary " + " ".join(parts)


def read_metrics_csv(path) -> list:
    with open(path, encoding="utf-8", newline="") as handle:
        rows = [line for line in handle if not line.startswith("#")]
    out = []
    for row in csv.DictReader(rows):
        out.append(MetricsRecord(int(row["request_index"]), row["scenario"],
                                 row["policy_enabled"] == "true", int(row["vehicles_notified"]),
                                 int(row["vehicles_accepted"]), float(row["policy_eval_time_us"])))
    return out

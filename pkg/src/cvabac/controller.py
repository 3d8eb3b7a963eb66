"""Smart-car controller: dynamic group assignment and request enforcement.

The controller listens to shadow updates on the broker.  Location reports
move vehicles between subgroups by geofence and vehicle type; reports that
carry a ``policy`` key are service requests and are scoped by the policy
document's scope rules before being fanned out to group members and
filtered by each vehicle's preferences.
"""

from __future__ import annotations

import logging
import math
import re
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

from .bus import Broker, ShadowDocument, notify_topic
from .inheritance import eff_co
from .model import SYSTEM_ID, Registry, RegistryError
from .policy import (ALLOW, NO_POLICY, Decision, EvalContext, PolicyDocument, PolicyError,
                     auth_op, evaluate_expr)
from .privacy import PrivacyEdge

log = logging.getLogger(__name__)

MEMBERSHIP_OPERATION = "group_membership"
NO_SCOPE_RULE = "no-scope-rule"


class ControllerError(Exception):
    pass


class BadCoordinates(ControllerError, ValueError):
    pass


class NoSubgroupForType(ControllerError, LookupError):
    def __init__(self, location_group: str, vehicle_type):
        self.location_group = location_group
        self.vehicle_type = vehicle_type
        super().__init__(f"{location_group} has no subgroup for vehicle type {vehicle_type!r}")


@dataclass(frozen=True)
class Geofence:
    """Axis-aligned lat/lon rectangle, bounds inclusive."""

    group_id: str
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self) -> None:
        if not (self.lat_min < self.lat_max and self.lon_min < self.lon_max):
            raise ValueError(f"geofence of {self.group_id!r} is empty or inverted")

    def contains(self, lat: float, lon: float) -> bool:
        return self.lat_min <= lat <= self.lat_max and self.lon_min <= lon <= self.lon_max

    def interiors_overlap(self, other: "Geofence") -> bool:
        return (self.lat_min < other.lat_max and other.lat_min < self.lat_max
                and self.lon_min < other.lon_max and other.lon_min < self.lon_max)

    @property
    def center(self) -> tuple:
        return ((self.lat_min + self.lat_max) / 2, (self.lon_min + self.lon_max) / 2)


@dataclass(frozen=True)
class AssignmentRow:
    thing_name: str
    location_group: str
    subgroup: str
    since_seq: int


@dataclass(frozen=True)
class ServiceRequest:
    requestor: str
    operation: str
    attributes: Mapping = field(default_factory=dict)

    @classmethod
    def from_reported(cls, thing_name: str, reported: Mapping) -> "ServiceRequest":
        attributes = {k: v for k, v in reported.items() if k != "policy"}
        return cls(thing_name, reported["policy"], attributes)

    def payload(self) -> dict:
        return {"state": {"reported": {"policy": self.operation, **self.attributes}}}


@dataclass(frozen=True)
class NotificationRecord:
    request_index: int
    scenario: str
    notified: frozenset
    accepted: frozenset
    eval_time_us: float
    allowed: bool = True
    reason: str = ALLOW
    groups: tuple = ()

    def __post_init__(self) -> None:
        assert self.accepted <= self.notified, "accepted vehicles must have been notified"


@dataclass(frozen=True)
class ReassignmentEvent:
    thing_name: str
    previous: Optional[str]
    current: str
    location_group: str


def natural_key(name: str):
    return [int(part) if part.isdigit() else part for part in re.split(r"(\d+)", name)]


def parse_coordinates(reported: Mapping) -> tuple:
    try:
        lat = float(reported["Latitude"])
        lon = float(reported["Longitude"])
    except (KeyError, TypeError, ValueError):
        raise BadCoordinates(f"unparseable coordinates in {dict(reported)!r}") from None
    if not (math.isfinite(lat) and math.isfinite(lon) and -90 <= lat <= 90 and -180 <= lon <= 180):
        raise BadCoordinates(f"coordinates out of range: {lat}, {lon}")
    return lat, lon


class Controller:
    """Policy decision and enforcement for the fleet.

    ``timing`` selects what ``eval_time_us`` holds: ``"wall"`` measures
    policy evaluation with :func:`time.perf_counter_ns`; ``"logical"`` reports
    the number of evaluated condition nodes (one node counted as one
    microsecond) so runs are reproducible byte for byte.
    """

    def __init__(self, registry: Registry, broker: Broker, document: PolicyDocument,
                 geofences=(), subgroup_types: Optional[Mapping] = None,
                 privacy: Optional[PrivacyEdge] = None, *, policy_enabled: bool = True,
                 timing: str = "wall", on_event: Optional[Callable] = None):
        if timing not in ("wall", "logical"):
            raise ValueError(f"unknown timing mode {timing!r}")
        self.registry = registry
        self.broker = broker
        self.document = document
        self.geofences = {g.group_id: g for g in geofences}
        self.subgroup_types = dict(subgroup_types or {})
        self.privacy = privacy
        self.policy_enabled = policy_enabled
        self.timing = timing
        self.on_event = on_event
        self.records: list = []
        self.audit: list = []
        self._validate()
        broker.add_shadow_listener(self._on_shadow)

    def _validate(self) -> None:
        for group_id in list(self.geofences) + list(self.subgroup_types):
            self.registry.group(group_id)
        fences = sorted(self.geofences.values(), key=lambda g: g.group_id)
        for i, first in enumerate(fences):
            for second in fences[i + 1:]:
                siblings = (self.registry.groups[first.group_id].parents
                            & self.registry.groups[second.group_id].parents)
                if siblings and first.interiors_overlap(second):
                    raise ValueError(f"geofences of {first.group_id!r} and "
                                     f"{second.group_id!r} overlap")

    def _emit(self, kind: str, **fields) -> None:
        if self.on_event is not None:
            self.on_event(kind, fields)

    def _next_index(self) -> int:
        return len(self.records) + 1

    def _elapsed_us(self, start_ns: int, steps: int) -> float:
        if self.timing == "logical":
            return float(steps)
        return (time.perf_counter_ns() - start_ns) / 1000.0

    def _record(self, record: NotificationRecord) -> NotificationRecord:
        self.records.append(record)
        return record

    # -- dynamic groups --------------------------------------------------

    def location_of(self, subgroup: str) -> str:
        for parent in sorted(self.registry.group(subgroup).parents):
            if parent in self.geofences:
                return parent
        return ""

    def assign_group(self, lat: float, lon: float, vehicle_type) -> Optional[str]:
        """Subgroup for a vehicle of ``vehicle_type`` at the given point, or
        None outside every geofence.  On a shared boundary the smallest
        location group id wins."""
        containing = sorted(g for g, fence in self.geofences.items() if fence.contains(lat, lon))
        if not containing:
            return None
        location = containing[0]
        candidates = sorted(child for child in self.registry.children(location)
                            if self.subgroup_types.get(child) == vehicle_type)
        if not candidates:
            raise NoSubgroupForType(location, vehicle_type)
        return candidates[0]

    def on_shadow_update(self, thing_name: str, shadow: ShadowDocument) -> Optional[ReassignmentEvent]:
        if thing_name not in self.registry.clustered_objects:
            return None
        lat, lon = parse_coordinates(shadow.reported)
        vehicle_type = eff_co(self.registry, thing_name, "Type") if "Type" in self.registry.schema else None
        subgroup = self.assign_group(lat, lon, vehicle_type)
        current = self.registry.clustered_objects[thing_name].direct_group
        if subgroup is None:
            self._emit("out-of-coverage", thing=thing_name, kept=current or "-")
            return None
        if subgroup == current:
            return None
        if self.document.get(MEMBERSHIP_OPERATION) is not None:
            decision = auth_op(self.registry, thing_name, MEMBERSHIP_OPERATION, subgroup, self.document)
            if not decision.allowed:
                self.audit.append((MEMBERSHIP_OPERATION, thing_name, subgroup, decision))
                self._emit("membership-denied", thing=thing_name, group=subgroup, reason=decision.reason)
                return None
        previous = self.registry.assign_direct_group(thing_name, subgroup)
        location = self.location_of(subgroup)
        self.broker.publish(notify_topic(subgroup, thing_name),
                            {"event": "membership", "group": subgroup, "previous": previous})
        self.broker.publish(f"groups/{subgroup}/membership", {"event": "joined", "thing": thing_name})
        if previous is not None:
            self.broker.publish(f"groups/{previous}/membership", {"event": "left", "thing": thing_name})
        self._emit("assign", thing=thing_name, **{"from": previous or "-"}, to=subgroup)
        return ReassignmentEvent(thing_name, previous, subgroup, location)

    def assignment_table(self) -> list:
        """Current vehicle-to-group assignments, read straight from the registry."""
        rows = []
        for co in self.registry.clustered_objects.values():
            if co.direct_group is not None:
                rows.append(AssignmentRow(co.id, self.location_of(co.direct_group),
                                          co.direct_group, co.group_seq))
        return sorted(rows, key=lambda r: natural_key(r.thing_name))

    def render_assignment_table(self) -> str:
        header = ("Thing", "Location", "Subgroup", "Since")
        rows = [header] + [(r.thing_name, r.location_group or "-", r.subgroup, str(r.since_seq))
                           for r in self.assignment_table()]
        widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
        return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
                         for row in rows)

    def _on_shadow(self, thing_name: str, shadow: ShadowDocument, patch: dict) -> None:
        if "policy" in patch:
            request = ServiceRequest.from_reported(thing_name, patch)
            if self.policy_enabled:
                self.handle_service_request(request)
            else:
                self.broadcast_all(request)
        if "Latitude" in patch or "Longitude" in patch:
            try:
                self.on_shadow_update(thing_name, shadow)
            except BadCoordinates as err:
                self._emit("bad-coordinates", thing=thing_name, detail=str(err))
            except NoSubgroupForType as err:
                self._emit("no-subgroup", thing=thing_name, group=err.location_group,
                           type=err.vehicle_type)

    # -- attribute propagation ------------------------------------------

    def propagate_group_attribute(self, source_id: str, group_id: str, attribute: str, value,
                                  document: Optional[PolicyDocument] = None) -> NotificationRecord:
        """Set a group attribute on behalf of ``source_id`` and notify the
        members that now carry it.  The attribute name is the operation."""
        document = document or self.document
        index = self._next_index()
        if not self.policy_enabled:
            self.registry.set_attribute(group_id, attribute, value)
            return self._broadcast(index, attribute, {"event": "attribute", "group": group_id,
                                                      "attribute": attribute, "value": value})
        start = time.perf_counter_ns()
        decision = auth_op(self.registry, source_id, attribute, group_id, document)
        elapsed = self._elapsed_us(start, decision.steps)
        if not decision.allowed:
            self.audit.append((attribute, source_id, group_id, decision))
            self._emit("deny", index=index, operation=attribute, source=source_id,
                       target=group_id, reason=decision.reason)
            return self._record(NotificationRecord(index, attribute, frozenset(), frozenset(),
                                                   elapsed, False, decision.reason))
        self.registry.set_attribute(group_id, attribute, value)
        notified = set()
        for co_id in sorted(self.registry.members_of(group_id, transitive=True), key=natural_key):
            if eff_co(self.registry, co_id, attribute) == value:
                notified.add(co_id)
                direct = self.registry.clustered_objects[co_id].direct_group
                self.broker.publish(notify_topic(direct, co_id),
                                    {"event": "attribute", "group": group_id,
                                     "attribute": attribute, "value": value})
        self._emit("propagate", index=index, operation=attribute, source=source_id,
                   target=group_id, value=value, notified=len(notified))
        notified = frozenset(notified)
        return self._record(NotificationRecord(index, attribute, notified, notified, elapsed,
                                               True, ALLOW, (group_id,)))

    # -- service requests ------------------------------------------------

    def _scope(self, request: ServiceRequest, document: PolicyDocument):
        policy = document.get(request.operation)
        if policy is None:
            return Decision(False, NO_POLICY, request.operation), (), 0
        target = request.attributes.get("source", SYSTEM_ID)
        decision = auth_op(self.registry, request.requestor, request.operation, target, document,
                           overlay=request.attributes)
        steps = decision.steps
        if not decision.allowed:
            return decision, (), steps
        for rule in policy.scope_rules:
            ctx = EvalContext(self.registry, request.requestor, target, overlay=request.attributes)
            try:
                matched = evaluate_expr(rule.when, ctx)
            except (PolicyError, RegistryError) as err:
                return Decision(False, "evaluation-error", request.operation, str(err)), (), steps + ctx.steps
            steps += ctx.steps
            if matched:
                return decision, rule.notify_groups, steps
        return Decision(False, NO_SCOPE_RULE, request.operation), (), steps

    def handle_service_request(self, request: ServiceRequest,
                               document: Optional[PolicyDocument] = None) -> NotificationRecord:
        document = document or self.document
        index = self._next_index()
        start = time.perf_counter_ns()
        decision, groups, steps = self._scope(request, document)
        elapsed = self._elapsed_us(start, steps)
        if not decision.allowed:
            self.audit.append((request.operation, request.requestor, request.attributes, decision))
            self._emit("deny", index=index, operation=request.operation,
                       source=request.requestor, reason=decision.reason)
            return self._record(NotificationRecord(index, request.operation, frozenset(),
                                                   frozenset(), elapsed, False, decision.reason))
        notified = set()
        for group_id in groups:
            notified |= self.registry.members_of(group_id)
        payload = {"event": "service_request", "policy": request.operation,
                   "requestor": request.requestor, **request.attributes}
        accepted = set()
        for co_id in sorted(notified, key=natural_key):
            direct = self.registry.clustered_objects[co_id].direct_group
            self.broker.publish(notify_topic(direct, co_id), payload)
            if self.privacy is None or self.privacy.evaluate_local(co_id, request).accepted:
                accepted.add(co_id)
        self.broker.publish(f"notify/requestor/{request.requestor}",
                            {"request_index": index, "policy": request.operation,
                             "accepted": sorted(accepted, key=natural_key)})
        self._emit("request", index=index, operation=request.operation, source=request.requestor,
                   groups=",".join(groups), notified=len(notified), accepted=len(accepted))
        return self._record(NotificationRecord(index, request.operation, frozenset(notified),
                                               frozenset(accepted), elapsed, True, ALLOW,
                                               tuple(groups)))

    def _broadcast(self, index: int, scenario: str, payload: dict) -> NotificationRecord:
        start = time.perf_counter_ns()
        vehicles = sorted(self.registry.clustered_objects, key=natural_key)
        elapsed = self._elapsed_us(start, len(vehicles))
        for co_id in vehicles:
            self.broker.publish(f"notify/all/{co_id}", payload)
        self._emit("broadcast", index=index, operation=scenario, notified=len(vehicles))
        notified = frozenset(vehicles)
        return self._record(NotificationRecord(index, scenario, notified, notified, elapsed,
                                               True, "no-policy-baseline"))

    def broadcast_all(self, request: ServiceRequest) -> NotificationRecord:
        """Baseline without any policy: every registered vehicle is notified."""
        payload = {"event": "service_request", "policy": request.operation,
                   "requestor": request.requestor, **request.attributes}
        return self._broadcast(self._next_index(), request.operation, payload)

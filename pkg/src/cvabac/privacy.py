"""Per-vehicle preference policies, evaluated after group scoping.

A preference is an ordinary condition in the policy language, evaluated with
the requestor as ``source`` and the notified vehicle as ``target``.  Vehicles
without a preference accept everything.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import Registry, RegistryError, UnknownEntity
from .policy import EvalContext, PolicyError, evaluate_expr, parse_expr
from .policy.nodes import Expr


@dataclass(frozen=True)
class UserPreferencePolicy:
    vehicle_id: str
    condition: Expr
    text: str = field(default="", compare=False)


@dataclass(frozen=True)
class LocalDecision:
    vehicle_id: str
    accepted: bool
    reason: str


class PrivacyEdge:
    def __init__(self, registry: Registry):
        self.registry = registry
        self.preferences: dict = {}
        self.rejections: list = []

    def register_preference(self, vehicle_id: str, condition_text: str) -> UserPreferencePolicy:
        if vehicle_id not in self.registry.clustered_objects:
            raise UnknownEntity(f"unknown vehicle {vehicle_id!r}")
        policy = UserPreferencePolicy(vehicle_id, parse_expr(condition_text, self.registry.schema),
                                      condition_text)
        self.preferences[vehicle_id] = policy
        return policy

    def remove_preference(self, vehicle_id: str) -> None:
        self.preferences.pop(vehicle_id, None)

    def evaluate_local(self, vehicle_id: str, request) -> LocalDecision:
        """Accept or reject one notified service request on one vehicle.

        ``request`` needs ``requestor`` and ``attributes``.  Never writes to the
        registry; rejections are kept in :attr:`rejections`.
        """
        policy = self.preferences.get(vehicle_id)
        if policy is None:
            return LocalDecision(vehicle_id, True, "no-preference")
        ctx = EvalContext(self.registry, request.requestor, vehicle_id, overlay=request.attributes)
        try:
            accepted = evaluate_expr(policy.condition, ctx)
            reason = "preference-satisfied" if accepted else "preference-rejected"
        except (PolicyError, RegistryError) as err:
            accepted, reason = False, f"evaluation-error: {err}"
        decision = LocalDecision(vehicle_id, accepted, reason)
        if not accepted:
            self.rejections.append(decision)
        return decision

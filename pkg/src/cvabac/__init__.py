"""Attribute-based access control with dynamic groups for connected-vehicle fleets."""

from .bus import Broker, Message, ShadowDocument
from .config import ConfigError, World, build_registry, build_world
from .controller import Controller, Geofence, NotificationRecord, ServiceRequest
from .inheritance import EffectiveView, eff_all, eff_value, oracle_eff_all
from .model import Kind, Registry
from .policy import Decision, PolicyDocument, auth_op, evaluate, parse_expr, print_expr
from .privacy import PrivacyEdge

__version__ = "0.1.0"

__all__ = [
    "Broker", "Message", "ShadowDocument", "ConfigError", "World", "build_registry", "build_world",
    "Controller", "Geofence", "NotificationRecord", "ServiceRequest", "EffectiveView", "eff_all",
    "eff_value", "oracle_eff_all", "Kind", "Registry", "Decision", "PolicyDocument", "auth_op",
    "evaluate", "parse_expr", "print_expr", "PrivacyEdge",
]

"""In-process publish/subscribe broker with per-thing shadow documents.

Dispatch is synchronous: ``publish`` returns only after the message has been
queued for every matching subscriber and, for shadow-update topics, after the
shadow is patched and every shadow listener has run.  Listeners may publish
in turn; those messages get later sequence numbers, so per-subscriber FIFO
order still follows ``publish_seq``.
"""

from __future__ import annotations

import collections
import itertools
import json
import logging
import re
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

log = logging.getLogger(__name__)

SHADOW_UPDATE = re.compile(r"^things/([^/#]+)/shadow/update$")


class BusError(Exception):
    pass


class MalformedPayload(BusError, ValueError):
    pass


class InvalidFilter(BusError, ValueError):
    pass


class UnknownThing(BusError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


def shadow_topic(thing_name: str) -> str:
    return f"things/{thing_name}/shadow/update"


def notify_topic(group_id: str, thing_name: str) -> str:
    return f"notify/{group_id}/{thing_name}"


@dataclass(frozen=True)
class Message:
    topic: str
    payload: str
    publish_seq: int

    @property
    def data(self):
        return json.loads(self.payload)


@dataclass
class ShadowDocument:
    thing_name: str
    reported: dict = field(default_factory=dict)
    version: int = 0

    def copy(self) -> "ShadowDocument":
        return ShadowDocument(self.thing_name, dict(self.reported), self.version)

    def to_payload(self) -> dict:
        return {"state": {"reported": dict(self.reported)}, "version": self.version}


def _check_filter(topic_filter: str) -> None:
    if not topic_filter or "#" in topic_filter[:-1] or (
            topic_filter.endswith("#") and topic_filter not in ("#",) and not topic_filter.endswith("/#")):
        raise InvalidFilter(f"invalid topic filter {topic_filter!r}")


def topic_matches(topic_filter: str, topic: str) -> bool:
    if topic_filter == "#":
        return True
    if topic_filter.endswith("/#"):
        prefix = topic_filter[:-2]
        return topic == prefix or topic.startswith(prefix + "/")
    return topic == topic_filter


class Subscription:
    """FIFO queue of messages matching one filter."""

    def __init__(self, broker: "Broker", topic_filter: str):
        self.broker = broker
        self.topic_filter = topic_filter
        self._queue: collections.deque = collections.deque()
        self.active = True

    def _deliver(self, message: Message) -> None:
        self._queue.append(message)

    def __len__(self) -> int:
        return len(self._queue)

    def get(self) -> Optional[Message]:
        return self._queue.popleft() if self._queue else None

    def drain(self) -> list:
        items = list(self._queue)
        self._queue.clear()
        return items

    def __iter__(self):
        while self._queue:
            yield self._queue.popleft()

    def unsubscribe(self) -> None:
        self.broker.unsubscribe(self)


ShadowListener = Callable[[str, ShadowDocument, dict], None]


class Broker:
    """Topic broker plus shadow store.

    ``is_thing`` decides which thing names have shadows; by default any name
    is accepted.  Pass ``registry.__contains__`` to restrict shadows to
    registered entities.
    """

    def __init__(self, is_thing: Optional[Callable[[str], bool]] = None):
        self._lock = threading.RLock()
        self._seq = itertools.count(1)
        self._subscriptions: list = []
        self._shadows: dict = {}
        self._listeners: list = []
        self.is_thing = is_thing or (lambda name: True)

    def subscribe(self, topic_filter: str) -> Subscription:
        _check_filter(topic_filter)
        with self._lock:
            sub = Subscription(self, topic_filter)
            self._subscriptions.append(sub)
            return sub

    def unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            if sub in self._subscriptions:
                self._subscriptions.remove(sub)
            sub.active = False

    def add_shadow_listener(self, listener: ShadowListener) -> None:
        self._listeners.append(listener)

    def publish(self, topic: str, payload) -> int:
        if not isinstance(payload, str):
            payload = json.dumps(payload, sort_keys=True)
        try:
            data = json.loads(payload)
        except ValueError as err:
            raise MalformedPayload(f"payload on {topic!r} is not JSON: {err}") from None
        match = SHADOW_UPDATE.match(topic)
        patch = None
        if match:
            patch = _reported_patch(data)
            if not self.is_thing(match.group(1)):
                raise UnknownThing(f"unknown thing {match.group(1)!r}")
        with self._lock:
            seq = next(self._seq)
            message = Message(topic, payload, seq)
            for sub in list(self._subscriptions):
                if topic_matches(sub.topic_filter, topic):
                    sub._deliver(message)
            if match:
                doc = self.update_shadow(match.group(1), patch)
                for listener in list(self._listeners):
                    listener(match.group(1), doc, patch)
        log.debug("published #%d on %s", seq, topic)
        return seq

    def update_shadow(self, thing_name: str, reported_patch: dict) -> ShadowDocument:
        with self._lock:
            if not self.is_thing(thing_name):
                raise UnknownThing(f"unknown thing {thing_name!r}")
            doc = self._shadows.setdefault(thing_name, ShadowDocument(thing_name))
            doc.reported.update(reported_patch)
            doc.version += 1
            return doc.copy()

    def get_shadow(self, thing_name: str) -> ShadowDocument:
        with self._lock:
            if not self.is_thing(thing_name):
                raise UnknownThing(f"unknown thing {thing_name!r}")
            doc = self._shadows.get(thing_name)
            return doc.copy() if doc is not None else ShadowDocument(thing_name)


def _reported_patch(data) -> dict:
    try:
        reported = data["state"]["reported"]
    except (TypeError, KeyError):
        raise MalformedPayload("shadow update needs {\"state\": {\"reported\": {...}}}") from None
    if not isinstance(reported, dict):
        raise MalformedPayload("'reported' must be an object")
    for key, value in reported.items():
        if not isinstance(value, str):
            raise MalformedPayload(f"reported value for {key!r} must be a string")
    return dict(reported)

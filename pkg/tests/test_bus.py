import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvabac.bus import (Broker, InvalidFilter, MalformedPayload, UnknownThing, shadow_topic,
                        topic_matches)

PAYLOAD = '{"state":{"reported":{"Latitude":"29.4769353","Longitude":"-98.5018237"}}}'


def test_shadow_publish_updates_and_notifies_listener():
    broker, seen = Broker(), []
    broker.add_shadow_listener(lambda thing, doc, patch: seen.append((thing, doc.version, patch)))
    broker.publish("things/Vehicle-1/shadow/update", PAYLOAD)
    assert broker.get_shadow("Vehicle-1").reported["Latitude"] == "29.4769353"
    assert seen == [("Vehicle-1", 1, {"Latitude": "29.4769353", "Longitude": "-98.5018237"})]


def test_publish_without_subscribers():
    assert Broker().publish("nobody/listens", {"x": 1}) == 1


def test_malformed_payloads():
    broker = Broker()
    with pytest.raises(MalformedPayload):
        broker.publish("things/X/shadow/update", "not json")
    with pytest.raises(MalformedPayload):
        broker.publish("things/X/shadow/update", {"state": {}})
    with pytest.raises(MalformedPayload):
        broker.publish("things/X/shadow/update", {"state": {"reported": {"Latitude": 29.4}}})
    assert broker.get_shadow("X").version == 0


def test_filters():
    broker = Broker()
    sub = broker.subscribe("notify/Car-A/#")
    broker.publish("notify/Car-A/Vehicle-1", {"n": 1})
    broker.publish("notify/Car-AB/Vehicle-9", {"n": 2})
    broker.publish("notify/Car-B/Vehicle-2", {"n": 3})
    assert [m.data["n"] for m in sub.drain()] == [1]
    for bad in ("bad/#/middle", "", "a#", "#/x"):
        with pytest.raises(InvalidFilter):
            broker.subscribe(bad)
    assert topic_matches("#", "anything/at/all")


def test_fan_out():
    broker = Broker()
    a, b = broker.subscribe("t"), broker.subscribe("t")
    broker.publish("t", {"k": 1})
    broker.publish("t", {"k": 2})
    assert [m.publish_seq for m in a.drain()] == [1, 2]
    assert [m.publish_seq for m in b.drain()] == [1, 2]
    a.unsubscribe()
    broker.publish("t", {"k": 3})
    assert len(a) == 0 and len(b) == 1


def test_shadow_versions():
    broker = Broker()
    doc = broker.update_shadow("V", {"Latitude": "1", "Longitude": "2"})
    assert doc.version == 1 and set(doc.reported) == {"Latitude", "Longitude"}
    assert broker.update_shadow("V", {"Latitude": "1"}).version == 2
    broker.update_shadow("V", {"Latitude": "3"})
    assert broker.get_shadow("V").reported == {"Latitude": "3", "Longitude": "2"}


def test_unknown_and_fresh_things():
    broker = Broker(is_thing={"Vehicle-1"}.__contains__)
    fresh = broker.get_shadow("Vehicle-1")
    assert fresh.reported == {} and fresh.version == 0
    with pytest.raises(UnknownThing):
        broker.get_shadow("Ghost")
    with pytest.raises(UnknownThing):
        broker.publish(shadow_topic("Ghost"), PAYLOAD)


def test_listener_can_publish_in_turn():
    broker = Broker()
    sub = broker.subscribe("#")
    broker.add_shadow_listener(lambda thing, doc, patch: broker.publish(f"ack/{thing}", {}))
    broker.publish(shadow_topic("V"), PAYLOAD)
    assert [m.topic for m in sub.drain()] == [shadow_topic("V"), "ack/V"]


TOPICS = ["a/x", "a/y", "b/x", "things/T/shadow/update"]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from(TOPICS), max_size=30),
       st.lists(st.sampled_from(["#", "a/#", "b/x", "things/#"]), min_size=1, max_size=4))
def test_delivery_properties(topics, filters):
    broker = Broker()
    subs = [broker.subscribe(f) for f in filters]
    for topic in topics:
        if topic.startswith("things/"):
            broker.publish(topic, {"state": {"reported": {"k": "v"}}})
        else:
            broker.publish(topic, {})
    for sub in subs:
        got = sub.drain()
        seqs = [m.publish_seq for m in got]
        assert seqs == sorted(set(seqs))
        assert len(got) == sum(topic_matches(sub.topic_filter, t) for t in topics)
    assert broker.get_shadow("T").version == topics.count("things/T/shadow/update")

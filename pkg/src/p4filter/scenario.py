"""Scripted scenarios: timed host actions, optional pre-installed rules,
and expected per-host outcome counts.

Actions are `send` (one or more raw TCP packets), `knock` (replay a stored
knock sequence, optionally permuted or spoofed, then open the service
port), and `open_service` (just the service-port connection packet).
Source-address overrides exist so spoofing scenarios can forge another
host's identity while keeping the real attachment point.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .controller import SequenceStore
from .packet import Ipv4Address, tcp_flags


class InvalidScenario(Exception):
    """The scenario file violates its schema (named in the message)."""


class NoSequence(Exception):
    """A knock action references a host with no stored sequence."""


@dataclass(frozen=True)
class SendAction:
    dst: str                      # destination host name
    dport: int
    sport: Optional[int] = None   # default: per-host ephemeral counter
    flags: tuple[str, ...] = ("SYN",)
    payload: bytes = b""
    ttl: int = 64
    src_ip_of: Optional[str] = None    # spoof: use this host's IP
    src_mac_of: Optional[str] = None   # spoof: use this host's MAC
    repeat: int = 1
    gap: int = 1

    @property
    def flag_bits(self) -> int:
        return tcp_flags(*self.flags)


@dataclass(frozen=True)
class KnockAction:
    dst: str
    sequence_of: Optional[str] = None   # host whose stored sequence to use
    order: tuple[int, int, int] = (0, 1, 2)
    spacing: int = 1
    include_service: bool = True
    src_ip_of: Optional[str] = None
    src_mac_of: Optional[str] = None


@dataclass(frozen=True)
class OpenServiceAction:
    dst: str
    src_ip_of: Optional[str] = None
    src_mac_of: Optional[str] = None


@dataclass(frozen=True)
class ScenarioEvent:
    time: int
    host: str
    action: object   # SendAction | KnockAction | OpenServiceAction


@dataclass(frozen=True)
class PreinstallRule:
    switch: str
    table: str
    key: tuple[str, ...]    # textual fields, resolved against the table schema
    action: str
    params: tuple = ()


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    seed: int
    acl_path: Optional[str]
    events: tuple[ScenarioEvent, ...]
    preinstall: tuple[PreinstallRule, ...] = ()
    expect: dict = field(default_factory=dict)


def _parse_send(item: dict) -> SendAction:
    flags = item.get("flags", ["SYN"])
    if not isinstance(flags, list):
        raise InvalidScenario(f"flags must be a list: {item!r}")
    return SendAction(
        dst=item["dst"],
        dport=item["dport"],
        sport=item.get("sport"),
        flags=tuple(flags),
        payload=item.get("payload", "").encode(),
        ttl=item.get("ttl", 64),
        src_ip_of=item.get("src_ip_of"),
        src_mac_of=item.get("src_mac_of"),
        repeat=item.get("repeat", 1),
        gap=item.get("gap", 1),
    )


def _parse_knock(item: dict) -> KnockAction:
    order = tuple(item.get("order", (0, 1, 2)))
    if sorted(order) != [0, 1, 2]:
        raise InvalidScenario(f"knock order must permute [0, 1, 2]: {order!r}")
    return KnockAction(
        dst=item["dst"],
        sequence_of=item.get("sequence_of"),
        order=order,
        spacing=item.get("spacing", 1),
        include_service=item.get("include_service", True),
        src_ip_of=item.get("src_ip_of"),
        src_mac_of=item.get("src_mac_of"),
    )


def _parse_open_service(item: dict) -> OpenServiceAction:
    return OpenServiceAction(
        dst=item["dst"],
        src_ip_of=item.get("src_ip_of"),
        src_mac_of=item.get("src_mac_of"),
    )


_ACTION_PARSERS = {
    "send": _parse_send,
    "knock": _parse_knock,
    "open_service": _parse_open_service,
}


def parse_scenario(obj) -> ScenarioSpec:
    if not isinstance(obj, dict):
        raise InvalidScenario("scenario must be a JSON object")
    events = []
    last_time = None
    for item in obj.get("events", []):
        try:
            time, host, kind = item["time"], item["host"], item["action"]
        except (KeyError, TypeError) as e:
            raise InvalidScenario(f"event needs time/host/action: {item!r}") from e
        if not isinstance(time, int) or time < 0:
            raise InvalidScenario(f"event time must be a non-negative integer: {item!r}")
        if last_time is not None and time < last_time:
            raise InvalidScenario(f"event times must be non-decreasing (at {item!r})")
        last_time = time
        if kind not in _ACTION_PARSERS:
            raise InvalidScenario(f"unknown action {kind!r}")
        try:
            action = _ACTION_PARSERS[kind](item)
        except (KeyError, TypeError) as e:
            raise InvalidScenario(f"bad {kind} event {item!r}: {e}") from e
        events.append(ScenarioEvent(time=time, host=host, action=action))

    preinstall = []
    for item in obj.get("preinstall", []):
        try:
            preinstall.append(PreinstallRule(
                switch=item["switch"],
                table=item["table"],
                key=tuple(str(k) for k in item["key"]),
                action=item["action"],
                params=tuple(sorted(item.get("params", {}).items())),
            ))
        except (KeyError, TypeError) as e:
            raise InvalidScenario(f"bad preinstall rule {item!r}: {e}") from e

    expect = obj.get("expect", {})
    if not isinstance(expect, dict):
        raise InvalidScenario("expect must be an object")

    seed = obj.get("seed", 0)
    if not isinstance(seed, int):
        raise InvalidScenario("seed must be an integer")

    return ScenarioSpec(
        name=obj.get("name", "scenario"),
        seed=seed,
        acl_path=obj.get("acl"),
        events=tuple(events),
        preinstall=tuple(preinstall),
        expect=expect,
    )


def load_scenario(path: str) -> ScenarioSpec:
    try:
        with open(path) as f:
            obj = json.load(f)
    except OSError as e:
        raise InvalidScenario(f"cannot read scenario file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise InvalidScenario(f"scenario file {path} is not valid JSON: {e}") from e
    return parse_scenario(obj)


def knock_client(owner_ip: Ipv4Address, store: SequenceStore,
                 order: tuple[int, int, int] = (0, 1, 2),
                 spacing: int = 1,
                 include_service: bool = True) -> list[tuple[int, int]]:
    """Timed SYN probes for a host's stored sequence.

    Returns (time offset, destination port) pairs: the three knocks in the
    requested order followed by the service-port connection.
    """
    seq = store.get(owner_ip)
    if seq is None:
        raise NoSequence(f"no stored sequence for {owner_ip}")
    probes = [(i * spacing, seq.knock_ports[idx]) for i, idx in enumerate(order)]
    if include_service:
        probes.append((len(order) * spacing, seq.service_port))
    return probes

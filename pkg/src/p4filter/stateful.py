"""Stateful firewall stage: admit outside traffic only for flows an inside
host opened first, remembered in the Bloom pair."""

from __future__ import annotations

from dataclasses import dataclass

from .bloom import BloomPair
from .packet import Packet, flow_key
from .tables import Table

INTERNAL = 0
EXTERNAL = 1

FORWARD = "Forward"
DROP = "Drop"


@dataclass(frozen=True)
class StatefulVerdict:
    kind: str     # Forward | Drop
    reason: str


def classify_direction(ingress_port: int, check_ports: Table) -> int:
    """0 when the ingress port is listed as internal, 1 otherwise."""
    _, hit = check_ports.lookup((ingress_port,))
    return INTERNAL if hit else EXTERNAL


def stateful_process(p: Packet, direction: int, pair: BloomPair) -> StatefulVerdict:
    """Run one packet through the flow tracker, mutating the pair in place.

    Internal packets always pass; a pure SYN additionally registers its
    flow. External packets pass only when both filters remember the
    reversed 4-tuple, so nothing an outside host sends can grow the state.
    """
    if direction == INTERNAL:
        if p.tcp.is_pure_syn:
            pair.insert(flow_key(p, INTERNAL))
        return StatefulVerdict(FORWARD, "stateful forward")
    if pair.contains(flow_key(p, EXTERNAL)):
        return StatefulVerdict(FORWARD, "stateful reply")
    return StatefulVerdict(DROP, "stateful drop")

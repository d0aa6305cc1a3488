"""Per-source port-knocking state machine.

A host must send pure TCP SYN probes to its three secret ports in order;
only then (stage 3) does traffic to its service port pass. Knock probes are
absorbed, never forwarded. A wrong knock resets progress to stage 0, except
that a probe to the first knock port always starts a fresh attempt at
stage 1 — without that rule, a host that mistimes one knock could never
recover, and re-authentication from stage 3 would be impossible.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .packet import Ipv4Address, Packet

CONSUME = "Consume"
FORWARD = "Forward"
DROP = "Drop"

STAGE_AUTHENTICATED = 3


class OwnerMismatch(Exception):
    """A packet from a different source reached this host's state machine —
    a pipeline routing bug, not a traffic condition."""


@dataclass(frozen=True)
class KnockSequence:
    knock_ports: tuple[int, int, int]
    service_port: int

    def __post_init__(self):
        if len(self.knock_ports) != 3:
            raise ValueError("exactly 3 knock ports required")
        if len(set(self.knock_ports)) != 3:
            raise ValueError("knock ports must be pairwise distinct")
        for port in self.knock_ports:
            if not 1024 <= port <= 65535:
                raise ValueError(f"knock port {port} outside [1024, 65535]")
        if not 0 <= self.service_port <= 65535:
            raise ValueError(f"service port {self.service_port} out of range")
        if self.service_port in self.knock_ports:
            raise ValueError("service port may not be a knock port")


@dataclass(frozen=True)
class KnockState:
    owner_ip: Ipv4Address
    seq: KnockSequence
    stage: int = 0

    def __post_init__(self):
        if self.stage not in (0, 1, 2, 3):
            raise ValueError(f"stage {self.stage} out of range")


@dataclass(frozen=True)
class KnockVerdict:
    kind: str     # Consume | Forward | Drop
    reason: str


def knock_step(state: KnockState, p: Packet) -> tuple[KnockVerdict, KnockState]:
    """Advance one host's knocking FSM by one packet.

    Stages 0-2: a pure SYN to the expected knock port advances and is
    absorbed; a pure SYN to the first knock port restarts at stage 1; any
    other pure SYN (wrong knock port, premature service port, anything
    else) resets to stage 0 and drops; non-SYN traffic drops without
    touching the stage. Stage 3: service-port traffic forwards and keeps
    the stage; a pure SYN to the first knock port begins re-authentication;
    everything else drops, stage retained.
    """
    if p.ip.src_ip != state.owner_ip:
        raise OwnerMismatch(f"packet from {p.ip.src_ip}, state owned by {state.owner_ip}")

    dport = p.tcp.dst_port
    knocks = state.seq.knock_ports

    if state.stage == STAGE_AUTHENTICATED:
        if dport == state.seq.service_port:
            return KnockVerdict(FORWARD, "knock authenticated"), state
        if p.tcp.is_pure_syn and dport == knocks[0]:
            return KnockVerdict(CONSUME, "knock consumed"), replace(state, stage=1)
        return KnockVerdict(DROP, "knock drop"), state

    if not p.tcp.is_pure_syn:
        return KnockVerdict(DROP, "knock drop"), state
    if dport == knocks[state.stage]:
        return KnockVerdict(CONSUME, "knock consumed"), replace(state, stage=state.stage + 1)
    if dport == knocks[0]:
        return KnockVerdict(CONSUME, "knock consumed"), replace(state, stage=1)
    return KnockVerdict(DROP, "wrong knock"), replace(state, stage=0)

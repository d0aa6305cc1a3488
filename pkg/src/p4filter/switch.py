"""Software switch: the fixed five-stage pipeline over the six match-action
tables, plus rule installation from the controller.

Stage order is presence check, stateless firewall, stateful firewall, port
knocking, IPv4 forwarding. Filter stages run only on switches configured
with the matching feature, so a plain forwarder is just stages 1 (as a
no-op) and 5. Every processed packet appends exactly one terminal event to
the switch's log.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from . import stateful, stateless, tables
from .bloom import DEFAULT_M, BloomPair
from .knocking import KnockSequence, KnockState, knock_step
from .knocking import CONSUME as K_CONSUME, FORWARD as K_FORWARD
from .packet import Ipv4Address, Packet, TtlExpired, decrement_ttl
from .tables import (
    Rule, TableSet,
    KIND_IPV4, KIND_MAC, KIND_PORT, KIND_PORT_ID,
)

CPU_PORT = 55

FEAT_STATELESS = "Stateless"
FEAT_STATEFUL = "Stateful"
FEAT_KNOCKING = "Knocking"
FEATURES = {FEAT_STATELESS, FEAT_STATEFUL, FEAT_KNOCKING}

# Event verdicts
FORWARDED = "Forwarded"
DROPPED = "Dropped"
PUNTED = "Punted"
CONSUMED = "Consumed"

# Pipeline stage names used in event records
STAGE_PRESENT = "present"
STAGE_STATELESS = "stateless"
STAGE_STATEFUL = "stateful"
STAGE_KNOCKING = "knocking"
STAGE_FORWARD = "forward"


class UnknownPort(Exception):
    """Packet arrived on a port the switch does not have — fatal
    configuration error."""


class PacketOut(NamedTuple):
    egress_port: int
    packet: Packet


@dataclass(frozen=True)
class SwitchConfig:
    switch_id: str
    ports: tuple[int, ...]
    features: frozenset = frozenset()
    internal_ports: tuple[int, ...] = ()
    cpu_port: int = CPU_PORT

    def __post_init__(self):
        if len(set(self.ports)) != len(self.ports):
            raise ValueError(f"{self.switch_id}: duplicate ports")
        if self.cpu_port in self.ports:
            raise ValueError(f"{self.switch_id}: cpu_port collides with a data port")
        unknown = set(self.features) - FEATURES
        if unknown:
            raise ValueError(f"{self.switch_id}: unknown features {sorted(unknown)}")
        if not set(self.internal_ports) <= set(self.ports):
            raise ValueError(f"{self.switch_id}: internal_ports not a subset of ports")


class P4Switch:
    """One switch: tables, flow filters, knocking state, and an event log.

    All mutation happens through process_packet and apply_rule_install,
    called sequentially by the owning event loop. `now` is stamped by that
    loop before each call so event records carry simulation time.
    """

    def __init__(self, config: SwitchConfig, bloom_m: int = DEFAULT_M):
        self.config = config
        self.now = 0
        self.event_log: list[dict] = []
        self.blooms = BloomPair.sized(bloom_m)
        self.knock_states: dict[Ipv4Address, KnockState] = {}
        self.pending_punts: set[Ipv4Address] = set()
        self._knock_staging: dict[Ipv4Address, dict[int, int]] = {}

        t = TableSet()
        present_default = (tables.send_to_controller()
                           if FEAT_KNOCKING in config.features else tables.no_action())
        t.create("present_table", (KIND_IPV4,), present_default)
        t.create("check_ip", (KIND_IPV4,), tables.send_to_controller())
        t.create("check_mac", (KIND_IPV4, KIND_MAC), tables.drop())
        t.create("check_ports", (KIND_PORT_ID,), tables.set_direction(stateful.EXTERNAL))
        t.create("knock_rules", (KIND_IPV4, KIND_PORT), tables.no_action())
        t.create("ipv4_forward", (KIND_IPV4,), tables.drop())
        for port in config.internal_ports:
            t["check_ports"].insert(Rule((port,), tables.set_direction(stateful.INTERNAL)))
        self.tables = t

    # -- event log ---------------------------------------------------------

    def _log(self, verdict: str, stage: str, p: Packet, reason: str) -> dict:
        record = {
            "time": self.now,
            "switch": self.config.switch_id,
            "verdict": verdict,
            "stage": stage,
            "src": str(p.ip.src_ip),
            "dst": str(p.ip.dst_ip),
            "sport": p.tcp.src_port,
            "dport": p.tcp.dst_port,
            "reason": reason,
        }
        self.event_log.append(record)
        return record

    # -- pipeline ----------------------------------------------------------

    def _punt(self, p: Packet, stage: str, reason: str) -> list[PacketOut]:
        src = p.ip.src_ip
        if src in self.pending_punts:
            self._log(DROPPED, stage, p, "punt pending")
            return []
        self.pending_punts.add(src)
        self._log(PUNTED, stage, p, reason)
        return [PacketOut(self.config.cpu_port, p)]

    def _egress_is_internal(self, dst_ip: Ipv4Address) -> bool:
        action, hit = self.tables["ipv4_forward"].lookup((dst_ip,))
        if not hit or action.kind != tables.FORWARD:
            return False
        port = action.param_dict["port"]
        _, internal = self.tables["check_ports"].lookup((port,))
        return internal

    def process_packet(self, ingress_port: int, p: Packet) -> list[PacketOut]:
        if ingress_port not in self.config.ports:
            raise UnknownPort(f"{self.config.switch_id}: no port {ingress_port}")
        features = self.config.features

        # 1. presence check on the source
        action, _ = self.tables["present_table"].lookup((p.ip.src_ip,))
        if action.kind == tables.SEND_TO_CONTROLLER:
            return self._punt(p, STAGE_PRESENT, "present_table punt")
        if action.kind == tables.DROP:
            self._log(DROPPED, STAGE_PRESENT, p, "present_table drop")
            return []
        # SetAllowed / NoAction: continue

        # 2. stateless firewall
        if FEAT_STATELESS in features:
            verdict = stateless.stateless_check(
                p, self.tables["check_ip"], self.tables["check_mac"])
            if verdict.kind == stateless.TO_CONTROLLER:
                return self._punt(p, STAGE_STATELESS, verdict.reason)
            if verdict.kind == stateless.DROP:
                self._log(DROPPED, STAGE_STATELESS, p, verdict.reason)
                return []

        # 3. stateful firewall; traffic staying inside the protected side
        #    never consults or grows the flow state
        if FEAT_STATEFUL in features:
            direction = stateful.classify_direction(ingress_port, self.tables["check_ports"])
            bypass = (direction == stateful.INTERNAL
                      and self._egress_is_internal(p.ip.dst_ip))
            if not bypass:
                verdict = stateful.stateful_process(p, direction, self.blooms)
                if verdict.kind == stateful.DROP:
                    self._log(DROPPED, STAGE_STATEFUL, p, verdict.reason)
                    return []

        # 4. port knocking
        if FEAT_KNOCKING in features:
            state = self.knock_states.get(p.ip.src_ip)
            if state is None:
                self._log(DROPPED, STAGE_KNOCKING, p, "no knock state")
                return []
            verdict, new_state = knock_step(state, p)
            self.knock_states[p.ip.src_ip] = new_state
            if verdict.kind == K_CONSUME:
                self._log(CONSUMED, STAGE_KNOCKING, p, verdict.reason)
                return []
            if verdict.kind != K_FORWARD:
                self._log(DROPPED, STAGE_KNOCKING, p, verdict.reason)
                return []

        # 5. IPv4 forwarding
        action, _ = self.tables["ipv4_forward"].lookup((p.ip.dst_ip,))
        if action.kind != tables.FORWARD:
            self._log(DROPPED, STAGE_FORWARD, p, "no route")
            return []
        try:
            out = decrement_ttl(p)
        except TtlExpired:
            self._log(DROPPED, STAGE_FORWARD, p, "ttl expired")
            return []
        self._log(FORWARDED, STAGE_FORWARD, p, "forwarded")
        return [PacketOut(action.param_dict["port"], out)]

    # -- control plane -----------------------------------------------------

    def apply_rule_install(self, installs: list[tuple[str, Rule]]) -> None:
        """Install controller rules; knock rules additionally materialize or
        refresh the sender's knocking state."""
        touched: set[Ipv4Address] = set()
        for table_name, rule in installs:
            self.tables[table_name].insert(rule)
            if table_name == "present_table":
                self.pending_punts.discard(rule.key[0])
            elif table_name == "knock_rules":
                ip, port = rule.key
                pos = rule.action.param_dict.get("pos")
                if pos is None:
                    raise tables.SchemaMismatch(
                        "knock_rules action needs a 'pos' parameter")
                self._knock_staging.setdefault(ip, {})[pos] = port
                touched.add(ip)
        for ip in touched:
            staged = self._knock_staging[ip]
            if set(staged) == {0, 1, 2, 3}:
                seq = KnockSequence(
                    knock_ports=(staged[0], staged[1], staged[2]),
                    service_port=staged[3])
                current = self.knock_states.get(ip)
                if current is None or current.seq != seq:
                    self.knock_states[ip] = KnockState(owner_ip=ip, seq=seq, stage=0)

    def dump_rules(self) -> list[dict]:
        return self.tables.dump()

"""Discrete-event network simulator and scenario runner.

Time is integer ticks. A host's injected packet is processed by its switch
at the event's tick; every link traversal (switch to switch, switch to
host) costs one tick. The event queue orders by (time, insertion sequence),
which gives FIFO delivery per link and full run-to-run determinism. Punts
are resolved synchronously: the controller's rule installs land on the
punting switch within the same tick, before any later event is processed.
"""

from __future__ import annotations

import heapq
import json
import random
from dataclasses import dataclass
from typing import Optional

from .bloom import DEFAULT_M
from .controller import AclEntry, Controller, SequenceStore
from .packet import Ipv4Address, MacAddr, Packet, make_packet, serialize_packet
from .scenario import (InvalidScenario, KnockAction, NoSequence,
                       OpenServiceAction, ScenarioSpec, SendAction, knock_client)
from .switch import CONSUMED, DROPPED
from .tables import Action, Rule, KIND_IPV4, KIND_MAC
from .topology import TopologySpec, build_network, compute_routes

COUNTERS = ("sent", "delivered", "dropped", "punted", "consumed")


@dataclass
class RunReport:
    scenario: str
    seed: int
    trace: list
    hosts: dict
    rules: dict
    sequences: dict
    knock_stages: dict

    def to_json_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "trace": self.trace,
            "hosts": self.hosts,
            "rules": self.rules,
            "sequences": self.sequences,
            "knock_stages": self.knock_stages,
        }

    def canonical_text(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"

    def conservation_holds(self) -> bool:
        return all(
            c["sent"] == c["delivered"] + c["dropped"] + c["punted"] + c["consumed"]
            for c in self.hosts.values()
        )


def evaluate_expect(report: RunReport, expect: dict) -> list[str]:
    """Compare a report against a scenario's expect block; returns failures."""
    failures = []
    for host, wanted in expect.get("hosts", {}).items():
        actual = report.hosts.get(host)
        if actual is None:
            failures.append(f"expect references unknown host {host!r}")
            continue
        for metric, value in wanted.items():
            if metric not in COUNTERS:
                failures.append(f"{host}: unknown metric {metric!r}")
            elif actual[metric] != value:
                failures.append(
                    f"{host}: expected {metric}={value}, got {actual[metric]}")
    return failures


class Simulator:
    """One network plus its controller, ready to run scenarios."""

    def __init__(self, topo: TopologySpec, acl: dict[Ipv4Address, AclEntry],
                 store: SequenceStore, seed: int, bloom_m: int = DEFAULT_M):
        self.topo = topo
        self.seed = seed
        self.network = build_network(topo, bloom_m=bloom_m)
        self.store = store
        self.controller = Controller(
            acl=acl,
            store=store,
            rng=random.Random(seed),
            switch_features={s.switch_id: s.features for s in topo.switches},
            routes=compute_routes(topo),
        )
        self.hosts = topo.host_by_name()
        self.attach: dict[tuple[str, int], tuple] = {}
        for h in topo.hosts:
            self.attach[(h.switch, h.port)] = ("host", h.name)
        for link in topo.links:
            self.attach[(link.switch_a, link.port_a)] = ("link", link.switch_b, link.port_b)
            self.attach[(link.switch_b, link.port_b)] = ("link", link.switch_a, link.port_a)

        self._queue: list[tuple] = []
        self._seq = 0
        self._ephemeral: dict[str, int] = {}
        self._trace: list[dict] = []
        self._stats = {h.name: dict.fromkeys(COUNTERS, 0) for h in topo.hosts}
        self._sender: dict[int, str] = {}
        self._next_pkt_id = 0

    # -- scheduling --------------------------------------------------------

    def _push(self, time: int, item: tuple) -> None:
        heapq.heappush(self._queue, (time, self._seq, item))
        self._seq += 1

    def _next_sport(self, host: str) -> int:
        port = self._ephemeral.setdefault(host, 40000)
        self._ephemeral[host] = port + 1
        return port

    def _inject(self, time: int, sender: str, packet: Packet) -> None:
        host = self.hosts[sender]
        pkt_id = self._next_pkt_id
        self._next_pkt_id += 1
        self._sender[pkt_id] = sender
        self._stats[sender]["sent"] += 1
        self._push(time, ("packet", pkt_id, host.switch, host.port, packet))

    def _build_packet(self, sender: str, dst: str, dport: int, sport: int,
                      flags: int, ttl: int, payload: bytes,
                      src_ip_of: Optional[str], src_mac_of: Optional[str]) -> Packet:
        for name in (dst, src_ip_of, src_mac_of):
            if name is not None and name not in self.hosts:
                raise InvalidScenario(f"unknown host {name!r}")
        src_ip = self.hosts[src_ip_of or sender].ip
        src_mac = self.hosts[src_mac_of or sender].mac
        target = self.hosts[dst]
        return make_packet(
            src_ip=str(src_ip), dst_ip=str(target.ip),
            src_mac=str(src_mac), dst_mac=str(target.mac),
            sport=sport, dport=dport, flags=flags, ttl=ttl, payload=payload)

    # -- event expansion ---------------------------------------------------

    def _expand(self, time: int, sender: str, action) -> None:
        if sender not in self.hosts:
            raise InvalidScenario(f"unknown host {sender!r}")
        if isinstance(action, SendAction):
            for i in range(action.repeat):
                sport = action.sport if action.sport is not None else self._next_sport(sender)
                packet = self._build_packet(
                    sender, action.dst, action.dport, sport, action.flag_bits,
                    action.ttl, action.payload, action.src_ip_of, action.src_mac_of)
                self._inject(time + i * action.gap, sender, packet)
        elif isinstance(action, KnockAction):
            # default to the spoofed identity's sequence when spoofing,
            # else the sender's own
            seq_owner = action.sequence_of or action.src_ip_of or sender
            if seq_owner not in self.hosts:
                raise InvalidScenario(f"unknown host {seq_owner!r}")
            probes = knock_client(
                self.hosts[seq_owner].ip, self.store,
                order=action.order, spacing=action.spacing,
                include_service=action.include_service)
            for offset, dport in probes:
                sport = self._next_sport(sender)
                packet = self._build_packet(
                    sender, action.dst, dport, sport, 0x02, 64, b"",
                    action.src_ip_of, action.src_mac_of)
                self._inject(time + offset, sender, packet)
        elif isinstance(action, OpenServiceAction):
            identity = action.src_ip_of or sender
            if identity not in self.hosts:
                raise InvalidScenario(f"unknown host {identity!r}")
            seq = self.store.get(self.hosts[identity].ip)
            if seq is None:
                raise NoSequence(f"no stored sequence for {identity}")
            sport = self._next_sport(sender)
            packet = self._build_packet(
                sender, action.dst, seq.service_port, sport, 0x02, 64, b"",
                action.src_ip_of, action.src_mac_of)
            self._inject(time, sender, packet)
        else:
            raise InvalidScenario(f"unknown action type {type(action).__name__}")

    # -- preinstall --------------------------------------------------------

    def _apply_preinstall(self, scenario: ScenarioSpec) -> None:
        for pre in scenario.preinstall:
            if pre.switch not in self.network:
                raise InvalidScenario(f"preinstall references unknown switch {pre.switch!r}")
            switch = self.network[pre.switch]
            table = switch.tables[pre.table]
            key = tuple(
                _parse_key_field(kind, text)
                for kind, text in zip(table.schema, pre.key)
            )
            action = Action.make(pre.action, **dict(pre.params))
            switch.apply_rule_install([(pre.table, Rule(key, action))])

    # -- main loop ---------------------------------------------------------

    def run(self, scenario: ScenarioSpec) -> RunReport:
        self._apply_preinstall(scenario)
        for event in scenario.events:
            self._push(event.time, ("event", event.host, event.action))

        while self._queue:
            time, _, item = heapq.heappop(self._queue)
            kind = item[0]
            if kind == "event":
                _, sender, action = item
                self._expand(time, sender, action)
            elif kind == "packet":
                _, pkt_id, switch_id, ingress_port, packet = item
                self._process_at_switch(time, pkt_id, switch_id, ingress_port, packet)
            elif kind == "deliver":
                _, pkt_id, _host = item
                self._stats[self._sender[pkt_id]]["delivered"] += 1

        return self._report(scenario)

    def _process_at_switch(self, time: int, pkt_id: int, switch_id: str,
                           ingress_port: int, packet: Packet) -> None:
        switch = self.network[switch_id]
        switch.now = time
        outs = switch.process_packet(ingress_port, packet)
        record = switch.event_log[-1]
        self._trace.append(record)
        sender = self._sender[pkt_id]

        if not outs:
            if record["verdict"] == DROPPED:
                self._stats[sender]["dropped"] += 1
            elif record["verdict"] == CONSUMED:
                self._stats[sender]["consumed"] += 1
            return

        for out in outs:
            if out.egress_port == switch.config.cpu_port:
                installs = self.controller.handle_packet_in(
                    switch_id, serialize_packet(out.packet))
                switch.apply_rule_install(installs)
                self._stats[sender]["punted"] += 1
                continue
            dest = self.attach.get((switch_id, out.egress_port))
            if dest is None:
                self._stats[sender]["dropped"] += 1
                continue
            if dest[0] == "host":
                self._push(time + 1, ("deliver", pkt_id, dest[1]))
            else:
                self._push(time + 1, ("packet", pkt_id, dest[1], dest[2], out.packet))

    # -- reporting ---------------------------------------------------------

    def _report(self, scenario: ScenarioSpec) -> RunReport:
        knock_stages = {}
        for switch_id in sorted(self.network):
            states = self.network[switch_id].knock_states
            if states:
                knock_stages[switch_id] = {
                    str(ip): state.stage
                    for ip, state in sorted(states.items(), key=lambda kv: kv[0].octets)
                }
        return RunReport(
            scenario=scenario.name,
            seed=self.seed,
            trace=list(self._trace),
            hosts={name: dict(c) for name, c in sorted(self._stats.items())},
            rules={sid: self.network[sid].dump_rules() for sid in sorted(self.network)},
            sequences=self.store.to_json_dict(),
            knock_stages=knock_stages,
        )


def _parse_key_field(kind: str, text: str):
    if kind == KIND_IPV4:
        return Ipv4Address.from_text(text)
    if kind == KIND_MAC:
        return MacAddr.from_text(text)
    return int(text)


def run_scenario(topo: TopologySpec, scenario: ScenarioSpec,
                 acl: dict[Ipv4Address, AclEntry], store: SequenceStore,
                 seed: Optional[int] = None, bloom_m: int = DEFAULT_M) -> RunReport:
    """Build a fresh network and run one scenario to completion."""
    sim = Simulator(topo, acl, store,
                    seed=seed if seed is not None else scenario.seed,
                    bloom_m=bloom_m)
    return sim.run(scenario)

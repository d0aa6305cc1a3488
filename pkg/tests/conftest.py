import json
import os

import pytest

from p4filter.bundled import data_file, default_topology_path, scenario_path
from p4filter.controller import SequenceStore, load_acl
from p4filter.packet import make_packet
from p4filter.scenario import load_scenario
from p4filter.sim import Simulator
from p4filter.topology import load_topology

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


@pytest.fixture(scope="session")
def default_topology():
    return load_topology(default_topology_path())


@pytest.fixture
def fresh_store(tmp_path):
    return SequenceStore(str(tmp_path / "store.json"))


def load_bundled_scenario(name):
    """(scenario, acl) pair for a packaged scenario name."""
    scenario = load_scenario(scenario_path(name))
    acl = load_acl(data_file(scenario.acl_path)) if scenario.acl_path else {}
    return scenario, acl


def run_bundled(name, topo, store=None, seed=None):
    scenario, acl = load_bundled_scenario(name)
    sim = Simulator(topo, acl, store if store is not None else SequenceStore(),
                    seed=seed if seed is not None else scenario.seed)
    return sim.run(scenario), scenario


def syn(src="10.0.1.1", dst="10.0.9.9", sport=1000, dport=80,
        src_mac="02:00:00:00:01:01", dst_mac="02:00:00:00:09:09", **kw):
    return make_packet(src_ip=src, dst_ip=dst, src_mac=src_mac, dst_mac=dst_mac,
                       sport=sport, dport=dport, **kw)


def fixture_json(name):
    with open(os.path.join(FIXTURES, name)) as f:
        return json.load(f)

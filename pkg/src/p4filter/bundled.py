"""Paths to the packaged default topology, scenarios, and ACL files."""

from importlib import resources


def data_file(name: str) -> str:
    path = resources.files("p4filter") / "data" / name
    if not path.is_file():
        raise FileNotFoundError(f"no bundled data file named {name!r}")
    return str(path)


SCENARIOS = ("stateful_iperf", "stateless_block", "knock_auth", "spoof")


def default_topology_path() -> str:
    return data_file("topology_default.json")


def scenario_path(name: str) -> str:
    return data_file(f"scenario_{name}.json")

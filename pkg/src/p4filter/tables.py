"""Exact-match match-action tables.

Each table has a fixed key schema (an ordered tuple of field kinds), a map
of installed rules, and a default action returned on miss. A TableSet groups
the named tables owned by one switch. Keys match exactly — no prefixes, no
wildcards — which keeps every lookup result reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .packet import Ipv4Address, MacAddr

# Key field kinds a schema may use.
KIND_IPV4 = "ipv4"
KIND_MAC = "mac"
KIND_PORT = "port"          # 16-bit L4 port
KIND_PORT_ID = "port_id"    # switch port number

_KIND_TYPES = {
    KIND_IPV4: Ipv4Address,
    KIND_MAC: MacAddr,
    KIND_PORT: int,
    KIND_PORT_ID: int,
}

# Action kinds
FORWARD = "Forward"
DROP = "Drop"
SEND_TO_CONTROLLER = "SendToController"
SET_ALLOWED = "SetAllowed"
SET_DIRECTION = "SetDirection"
NO_ACTION = "NoAction"

ACTION_KINDS = {FORWARD, DROP, SEND_TO_CONTROLLER, SET_ALLOWED, SET_DIRECTION, NO_ACTION}


class TableError(Exception):
    pass


class DuplicateName(TableError):
    """A table with this name already exists on the switch."""


class SchemaMismatch(TableError):
    """Key arity or field kinds do not match the table schema."""


class NotFound(TableError):
    """delete_rule for a key that is not installed."""


@dataclass(frozen=True)
class Action:
    kind: str
    params: tuple = ()   # sorted (name, value) pairs; tuple keeps Action hashable

    def __post_init__(self):
        if self.kind not in ACTION_KINDS:
            raise ValueError(f"unknown action kind {self.kind!r}")

    @classmethod
    def make(cls, kind: str, **params) -> "Action":
        return cls(kind, tuple(sorted(params.items())))

    @property
    def param_dict(self) -> dict:
        return dict(self.params)


def forward(egress_port: int) -> Action:
    return Action.make(FORWARD, port=egress_port)


def drop() -> Action:
    return Action.make(DROP)


def send_to_controller() -> Action:
    return Action.make(SEND_TO_CONTROLLER)


def set_allowed(**params) -> Action:
    return Action.make(SET_ALLOWED, **params)


def set_direction(bit: int) -> Action:
    return Action.make(SET_DIRECTION, dir=bit)


def no_action() -> Action:
    return Action.make(NO_ACTION)


@dataclass(frozen=True)
class Rule:
    key: tuple
    action: Action
    priority: int = 0   # audit ordering only; keys are unique per table


@dataclass
class Table:
    name: str
    schema: tuple      # tuple of field kinds, e.g. (KIND_IPV4, KIND_MAC)
    default_action: Action
    rules: dict = field(default_factory=dict)

    def _check_key(self, key: tuple) -> None:
        if not isinstance(key, tuple) or len(key) != len(self.schema):
            raise SchemaMismatch(
                f"{self.name}: key arity {len(key) if isinstance(key, tuple) else '?'}"
                f" != schema arity {len(self.schema)}")
        for value, kind in zip(key, self.schema):
            if not isinstance(value, _KIND_TYPES[kind]) or isinstance(value, bool):
                raise SchemaMismatch(
                    f"{self.name}: field {value!r} is not a {kind}")

    def insert(self, rule: Rule) -> None:
        """Install a rule; an existing rule with the same key is replaced."""
        self._check_key(rule.key)
        self.rules[rule.key] = rule

    def delete(self, key: tuple) -> None:
        self._check_key(key)
        if key not in self.rules:
            raise NotFound(f"{self.name}: no rule for {key!r}")
        del self.rules[key]

    def lookup(self, key: tuple) -> tuple[Action, bool]:
        """(installed action, True) on hit; (default action, False) on miss."""
        self._check_key(key)
        rule = self.rules.get(key)
        if rule is None:
            return self.default_action, False
        return rule.action, True

    def dump(self) -> list[dict]:
        """Audit form: one dict per rule, keys rendered as strings."""
        out = []
        for key, rule in sorted(self.rules.items(), key=lambda kv: _render_key(kv[0])):
            out.append({
                "table": self.name,
                "key": _render_key(key),
                "action": rule.action.kind,
                "params": rule.action.param_dict,
            })
        return out


def _render_key(key: tuple) -> list[str]:
    return [str(f) for f in key]


class TableSet:
    """The named tables of one switch; names are unique within the set."""

    def __init__(self):
        self._tables: dict[str, Table] = {}

    def create(self, name: str, schema: Iterable[str], default_action: Action) -> Table:
        if name in self._tables:
            raise DuplicateName(name)
        schema = tuple(schema)
        for kind in schema:
            if kind not in _KIND_TYPES:
                raise ValueError(f"unknown key field kind {kind!r}")
        table = Table(name=name, schema=schema, default_action=default_action)
        self._tables[name] = table
        return table

    def __getitem__(self, name: str) -> Table:
        if name not in self._tables:
            raise NotFound(f"no table named {name!r}")
        return self._tables[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tables

    def names(self) -> list[str]:
        return list(self._tables)

    def dump(self) -> list[dict]:
        out = []
        for name in sorted(self._tables):
            out.extend(self._tables[name].dump())
        return out


def dump_jsonl(tables: TableSet) -> str:
    """Rule dump as JSON lines, one rule per line."""
    import json

    return "\n".join(json.dumps(entry, sort_keys=True) for entry in tables.dump())

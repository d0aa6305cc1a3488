import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from p4filter import tables as tb
from p4filter.packet import Ipv4Address, MacAddr

IP1 = Ipv4Address.from_text("10.0.2.2")
IP2 = Ipv4Address.from_text("10.0.2.3")
MAC1 = MacAddr.from_text("02:00:00:00:00:01")


def present_table():
    ts = tb.TableSet()
    return ts, ts.create("present_table", (tb.KIND_IPV4,), tb.send_to_controller())


class TestCreate:
    def test_empty_with_default(self):
        _, t = present_table()
        action, hit = t.lookup((IP1,))
        assert not hit and action.kind == tb.SEND_TO_CONTROLLER

    def test_forward_table_default_drop(self):
        ts = tb.TableSet()
        t = ts.create("ipv4_forward", (tb.KIND_IPV4,), tb.drop())
        action, hit = t.lookup((IP1,))
        assert not hit and action.kind == tb.DROP

    def test_duplicate_name(self):
        ts, _ = present_table()
        with pytest.raises(tb.DuplicateName):
            ts.create("present_table", (tb.KIND_IPV4,), tb.drop())

    def test_unknown_kind(self):
        ts = tb.TableSet()
        with pytest.raises(ValueError):
            ts.create("t", ("nonsense",), tb.drop())


class TestInsertLookup:
    def test_read_your_write(self):
        _, t = present_table()
        t.insert(tb.Rule((IP1,), tb.set_allowed()))
        action, hit = t.lookup((IP1,))
        assert hit and action.kind == tb.SET_ALLOWED

    def test_wrong_arity(self):
        _, t = present_table()
        with pytest.raises(tb.SchemaMismatch):
            t.insert(tb.Rule((IP1, MAC1), tb.drop()))

    def test_wrong_field_type(self):
        _, t = present_table()
        with pytest.raises(tb.SchemaMismatch):
            t.insert(tb.Rule((MAC1,), tb.drop()))
        with pytest.raises(tb.SchemaMismatch):
            t.lookup(("10.0.2.2",))

    def test_bool_is_not_a_port(self):
        ts = tb.TableSet()
        t = ts.create("check_ports", (tb.KIND_PORT_ID,), tb.set_direction(1))
        with pytest.raises(tb.SchemaMismatch):
            t.insert(tb.Rule((True,), tb.set_direction(0)))

    def test_replacement_semantics(self):
        _, t = present_table()
        t.insert(tb.Rule((IP1,), tb.set_allowed()))
        t.insert(tb.Rule((IP1,), tb.drop()))
        action, hit = t.lookup((IP1,))
        assert hit and action.kind == tb.DROP
        assert len(t.rules) == 1


class TestDelete:
    def test_delete_restores_default(self):
        _, t = present_table()
        t.insert(tb.Rule((IP1,), tb.drop()))
        t.delete((IP1,))
        action, hit = t.lookup((IP1,))
        assert not hit and action.kind == tb.SEND_TO_CONTROLLER

    def test_delete_absent(self):
        _, t = present_table()
        with pytest.raises(tb.NotFound):
            t.delete((IP1,))

    def test_insert_delete_insert(self):
        _, t = present_table()
        t.insert(tb.Rule((IP1,), tb.drop()))
        t.delete((IP1,))
        t.insert(tb.Rule((IP1,), tb.set_allowed()))
        action, hit = t.lookup((IP1,))
        assert hit and action.kind == tb.SET_ALLOWED


class TestPairKeys:
    def test_ip_mac_binding(self):
        ts = tb.TableSet()
        t = ts.create("check_mac", (tb.KIND_IPV4, tb.KIND_MAC), tb.drop())
        t.insert(tb.Rule((IP1, MAC1), tb.set_allowed()))
        assert t.lookup((IP1, MAC1))[1]
        assert not t.lookup((IP2, MAC1))[1]


class TestDump:
    def test_jsonl_shape(self):
        ts = tb.TableSet()
        t = ts.create("ipv4_forward", (tb.KIND_IPV4,), tb.drop())
        t.insert(tb.Rule((IP1,), tb.forward(3)))
        ts.create("check_mac", (tb.KIND_IPV4, tb.KIND_MAC), tb.drop()).insert(
            tb.Rule((IP2, MAC1), tb.set_allowed()))
        lines = tb.dump_jsonl(ts).splitlines()
        rows = [json.loads(line) for line in lines]
        assert rows == sorted(rows, key=lambda r: (r["table"], r["key"]))
        assert {"table": "ipv4_forward", "key": ["10.0.2.2"],
                "action": "Forward", "params": {"port": 3}} in rows
        assert {"table": "check_mac", "key": ["10.0.2.3", "02:00:00:00:00:01"],
                "action": "SetAllowed", "params": {}} in rows


class TestActions:
    def test_params(self):
        a = tb.set_allowed(pos=2)
        assert a.param_dict == {"pos": 2}
        assert tb.forward(7).param_dict == {"port": 7}
        assert tb.set_direction(0).param_dict == {"dir": 0}

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            tb.Action("Teleport")


@st.composite
def operations(draw):
    ops = []
    for _ in range(draw(st.integers(0, 30))):
        ip = Ipv4Address(bytes([10, 0, 0, draw(st.integers(0, 7))]))
        if draw(st.booleans()):
            kind = draw(st.sampled_from([tb.DROP, tb.SET_ALLOWED]))
            ops.append(("insert", ip, kind))
        else:
            ops.append(("delete", ip, None))
    return ops


class TestProperties:
    @given(operations())
    @settings(max_examples=200)
    def test_matches_dict_model(self, ops):
        """After any insert/delete sequence the table behaves like a plain
        dict: same live keys, same visible actions, default on miss."""
        _, t = present_table()
        model = {}
        for op, ip, kind in ops:
            if op == "insert":
                t.insert(tb.Rule((ip,), tb.Action.make(kind)))
                model[ip] = kind
            else:
                try:
                    t.delete((ip,))
                    assert ip in model
                    del model[ip]
                except tb.NotFound:
                    assert ip not in model
        assert len(t.rules) == len(model)
        for n in range(8):
            ip = Ipv4Address(bytes([10, 0, 0, n]))
            action, hit = t.lookup((ip,))
            if ip in model:
                assert hit and action.kind == model[ip]
            else:
                assert not hit and action.kind == tb.SEND_TO_CONTROLLER

    @given(operations())
    @settings(max_examples=50)
    def test_lookup_is_deterministic(self, ops):
        results = []
        for _ in range(2):
            _, t = present_table()
            for op, ip, kind in ops:
                if op == "insert":
                    t.insert(tb.Rule((ip,), tb.Action.make(kind)))
                else:
                    try:
                        t.delete((ip,))
                    except tb.NotFound:
                        pass
            results.append([t.lookup((Ipv4Address(bytes([10, 0, 0, n])),))
                            for n in range(8)])
        assert results[0] == results[1]

    @given(operations())
    @settings(max_examples=100)
    def test_no_fabricated_forward(self, ops):
        """Lookups never invent a Forward that was not installed/configured."""
        _, t = present_table()
        for op, ip, kind in ops:
            if op == "insert":
                t.insert(tb.Rule((ip,), tb.Action.make(kind)))
            else:
                try:
                    t.delete((ip,))
                except tb.NotFound:
                    pass
        for n in range(8):
            action, _ = t.lookup((Ipv4Address(bytes([10, 0, 0, n])),))
            assert action.kind != tb.FORWARD

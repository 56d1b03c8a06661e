import dataclasses

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cidor_sim.bundle import make_interest, make_response
from cidor_sim.engine import (
    AGGREGATED,
    DUPLICATE,
    EXPIRED,
    BufferIt,
    DeliverAndDrop,
    DeliverAndForward,
    Drop,
    Forward,
    OppCache,
    ProcessedList,
    PritTable,
    Reply,
    buffer_admit,
    expire_state,
    handle_interest,
    handle_response,
    new_random_host,
)

from conftest import node

MB = 1_000_000


def interest(src="R1", name="X", dest="T", t=0.0, ttl=500.0, nonce=1, seq=1):
    return make_interest(src, name, dest, t, ttl, nonce, seq=seq)


def test_prit_collects_requesters():
    p = PritTable()
    assert p.add("X", "R2", 500, 0)
    assert p.add("X", "R1", 600, 10)
    assert not p.add("X", "R1", 600, 10)
    e = p.get("X", 10)
    assert e.requesters == ["R1", "R2"] and e.expiry == 600
    assert p.get("X", 601) is None
    assert len(p) == 0


def test_prit_pop():
    p = PritTable()
    p.add("X", "R", 100, 0)
    assert p.pop("X", 5) == ["R"]
    assert p.pop("X", 5) == []


def test_opp_cache_lru_order():
    c = OppCache(3)
    c.put("a", 1)
    c.put("b", 1)
    c.put("c", 1)
    assert c.get("a") == 1  # a is now most recent
    assert c.put("d", 1) == ["b"]
    assert "a" in c and "b" not in c


def test_opp_cache_oversized_item_skipped():
    c = OppCache(10)
    c.put("a", 4)
    assert c.put("big", 11) == []
    assert "big" not in c and c.used == 4


@given(st.lists(st.tuples(st.sampled_from("abcdefgh"), st.integers(1, 5)), max_size=60),
       st.integers(1, 12))
def test_opp_cache_matches_reference_lru(ops, cap):
    c = OppCache(cap)
    ref: list[tuple[str, int]] = []  # oldest first
    for name, size in ops:
        ref = [(n, s) for n, s in ref if n != name]
        if size <= cap:
            while sum(s for _, s in ref) + size > cap:
                ref.pop(0)
            ref.append((name, size))
        c.put(name, size)
        assert list(c.items.items()) == ref
        assert c.used == sum(s for _, s in ref) <= cap


def test_processed_list_window():
    pl = ProcessedList(retention=500)
    pl.add(("X", 1, "k"), 0)
    assert pl.seen(("X", 1, "k"), 500)
    assert not pl.seen(("X", 1, "k"), 501)
    assert pl.expire(500) == 0
    assert pl.expire(501) == 1


def test_processed_list_capacity():
    pl = ProcessedList(retention=1e9, capacity=3)
    for k in range(5):
        pl.add(k, 0)
    assert list(pl.keys) == [2, 3, 4]


def test_buffer_admit_accepts():
    n = node("A", buffer=64 * MB)
    b = dataclasses.replace(interest(), size=MB)
    assert buffer_admit(n, b).accepted


def test_buffer_admit_evicts_two_oldest():
    n = node("A", buffer=4 * MB)
    olds = [dataclasses.replace(interest(seq=k, nonce=k, name=f"n{k}"), size=MB) for k in range(4)]
    for b in olds:
        assert buffer_admit(n, b).accepted
    big = dataclasses.replace(interest(seq=9, nonce=9, name="big"), size=2 * MB)
    adm = buffer_admit(n, big)
    assert adm.accepted
    assert [b.id for b in adm.evicted] == [olds[0].id, olds[1].id]
    assert n.buffer.used == 4 * MB


def test_buffer_admit_rejects_oversized():
    n = node("A", buffer=MB)
    adm = buffer_admit(n, dataclasses.replace(interest(), size=MB + 1))
    assert not adm.accepted and adm.evicted == []


def test_buffer_never_evicts_in_flight():
    n = node("A", buffer=2 * MB)
    a = dataclasses.replace(interest(seq=1, name="a"), size=MB)
    b = dataclasses.replace(interest(seq=2, name="b", nonce=2), size=MB)
    buffer_admit(n, a)
    buffer_admit(n, b)
    n.buffer.sending.add(a.id)
    adm = buffer_admit(n, dataclasses.replace(interest(seq=3, name="c", nonce=3), size=MB))
    assert [x.id for x in adm.evicted] == [b.id]
    n.buffer.sending.add(n.buffer.get("R1:3").id)
    assert not buffer_admit(n, dataclasses.replace(interest(seq=4, name="d", nonce=4), size=MB)).accepted


def test_expire_boundary():
    n = node("A")
    buffer_admit(n, interest(t=0, ttl=500))
    assert expire_state(n, 500) == 0
    assert len(n.buffer) == 1
    assert expire_state(n, 501) == 1
    assert len(n.buffer) == 0


def test_expire_empty_node():
    assert expire_state(node("A"), 1e6) == 0


def test_provider_replies(rng):
    p = node("P", content={"X": 750_000})
    act = handle_interest(p, interest(dest="P"), 10, rng, ["R1", "P", "Q"])
    assert isinstance(act, Reply)
    assert act.response.destination == "R1"
    assert act.response.size == 750_000


def test_opp_cache_hit_replies(rng):
    a = node("A")
    a.opp.put("X", 123)
    act = handle_interest(a, interest(), 10, rng)
    assert isinstance(act, Reply) and act.response.size == 123


def test_similar_interests_aggregate(rng):
    d = node("D")
    first = handle_interest(d, interest(src="R1", nonce=1), 1, rng)
    assert isinstance(first, BufferIt)
    buffer_admit(d, first.bundle)
    second = handle_interest(d, interest(src="R2", nonce=2), 2, rng)
    assert second == Drop(AGGREGATED)
    assert d.prit.get("X", 2).requesters == ["R1", "R2"]
    assert len(d.buffer) == 1


def test_same_nonce_dropped(rng):
    d = node("D")
    i = interest(nonce=77)
    assert isinstance(handle_interest(d, dataclasses.replace(i, hops=("R1", "A")), 1, rng), BufferIt)
    act = handle_interest(d, dataclasses.replace(i, hops=("R1", "C")), 2, rng)
    assert act == Drop(DUPLICATE)


def test_expired_interest_dropped(rng):
    assert handle_interest(node("D"), interest(t=0, ttl=10), 11, rng) == Drop(EXPIRED)


def test_destination_retargets(rng):
    d = node("T")
    hosts = ["R1", "T", "A", "B", "C"]
    act = handle_interest(d, interest(dest="T"), 5, rng, hosts)
    assert isinstance(act, BufferIt)
    assert act.bundle.destination in {"A", "B", "C"}
    assert act.bundle.dest_history == ("T",)


def test_new_random_host_is_uniform(rng):
    b = interest(dest="T")
    hosts = ["R1", "T", "A", "B", "C", "D"]
    picks = [new_random_host(b, "T", hosts, rng) for _ in range(8000)]
    for h in "ABCD":
        assert abs(picks.count(h) / 8000 - 0.25) < 0.03


def test_vanilla_node_buffers_untouched(rng):
    v = node("V", cidor=False)
    v.opp.put("X", 5)
    b = interest()
    assert handle_interest(v, b, 1, rng) == BufferIt(b)
    assert len(v.prit) == 0 and len(v.processed) == 0
    r = make_response(b, "P", 10, 2, seq=1)
    assert handle_response(v, r, 3) == Forward(r)


def _response(dest="R0", name="X", block=(), t=1.0):
    i = make_interest(dest, name, "P", 0, 500, 5, seq=1)
    return dataclasses.replace(make_response(i, "P", 1000, t, seq=1), prit_block=block)


def test_relay_with_pending_extends_block():
    a = node("A")
    a.prit.add("X", "R", 400, 0)
    act = handle_response(a, _response(), 2)
    assert isinstance(act, Forward)
    assert act.bundle.prit_block == ("R",)
    assert "X" in a.opp
    assert len(a.prit) == 0


def test_relay_without_pending_passes_through():
    a = node("A")
    r = _response()
    act = handle_response(a, r, 2)
    assert act == Forward(r)
    assert a.opp.get("X") == 1000


def test_destination_with_empty_block_consumes():
    r0 = node("R0")
    assert handle_response(r0, _response(), 2) == DeliverAndDrop()
    assert handle_response(r0, _response(), 3) == Drop(DUPLICATE)


def test_destination_branches_to_block():
    r0 = node("R0")
    act = handle_response(r0, _response(block=("R", "Q")), 2)
    assert isinstance(act, DeliverAndForward)
    assert act.bundle.destination == "R" and act.bundle.prit_block == ("Q",)


def test_block_member_delivers_and_forwards():
    q = node("Q")
    act = handle_response(q, _response(block=("Q", "S")), 2)
    assert isinstance(act, DeliverAndForward)
    assert act.bundle.prit_block == ("S",) and act.bundle.destination == "R0"


def test_response_purges_stale_interests(rng):
    a = node("A")
    act = handle_interest(a, interest(src="R"), 1, rng)
    buffer_admit(a, act.bundle)
    handle_response(a, _response(), 2)
    assert not a.buffer.has_interest_for("X")
    assert act.bundle.id in a.terminated

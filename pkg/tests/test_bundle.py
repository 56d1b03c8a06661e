import dataclasses

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cidor_sim.bundle import (
    Bundle,
    BundleError,
    BundleKind,
    IdAllocator,
    InterestExpired,
    decode,
    dedup_key,
    encode,
    encode_inline,
    make_interest,
    make_response,
    transfer_time,
)


def test_interest_expiry():
    b = make_interest("R1", "/news/a", "P3", 100, 500, 42, seq=1)
    assert b.kind is BundleKind.INTEREST
    assert b.expiry == 600
    assert not b.expired(600)
    assert b.expired(600.5)
    assert b.size == 1000
    assert b.hops == ("R1",)


@pytest.mark.parametrize("ttl", [0, -5])
def test_bad_ttl(ttl):
    with pytest.raises(BundleError):
        make_interest("R1", "/x", "P3", 0, ttl, 1, seq=1)


def test_target_must_differ():
    with pytest.raises(BundleError):
        make_interest("R1", "/x", "R1", 0, 10, 1, seq=1)


def test_same_inputs_same_bundle():
    a, b = IdAllocator(), IdAllocator()
    x = make_interest("R1", "/x", "P", 0, 10, 7, seq=a.next("R1"))
    y = make_interest("R1", "/x", "P", 0, 10, 7, seq=b.next("R1"))
    assert x == y


def test_response_goes_back_to_source():
    i = make_interest("R1", "X", "P", 0, 500, 9, seq=1)
    r = make_response(i, "P", 1_000_000, 20, seq=1)
    assert r.destination == "R1"
    assert (r.name, r.nonce, r.lifetime) == ("X", 9, 500)
    assert r.kind is BundleKind.RESPONSE
    assert transfer_time(r.size, 2_500_000) == pytest.approx(3.2)


def test_response_to_expired_interest():
    i = make_interest("R1", "X", "P", 0, 500, 9, seq=1)
    with pytest.raises(InterestExpired):
        make_response(i, "P", 10, 501, seq=1)


def test_dedup_keys():
    i = make_interest("R", "X", "T", 0, 500, 5, seq=1)
    via_a = dataclasses.replace(i, hops=("R", "A"))
    via_c = dataclasses.replace(i, hops=("R", "C"))
    assert dedup_key(via_a) == dedup_key(via_c)
    other = make_interest("R2", "X", "T", 0, 500, 6, seq=1)
    assert dedup_key(other) != dedup_key(i)
    r = make_response(i, "T", 10, 1, seq=1)
    assert (r.name, r.nonce) == (i.name, i.nonce)
    assert dedup_key(r) != dedup_key(i)


eids = st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789_:", min_size=1, max_size=6)


@st.composite
def bundles(draw):
    return Bundle(
        id=draw(eids),
        source=draw(eids),
        destination=draw(eids),
        creation_time=draw(st.floats(0, 1e6, allow_nan=False)),
        lifetime=draw(st.floats(0.001, 1e4, allow_nan=False)),
        size=draw(st.integers(1, 10**7)),
        kind=draw(st.sampled_from(BundleKind)),
        name=draw(st.text(alphabet="/abcxyz0123456789.", min_size=1, max_size=12)),
        nonce=draw(st.integers(0, 2**64 - 1)),
        prit_block=tuple(draw(st.lists(eids, max_size=4))),
        copy_budget=draw(st.one_of(st.none(), st.integers(1, 64))),
        dest_history=tuple(draw(st.lists(eids, max_size=3))),
        hops=tuple(draw(st.lists(eids, max_size=5))),
    )


@given(bundles())
def test_encoding_round_trip(b):
    assert decode(encode(b)) == b
    assert decode(encode_inline(b)) == b


def test_encoding_field_order():
    b = make_interest("R1", "/a", "P", 1.5, 500, 3, seq=2)
    keys = [line.split("=")[0] for line in encode(b).splitlines()]
    assert keys[:3] == ["id", "kind", "source"]
    assert "copy_budget=-" in encode(b)


def test_decode_rejects_garbage():
    with pytest.raises(BundleError):
        decode("id=x kind=Interest")
    with pytest.raises(BundleError):
        decode("nonsense")

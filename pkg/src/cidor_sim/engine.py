"""Per-node CIDOR engine: caches, pending-requester table and the
interest/response handlers.

Handlers mutate the node's CIDOR state (PRIT, caches, processed list) and
return an action; buffering is left to the caller so that routing can roll
back a rejected transfer.
"""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

from .bundle import Bundle, BundleKind, ContentName, Eid, dedup_key, make_response

DEFAULT_OPP_CACHE = 16_000_000
DEFAULT_PROCESSED_CAPACITY = 10_000


# -- tables ------------------------------------------------------------------


@dataclass
class PritEntry:
    requesters: list[Eid]
    expiry: float


class PritTable:
    """Content name -> requesters waiting for it."""

    def __init__(self) -> None:
        self.entries: dict[ContentName, PritEntry] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, name: ContentName, now: float) -> Optional[PritEntry]:
        entry = self.entries.get(name)
        if entry is not None and now > entry.expiry:
            del self.entries[name]
            return None
        return entry

    def holds(self, name: ContentName, now: float) -> bool:
        return self.get(name, now) is not None

    def add(self, name: ContentName, requester: Eid, expiry: float, now: float) -> bool:
        """Record ``requester``; returns False when it was already listed."""
        entry = self.get(name, now)
        if entry is None:
            self.entries[name] = PritEntry([requester], expiry)
            return True
        entry.expiry = max(entry.expiry, expiry)
        if requester in entry.requesters:
            return False
        entry.requesters.append(requester)
        entry.requesters.sort()
        return True

    def pop(self, name: ContentName, now: float) -> list[Eid]:
        entry = self.get(name, now)
        if entry is None:
            return []
        del self.entries[name]
        return entry.requesters

    def expire(self, now: float) -> int:
        dead = [n for n, e in self.entries.items() if now > e.expiry]
        for n in dead:
            del self.entries[n]
        return len(dead)


class ContentStore(dict):
    """Producer-owned content: name -> size in bytes.  Never evicted."""


class OppCache:
    """Byte-bounded LRU cache of content seen in transit."""

    def __init__(self, capacity: int = DEFAULT_OPP_CACHE) -> None:
        self.capacity = capacity
        self.used = 0
        self.items: OrderedDict[ContentName, int] = OrderedDict()

    def __contains__(self, name: ContentName) -> bool:
        return name in self.items

    def __len__(self) -> int:
        return len(self.items)

    def get(self, name: ContentName) -> Optional[int]:
        size = self.items.get(name)
        if size is not None:
            self.items.move_to_end(name)
        return size

    def put(self, name: ContentName, size: int) -> list[ContentName]:
        """Insert or refresh ``name``; returns the evicted names."""
        if name in self.items:
            self.used -= self.items.pop(name)
        if size > self.capacity:
            return []
        evicted = []
        while self.used + size > self.capacity:
            old, old_size = self.items.popitem(last=False)
            self.used -= old_size
            evicted.append(old)
        self.items[name] = size
        self.used += size
        return evicted


class ProcessedList:
    """Recently seen dedup keys with a fixed retention window.

    Retention is constant, so insertion order is also expiry order.
    """

    def __init__(self, retention: float, capacity: int = DEFAULT_PROCESSED_CAPACITY):
        self.retention = retention
        self.capacity = capacity
        self.keys: OrderedDict[tuple, float] = OrderedDict()

    def __len__(self) -> int:
        return len(self.keys)

    def seen(self, key: tuple, now: float) -> bool:
        expiry = self.keys.get(key)
        return expiry is not None and now <= expiry

    def add(self, key: tuple, now: float) -> None:
        self.keys.pop(key, None)
        self.keys[key] = now + self.retention
        while len(self.keys) > self.capacity:
            self.keys.popitem(last=False)

    def expire(self, now: float) -> int:
        n = 0
        while self.keys:
            key, expiry = next(iter(self.keys.items()))
            if now <= expiry:
                break
            del self.keys[key]
            n += 1
        return n


@dataclass
class Admission:
    accepted: bool
    evicted: list[Bundle] = field(default_factory=list)


class Buffer:
    """Bounded bundle store kept in receive order."""

    def __init__(self, capacity: int) -> None:
        self.capacity = capacity
        self.used = 0
        self.bundles: dict[str, Bundle] = {}
        self.sending: set[str] = set()
        # buffered interests by content name
        self.interest_names: dict[ContentName, set[str]] = {}

    def __contains__(self, bundle_id: str) -> bool:
        return bundle_id in self.bundles

    def __len__(self) -> int:
        return len(self.bundles)

    def __iter__(self):
        return iter(self.bundles.values())

    def get(self, bundle_id: str) -> Optional[Bundle]:
        return self.bundles.get(bundle_id)

    def fits(self, size: int) -> bool:
        if size > self.capacity:
            return False
        free = self.capacity - self.used
        if size <= free:
            return True
        for bid, b in self.bundles.items():
            if bid not in self.sending:
                free += b.size
                if size <= free:
                    return True
        return False

    def admit(self, b: Bundle) -> Admission:
        if not self.fits(b.size):
            return Admission(False)
        evicted = []
        if self.used + b.size > self.capacity:
            for bid in list(self.bundles):
                if bid in self.sending:
                    continue
                evicted.append(self.remove(bid))
                if self.used + b.size <= self.capacity:
                    break
        self._insert(b)
        return Admission(True, evicted)

    def _insert(self, b: Bundle) -> None:
        self.bundles[b.id] = b
        self.used += b.size
        if b.kind is BundleKind.INTEREST:
            self.interest_names.setdefault(b.name, set()).add(b.id)

    def update(self, b: Bundle) -> None:
        """Swap in a modified copy of a held bundle (same id and size)."""
        old = self.bundles[b.id]
        assert old.size == b.size
        self.bundles[b.id] = b

    def remove(self, bundle_id: str) -> Optional[Bundle]:
        b = self.bundles.pop(bundle_id, None)
        if b is None:
            return None
        self.used -= b.size
        self.sending.discard(bundle_id)
        if b.kind is BundleKind.INTEREST:
            ids = self.interest_names[b.name]
            ids.discard(bundle_id)
            if not ids:
                del self.interest_names[b.name]
        return b

    def has_interest_for(self, name: ContentName) -> bool:
        return name in self.interest_names

    def expired(self, now: float) -> list[str]:
        return [bid for bid, b in self.bundles.items() if b.expired(now)]


@dataclass
class NodeState:
    eid: Eid
    buffer: Buffer
    cidor_enabled: bool = True
    prit: PritTable = field(default_factory=PritTable)
    cs: ContentStore = field(default_factory=ContentStore)
    opp: OppCache = field(default_factory=OppCache)
    processed: ProcessedList = field(default_factory=lambda: ProcessedList(500.0))
    # ids this node consumed or dropped; part of its summary vector
    terminated: dict[str, float] = field(default_factory=dict)

    def lookup(self, name: ContentName) -> Optional[int]:
        """Size of ``name`` if held in the opportunistic cache or content store."""
        size = self.opp.get(name)
        if size is None:
            size = self.cs.get(name)
        return size

    def has_seen(self, bundle_id: str) -> bool:
        return bundle_id in self.buffer.bundles or bundle_id in self.terminated

    def terminate(self, b: Bundle) -> None:
        self.terminated[b.id] = b.expiry


def make_node(
    eid: Eid,
    *,
    buffer_bytes: int,
    opp_cache_bytes: int = DEFAULT_OPP_CACHE,
    retention: float = 500.0,
    processed_capacity: int = DEFAULT_PROCESSED_CAPACITY,
    cidor_enabled: bool = True,
) -> NodeState:
    return NodeState(
        eid=eid,
        buffer=Buffer(buffer_bytes),
        cidor_enabled=cidor_enabled,
        opp=OppCache(opp_cache_bytes),
        processed=ProcessedList(retention, processed_capacity),
    )


# -- actions -----------------------------------------------------------------


@dataclass(frozen=True)
class Reply:
    response: Bundle


@dataclass(frozen=True)
class BufferIt:
    bundle: Bundle


@dataclass(frozen=True)
class Drop:
    reason: str


@dataclass(frozen=True)
class DeliverAndDrop:
    pass


@dataclass(frozen=True)
class DeliverAndForward:
    bundle: Bundle


@dataclass(frozen=True)
class Forward:
    bundle: Bundle


InterestAction = Union[Reply, BufferIt, Drop]
ResponseAction = Union[DeliverAndDrop, DeliverAndForward, Forward, Drop]

EXPIRED = "expired"
DUPLICATE = "duplicate-nonce"
AGGREGATED = "aggregated"


def new_random_host(b: Bundle, me: Eid, hosts: Sequence[Eid], rng) -> Eid:
    """Uniform pick among hosts other than me, the source and past destinations."""
    excluded = {me, b.source, b.destination, *b.dest_history}
    candidates = [h for h in hosts if h not in excluded]
    if not candidates:
        candidates = [h for h in hosts if h != me and h != b.source]
    if not candidates:
        return b.destination
    return candidates[int(rng.integers(len(candidates)))]


def handle_interest(
    node: NodeState,
    b: Bundle,
    now: float,
    rng,
    hosts: Sequence[Eid] = (),
    *,
    seq: int = 0,
) -> InterestAction:
    """Process an interest that just arrived at ``node``.

    ``seq`` numbers the response if one is created here.
    """
    if b.expired(now):
        return Drop(EXPIRED)
    if not node.cidor_enabled:
        return BufferIt(b)

    size = node.lookup(b.name)
    if size is not None:
        node.processed.add(dedup_key(b), now)
        return Reply(make_response(b, node.eid, size, now, seq=seq))

    key = dedup_key(b)
    if node.processed.seen(key, now):
        return Drop(DUPLICATE)
    node.processed.add(key, now)

    if node.prit.holds(b.name, now) or node.buffer.has_interest_for(b.name):
        node.prit.add(b.name, b.source, b.expiry, now)
        return Drop(AGGREGATED)

    node.prit.add(b.name, b.source, b.expiry, now)
    if node.eid == b.destination and not b.expired(now):
        target = new_random_host(b, node.eid, hosts, rng)
        if target != b.destination:
            b = replace(
                b, destination=target, dest_history=b.dest_history + (b.destination,)
            )
    return BufferIt(b)


def _merge_block(block: tuple[Eid, ...], extra: Sequence[Eid], b: Bundle, me: Eid):
    skip = set(block) | {b.source, b.destination, me}
    return block + tuple(e for e in sorted(extra) if e not in skip)


def handle_response(node: NodeState, b: Bundle, now: float) -> ResponseAction:
    """Process a response that just arrived at ``node``.

    Any response that survives is cached and the pending requesters for its
    name move from the PRIT into the response's PRIT block.
    """
    if b.expired(now):
        return Drop(EXPIRED)
    if not node.cidor_enabled:
        return Forward(b)

    key = dedup_key(b)
    if node.processed.seen(key, now):
        return Drop(DUPLICATE)
    node.processed.add(key, now)

    me = node.eid
    pending = node.prit.pop(b.name, now)
    if pending:
        _drop_stale_interests(node, b.name)
    deliver = me in pending

    if me == b.destination:
        block = _merge_block(b.prit_block, pending, b, me)
        if not block:
            return DeliverAndDrop()
        b = replace(b, destination=block[0], prit_block=block[1:])
        node.opp.put(b.name, b.size)
        return DeliverAndForward(b)

    if me in b.prit_block:
        block = tuple(e for e in b.prit_block if e != me)
        b = replace(b, prit_block=_merge_block(block, pending, b, me))
        node.opp.put(b.name, b.size)
        return DeliverAndForward(b)

    if pending:
        b = replace(b, prit_block=_merge_block(b.prit_block, pending, b, me))
    node.opp.put(b.name, b.size)
    return DeliverAndForward(b) if deliver else Forward(b)


def _drop_stale_interests(node: NodeState, name: ContentName) -> None:
    # requesters now ride in the response's PRIT block
    for bid in sorted(node.buffer.interest_names.get(name, ())):
        if bid not in node.buffer.sending:
            node.terminate(node.buffer.remove(bid))


def buffer_admit(node: NodeState, b: Bundle) -> Admission:
    return node.buffer.admit(b)


def expire_state(node: NodeState, now: float) -> int:
    removed = 0
    for bid in node.buffer.expired(now):
        node.buffer.remove(bid)
        removed += 1
    removed += node.prit.expire(now)
    removed += node.processed.expire(now)
    # summary-vector bookkeeping, not counted
    for bid in [bid for bid, t in node.terminated.items() if now > t]:
        del node.terminated[bid]
    return removed

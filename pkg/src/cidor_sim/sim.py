"""Deterministic discrete-event core.

One numpy ``Generator`` per run is consumed in event order; events are
ordered by (time, insertion sequence).  Movement is sampled on a fixed tick
and contacts are pairs within radio range at that tick.  Each node's radio
carries one transfer at a time and a contact going down aborts whatever was
in flight on it.
"""
from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, replace
from typing import Optional, Sequence, TextIO

import numpy as np

from . import kernels
from .bundle import Bundle, IdAllocator, encode_inline, make_interest, transfer_time
from .config import ScenarioConfig
from .engine import (
    BufferIt,
    DeliverAndDrop,
    DeliverAndForward,
    Drop,
    NodeState,
    Reply,
    expire_state,
    handle_interest,
    make_node,
)
from .metrics import MetricsSink, RunSummary
from .mobility import MovementModel, load_map
from .routing import Mode, Router, Transfer, next_transfer, on_transfer_complete
from .workload import (
    ContentLadder,
    base_probabilities,
    build_ladder,
    make_catalog,
    place_resources,
    requester_ladder,
    sample_query,
    schedule_interests,
)

MB = 1_000_000

TICK, CONTACT_UP, CONTACT_DOWN, TRANSFER_DONE, INTEREST_GEN, EXPIRY = range(6)
EVENT_NAMES = ("Tick", "ContactUp", "ContactDown", "TransferDone", "InterestGen", "Expiry")


class InvariantViolation(RuntimeError):
    pass


@dataclass(frozen=True)
class LinkModel:
    range_m: float = 100.0
    rate_bps: float = 2_500_000.0

    def __post_init__(self):
        if not (self.range_m > 0 and self.rate_bps > 0):
            raise ValueError("link range and rate must be positive")


@dataclass
class InFlight:
    sender: int
    receiver: int
    transfer: Transfer
    bundle: Bundle
    start: float
    finish: float
    aborted: bool = False


@dataclass
class Requester:
    ladder: ContentLadder


def _label(action) -> str:
    if isinstance(action, Drop):
        return f"Drop({action.reason})"
    return type(action).__name__


def _pair(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


class World:
    def __init__(
        self,
        nodes: Sequence[NodeState],
        router: Router,
        link: LinkModel = LinkModel(),
        *,
        seed: int = 0,
        rng=None,
        duration: float = math.inf,
        movement: Optional[MovementModel] = None,
        slots: Optional[Sequence[int]] = None,
        tick: float = 1.0,
        ttl: float = 500.0,
        interest_size: int = 1000,
        trace: Optional[TextIO] = None,
        check_invariants: bool = False,
    ):
        self.nodes = sorted(nodes, key=lambda n: n.eid)
        self.eids = [n.eid for n in self.nodes]
        self.index = {e: i for i, e in enumerate(self.eids)}
        if len(self.index) != len(self.nodes):
            raise ValueError("node EIDs must be unique")
        self.router = router
        self.link = link
        self.rng = rng if rng is not None else np.random.default_rng(seed)
        self.duration = duration
        self.ttl = ttl
        self.interest_size = interest_size
        self.trace = trace
        self.debug = check_invariants
        self.ids = IdAllocator()
        self.sink = MetricsSink(patience=2 * ttl)
        self.now = 0.0

        n = len(self.nodes)
        self.neighbors: list[set[int]] = [set() for _ in range(n)]
        self.busy: list[Optional[InFlight]] = [None] * n
        self.links: dict[tuple[int, int], InFlight] = {}
        self._heap: list = []
        self._seq = 0
        self._dirty: set[int] = set()
        self._expiry_marks: set[tuple[int, float]] = set()
        self.requesters: dict[int, Requester] = {}
        self.targets: list[str] = list(self.eids)
        self.catalog_sizes: dict[str, int] = {}
        self.transfers_started = 0

        self.movement = movement
        self.tick = tick
        if movement is not None:
            slots = list(slots) if slots is not None else list(range(n))
            self._slots = slots
            self._legs = [movement.initial(self.rng, slots[i]) for i in range(n)]
            self._pending = [deque(leg.segments()) for leg in self._legs]
            self.seg = np.array([p.popleft() for p in self._pending], dtype=float).reshape(n, 6)
            self.xy = np.zeros((n, 2))
            self._state = np.zeros((n, n), dtype=np.uint8)
            self._push(0.0, TICK, 0)

    # -- event queue -------------------------------------------------------

    def _push(self, t: float, kind: int, payload) -> None:
        heapq.heappush(self._heap, (t, self._seq, kind, payload))
        self._seq += 1

    def _log(self, kind: str, *fields) -> None:
        if self.trace is not None:
            self.trace.write(f"{self.now!r} {kind} {' '.join(str(f) for f in fields)}\n")

    # -- scripting helpers (used by scenarios without mobility) -------------

    def schedule_contact(self, t: float, a: str, b: str, up: bool = True) -> None:
        self._push(float(t), CONTACT_UP if up else CONTACT_DOWN, _pair(self.index[a], self.index[b]))

    def add_requester(self, eid: str, ladder: ContentLadder) -> None:
        self.requesters[self.index[eid]] = Requester(ladder)

    def schedule_interest(self, t: float, requester: str, name: str | None = None,
                          target: str | None = None) -> None:
        self._push(float(t), INTEREST_GEN, (self.index[requester], name, target))

    def node(self, eid: str) -> NodeState:
        return self.nodes[self.index[eid]]

    # -- main loop ---------------------------------------------------------

    def run(self, until: Optional[float] = None) -> RunSummary:
        """Process events up to ``until`` (default: the run duration).

        Calling again continues from where the previous call stopped.
        """
        stop = self.duration if until is None else min(until, self.duration)
        handlers = (
            self._on_tick,
            self._on_contact_up,
            self._on_contact_down,
            self._on_transfer_done,
            self._on_interest,
            self._on_expiry,
        )
        heap = self._heap
        while heap and heap[0][0] <= stop:
            t, _, kind, payload = heapq.heappop(heap)
            self.now = t
            handlers[kind](payload)
            if self._dirty:
                self._drain()
            if self.debug:
                self.check_invariants()
        self.sink.summary.check()
        return self.sink.summary

    def _drain(self) -> None:
        dirty = sorted(self._dirty)
        self._dirty.clear()
        for i in dirty:
            self._kick(i)

    def _kick(self, i: int) -> None:
        if self.busy[i] is not None or not self.neighbors[i]:
            return
        now = self.now
        a = self.nodes[i]
        for j in sorted(self.neighbors[i]):
            if self.busy[j] is not None:
                continue
            b = self.nodes[j]
            fwd = next_transfer(self.router, a, b, now)
            back = next_transfer(self.router, b, a, now)
            if fwd and back:
                if (back[1].creation_time, back[1].id) < (fwd[1].creation_time, fwd[1].id):
                    fwd = None
            if fwd:
                self._start(i, j, *fwd)
                return
            if back:
                self._start(j, i, *back)
                return

    def _start(self, i: int, j: int, transfer: Transfer, bundle: Bundle) -> InFlight:
        if bundle.expired(self.now):
            raise InvariantViolation(f"expired bundle {bundle.id} handed to a transfer")
        finish = self.now + transfer_time(bundle.size, self.link.rate_bps)
        xfer = InFlight(i, j, transfer, bundle, self.now, finish)
        self.busy[i] = self.busy[j] = xfer
        self.links[_pair(i, j)] = xfer
        self.nodes[i].buffer.sending.add(bundle.id)
        self.transfers_started += 1
        self._push(finish, TRANSFER_DONE, xfer)
        return xfer

    def _release(self, xfer: InFlight) -> None:
        self.busy[xfer.sender] = self.busy[xfer.receiver] = None
        self.links.pop(_pair(xfer.sender, xfer.receiver), None)
        self.nodes[xfer.sender].buffer.sending.discard(xfer.bundle.id)
        self._dirty.add(xfer.sender)
        self._dirty.add(xfer.receiver)

    # -- handlers ----------------------------------------------------------

    def _on_tick(self, k: int) -> None:
        t = k * self.tick
        seg = self.seg
        for i in np.flatnonzero(seg[:, 5] <= t):
            self._advance(int(i), t)
        kernels.positions(t, seg, self.xy)
        for i, j, up in kernels.contact_changes(self.xy, self.link.range_m, self._state):
            if up:
                self._on_contact_up((int(i), int(j)))
            else:
                self._on_contact_down((int(i), int(j)))
        if (k + 1) * self.tick <= self.duration:
            self._push((k + 1) * self.tick, TICK, k + 1)

    def _advance(self, i: int, t: float) -> None:
        pending = self._pending[i]
        while self.seg[i, 5] <= t:
            if not pending:
                leg = self.movement.next_leg(self._legs[i], self.rng, self._slots[i])
                self._legs[i] = leg
                pending.extend(leg.segments())
            self.seg[i] = pending.popleft()

    def _on_contact_up(self, pair: tuple[int, int]) -> None:
        i, j = pair
        if j in self.neighbors[i]:
            return
        self.neighbors[i].add(j)
        self.neighbors[j].add(i)
        self._log("ContactUp", self.eids[i], self.eids[j])
        self._dirty.add(i)
        self._dirty.add(j)

    def _on_contact_down(self, pair: tuple[int, int]) -> None:
        i, j = pair
        if j not in self.neighbors[i]:
            return
        self.neighbors[i].discard(j)
        self.neighbors[j].discard(i)
        self._log("ContactDown", self.eids[i], self.eids[j])
        xfer = self.links.get(pair)
        if xfer is not None:
            xfer.aborted = True
            self._release(xfer)
            self._log("Abort", self.eids[xfer.sender], self.eids[xfer.receiver], xfer.bundle.id)
        self._dirty.add(i)
        self._dirty.add(j)

    def _on_transfer_done(self, xfer: InFlight) -> None:
        if xfer.aborted:
            return
        self._release(xfer)
        sender, receiver = self.nodes[xfer.sender], self.nodes[xfer.receiver]
        bundle = sender.buffer.get(xfer.bundle.id) or xfer.bundle
        self.sink.transmitted(not bundle.is_interest)
        t = xfer.transfer
        out = on_transfer_complete(
            self.router, sender, receiver, bundle, t.mode, t.budget, self.now, self.rng,
            self.eids, self.ids,
        )
        got = out.received
        action = out.action
        self._log(
            "TransferDone", sender.eid, receiver.eid, t.mode.value,
            _label(action) if out.accepted else "Rejected", encode_inline(got),
        )
        if not out.accepted:
            return
        if isinstance(action, Reply):
            self.sink.delivered(got.id)
        elif isinstance(action, BufferIt):
            if receiver.eid == got.destination:
                self.sink.delivered(got.id)
        elif isinstance(action, (DeliverAndDrop, DeliverAndForward)):
            self.sink.content_received(receiver.eid, got.name, self.now)
            if receiver.eid == got.destination or receiver.eid in got.prit_block:
                self.sink.delivered(got.id)
        for b in out.stored:
            if isinstance(action, Reply):
                self.sink.created(b.id)
            self._schedule_expiry(xfer.receiver, b)

    def _on_interest(self, payload) -> None:
        i, name, target = payload
        node = self.nodes[i]
        if name is None:
            names = self.catalog_names
            name = names[sample_query(self.requesters[i].ladder, self.rng)]
        self.sink.issued(node.eid, name, self.now)
        self._log("InterestGen", node.eid, name)
        if node.lookup(name) is not None:
            self.sink.content_received(node.eid, name, self.now)
            return
        if target is None:
            choices = [e for e in self.targets if e != node.eid]
            if not choices:
                return
            target = choices[int(self.rng.integers(len(choices)))]
        nonce = int(self.rng.integers(0, 2**64, dtype=np.uint64))
        b = make_interest(node.eid, name, target, self.now, self.ttl, nonce,
                          seq=self.ids.next(node.eid), size=self.interest_size)
        b = replace(b, copy_budget=self.router.initial_budget())
        action = handle_interest(node, b, self.now, self.rng, self.eids)
        if isinstance(action, BufferIt):
            adm = node.buffer.admit(action.bundle)
            if adm.accepted:
                self.sink.created(b.id)
                self._schedule_expiry(i, action.bundle)
                self._dirty.add(i)
        self._log("Interest", _label(action), encode_inline(b))

    def _schedule_expiry(self, i: int, b: Bundle) -> None:
        t = math.nextafter(b.expiry, math.inf)
        if (i, t) not in self._expiry_marks:
            self._expiry_marks.add((i, t))
            self._push(t, EXPIRY, (i, t))

    def _on_expiry(self, payload) -> None:
        i, t = payload
        self._expiry_marks.discard(payload)
        expire_state(self.nodes[i], self.now)

    # -- debug checks ------------------------------------------------------

    def check_invariants(self) -> None:
        budgets: dict[str, int] = {}
        copies: dict[str, int] = {}
        for node in self.nodes:
            buf = node.buffer
            used = sum(b.size for b in buf)
            if used != buf.used or used > buf.capacity:
                raise InvariantViolation(f"{node.eid}: buffer occupancy {used}/{buf.capacity}")
            if node.opp.used > node.opp.capacity:
                raise InvariantViolation(f"{node.eid}: opportunistic cache over capacity")
            if node.cidor_enabled:
                seen_names, seen_keys = set(), set()
                for b in buf:
                    if b.is_interest:
                        if b.name in seen_names:
                            raise InvariantViolation(f"{node.eid}: two interests for {b.name}")
                        seen_names.add(b.name)
                        key = (b.name, b.nonce)
                        if key in seen_keys:
                            raise InvariantViolation(f"{node.eid}: duplicate nonce buffered")
                        seen_keys.add(key)
            for b in buf:
                copies[b.id] = copies.get(b.id, 0) + 1
                if b.copy_budget is not None:
                    budgets[b.id] = budgets.get(b.id, 0) + b.copy_budget
        limit = self.router.initial_budget()
        if limit is not None:
            for bid, total in budgets.items():
                if total > limit:
                    raise InvariantViolation(f"{bid}: copy budget {total} > {limit}")
        if self.router.kind.value == "firstcontact":
            for bid, c in copies.items():
                if c > 1:
                    raise InvariantViolation(f"{bid}: {c} live copies under first contact")

    @property
    def catalog_names(self) -> list[str]:
        return self._catalog_names


def build_world(cfg: ScenarioConfig, seed: Optional[int] = None, *, trace: Optional[TextIO] = None,
                check_invariants: bool = False) -> World:
    seed = cfg["seed"] if seed is None else seed
    rng = np.random.default_rng(seed)
    n_req, n_mid, n_prod = cfg["nodes.requesters"], cfg["nodes.intermediates"], cfg["workload.producers"]
    buffer_bytes = int(round(cfg["buffer_mb"] * MB))
    opp_bytes = int(round(cfg["opp_cache_mb"] * MB))

    def node(eid: str, cidor: bool = True) -> NodeState:
        return make_node(eid, buffer_bytes=buffer_bytes, opp_cache_bytes=opp_bytes,
                         retention=cfg.retention, processed_capacity=cfg["processed.capacity"],
                         cidor_enabled=cidor)

    roles = (
        [(f"r{k:02d}", k, True) for k in range(n_req)]
        + [(f"i{k:02d}", k, cfg["nodes.intermediates_cidor"]) for k in range(n_mid)]
        + [(f"p{k:02d}", k, True) for k in range(n_prod)]
    )
    nodes = [node(eid, cidor) for eid, _, cidor in roles]
    slot_of = {eid: k for eid, k, _ in roles}

    catalog = make_catalog(cfg["workload.catalog_size"], rng,
                           (cfg["workload.content_min"], cfg["workload.content_max"]))
    producers = [eid for eid, _, _ in roles if eid.startswith("p")]
    plan = place_resources(catalog, producers, cfg["workload.items_per_producer"], rng)
    by_eid = {n.eid: n for n in nodes}
    for p, names in plan.items():
        for name in sorted(names):
            by_eid[p].cs[name] = catalog.size_of(name)

    dist, n_items = cfg["workload.dist"], len(catalog)
    base = base_probabilities(dist, n_items, cfg["workload.zipf_s"], cfg["workload.zipf_c"])
    ladders = {}
    for eid, _, _ in roles[:n_req]:
        if cfg["workload.jitter_sd"] > 0:
            ladders[eid] = requester_ladder(base, rng, cfg["workload.jitter_sd"], cfg["workload.range_max"])
        else:
            ladders[eid] = build_ladder(dist, n_items, cfg["workload.range_max"], s=cfg["workload.zipf_s"],
                                        c=cfg["workload.zipf_c"], renormalize=cfg["workload.renormalize"])

    movement = None
    if cfg["mobility"] != "none":
        movement = MovementModel(
            kind=cfg["mobility"],
            speed_range=(cfg["mobility.speed_min"], cfg["mobility.speed_max"]),
            pause_range=(cfg["mobility.pause_min"], cfg["mobility.pause_max"]),
            area=(cfg["mobility.area_w"], cfg["mobility.area_h"]),
            graph=load_map(cfg.map_path()) if cfg["mobility"] == "spmb" else None,
            poi_prob=cfg["mobility.poi_prob"],
        )
    kind = cfg["router"]
    copies = cfg["epsw.copies"] if kind == "epsw" else cfg["snw.copies"]
    eids_sorted = sorted(by_eid)
    world = World(
        nodes,
        Router.parse(kind, copies),
        LinkModel(cfg["link.range_m"], cfg["link.rate_bps"]),
        rng=rng,
        duration=cfg["duration_s"],
        movement=movement,
        slots=[slot_of[e] for e in eids_sorted],
        tick=cfg["mobility.tick_s"],
        ttl=cfg["ttl_s"],
        interest_size=cfg["workload.interest_size"],
        trace=trace,
        check_invariants=check_invariants,
    )
    world._catalog_names = list(catalog.names)
    world.targets = [e for e in eids_sorted if not e.startswith("r")]
    for eid, ladder in ladders.items():
        world.add_requester(eid, ladder)
    for t, eid in schedule_interests(sorted(ladders), cfg["workload.interval_s"], cfg["duration_s"]):
        world.schedule_interest(t, eid)
    world.sink.summary.seed = seed
    world.sink.summary.config = {**cfg.echo(), "seed": seed, "_all": cfg.dumps().replace(f"seed={cfg['seed']}\n", "")}
    return world


def run(cfg: ScenarioConfig, seed: Optional[int] = None, *, trace: Optional[TextIO] = None,
        check_invariants: bool = False) -> RunSummary:
    return build_world(cfg, seed, trace=trace, check_invariants=check_invariants).run()


def detect_contacts(xy: np.ndarray, radius: float, state: np.ndarray):
    """(ups, downs) as lists of index pairs; ``state`` is updated in place."""
    changes = kernels.contact_changes(np.ascontiguousarray(xy, dtype=float), radius, state)
    ups = [(int(i), int(j)) for i, j, u in changes if u]
    downs = [(int(i), int(j)) for i, j, u in changes if not u]
    return ups, downs

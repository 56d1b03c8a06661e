"""DTN routing strategies.

A strategy only decides which buffered bundles cross a contact and how
(copy with a budget share, or move).  What happens to a bundle on arrival
is the node engine's business, whatever the strategy.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .bundle import Bundle, IdAllocator
from .engine import (
    EXPIRED,
    BufferIt,
    DeliverAndDrop,
    DeliverAndForward,
    Drop,
    Forward,
    NodeState,
    Reply,
    handle_interest,
    handle_response,
)


class RouterKind(enum.Enum):
    EPIDEMIC = "epidemic"
    SNW = "snw"
    FIRST_CONTACT = "firstcontact"
    EPSW = "epsw"


class Mode(enum.Enum):
    COPY = "Copy"
    MOVE = "Move"


@dataclass(frozen=True)
class Router:
    kind: RouterKind
    copies: int = 10

    def __post_init__(self):
        if self.copies < 1:
            raise ValueError(f"copy budget must be >= 1, got {self.copies}")

    @classmethod
    def parse(cls, name: str, copies: int = 10) -> "Router":
        try:
            kind = RouterKind(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown router {name!r}") from None
        return cls(kind, copies)

    @property
    def name(self) -> str:
        return self.kind.value

    def initial_budget(self) -> Optional[int]:
        if self.kind in (RouterKind.SNW, RouterKind.EPSW):
            return self.copies
        return None


@dataclass(frozen=True)
class Transfer:
    bundle_id: str
    mode: Mode
    budget: Optional[int]


def summary_vector(node: NodeState) -> set[str]:
    return set(node.buffer.bundles) | set(node.terminated)


def _sorted_bundles(node: NodeState) -> list[Bundle]:
    return sorted(node.buffer.bundles.values(), key=lambda b: (b.creation_time, b.id))


def _targets(b: Bundle, peer: str) -> bool:
    return peer == b.destination or peer in b.prit_block


def _spray(b: Bundle, peer: str, wait: bool) -> Optional[Transfer]:
    budget = b.copy_budget or 1
    if budget > 1:
        return Transfer(b.id, Mode.COPY, budget // 2)
    if wait:
        if _targets(b, peer):
            return Transfer(b.id, Mode.MOVE, 1)
        return None
    if peer in b.hops:
        return None
    return Transfer(b.id, Mode.MOVE, 1)


def _decide(router: Router, b: Bundle, peer: NodeState) -> Optional[Transfer]:
    kind = router.kind
    if kind is RouterKind.EPIDEMIC:
        return Transfer(b.id, Mode.COPY, None)
    if kind is RouterKind.FIRST_CONTACT:
        if peer.eid in b.hops:
            return None
        return Transfer(b.id, Mode.MOVE, None)
    if kind is RouterKind.SNW:
        return _spray(b, peer.eid, wait=True)
    # EP_pSW: interests spread then keep moving, responses spray and wait
    return _spray(b, peer.eid, wait=not b.is_interest)


def iter_transfers(router: Router, a: NodeState, b: NodeState, now: float):
    for bundle in _sorted_bundles(a):
        if bundle.expired(now) or b.has_seen(bundle.id):
            continue
        t = _decide(router, bundle, b)
        if t is not None:
            yield t, bundle


def select_transfers(router: Router, a: NodeState, b: NodeState, now: float) -> list[Transfer]:
    """Everything ``a`` would send to ``b`` right now, oldest first."""
    return [t for t, _ in iter_transfers(router, a, b, now)]


def next_transfer(router: Router, a: NodeState, b: NodeState, now: float):
    """First eligible (transfer, bundle) pair from ``a`` to ``b``, or None."""
    for item in iter_transfers(router, a, b, now):
        return item
    return None


@dataclass
class Outcome:
    accepted: bool
    action: object = None
    received: Optional[Bundle] = None
    stored: list[Bundle] = field(default_factory=list)
    evicted: list[Bundle] = field(default_factory=list)


def on_transfer_complete(
    router: Router,
    sender: NodeState,
    receiver: NodeState,
    bundle: Bundle,
    mode: Mode,
    budget: Optional[int],
    now: float,
    rng,
    hosts: Sequence[str] = (),
    ids: Optional[IdAllocator] = None,
) -> Outcome:
    """Hand a finished transfer to the receiver and settle the sender's copy.

    A receiver that cannot buffer the bundle leaves both sides untouched.
    """
    hops = bundle.hops if bundle.hops[-1:] == (receiver.eid,) else bundle.hops + (receiver.eid,)
    got = replace(bundle, copy_budget=budget, hops=hops)
    if got.expired(now):
        return Outcome(False, Drop(EXPIRED), got)
    if not receiver.buffer.fits(got.size):
        return Outcome(False, None, got)

    ids = ids or IdAllocator()
    if got.is_interest:
        action = handle_interest(receiver, got, now, rng, hosts, seq=ids.next(receiver.eid))
    else:
        action = handle_response(receiver, got, now)

    out = Outcome(True, action, got)
    keep = None
    if isinstance(action, (BufferIt, Forward, DeliverAndForward)):
        keep = action.bundle
    elif isinstance(action, Reply):
        receiver.terminate(got)
        keep = replace(action.response, copy_budget=router.initial_budget())
    else:
        # Drop or DeliverAndDrop
        receiver.terminate(got)

    if keep is not None:
        adm = receiver.buffer.admit(keep)
        out.evicted = adm.evicted
        if adm.accepted:
            out.stored.append(keep)
        elif not isinstance(action, Reply):
            out.accepted = False
            return out

    held = sender.buffer.get(bundle.id)
    if held is not None:
        if mode is Mode.MOVE:
            sender.buffer.remove(bundle.id)
        elif budget is not None and held.copy_budget is not None:
            sender.buffer.update(replace(held, copy_budget=max(1, held.copy_budget - budget)))
    return out


__all__ = [
    "Mode",
    "Outcome",
    "Router",
    "RouterKind",
    "Transfer",
    "next_transfer",
    "on_transfer_complete",
    "select_transfers",
    "summary_vector",
]

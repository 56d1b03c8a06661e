"""Logical bundle model with CIDOR extension blocks.

Bundles are immutable values; relays produce modified copies with
:func:`dataclasses.replace`.  The canonical text encoding is one
``key=value`` field per line in a fixed order and exists for traces and
golden files only.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional

Eid = str
ContentName = str

INTEREST_SIZE = 1000
NONCE_BITS = 64


class BundleError(ValueError):
    """Raised when a bundle cannot be built from the given arguments."""


class InterestExpired(BundleError):
    """The interest had expired before a response could be built."""


class BundleKind(enum.Enum):
    INTEREST = "Interest"
    RESPONSE = "Response"


@dataclass(frozen=True)
class Bundle:
    id: str
    source: Eid
    destination: Eid
    creation_time: float
    lifetime: float
    size: int
    kind: BundleKind
    name: ContentName
    nonce: int
    prit_block: tuple[Eid, ...] = ()
    copy_budget: Optional[int] = None
    # destinations this bundle has already been retargeted away from
    dest_history: tuple[Eid, ...] = ()
    # every node that has held this bundle, origin first
    hops: tuple[Eid, ...] = field(default=())

    @property
    def expiry(self) -> float:
        return self.creation_time + self.lifetime

    def expired(self, now: float) -> bool:
        return now > self.creation_time + self.lifetime

    @property
    def is_interest(self) -> bool:
        return self.kind is BundleKind.INTEREST


def bundle_id(origin: Eid, seq: int) -> str:
    return f"{origin}:{seq}"


def _check_eid(value: Eid, what: str) -> None:
    if not value or any(c.isspace() for c in value) or "," in value:
        raise BundleError(f"invalid {what} {value!r}")


def _check_name(name: ContentName) -> None:
    if not name or any(c.isspace() for c in name):
        raise BundleError(f"invalid content name {name!r}")


def make_interest(
    requester: Eid,
    name: ContentName,
    target: Eid,
    now: float,
    ttl: float,
    nonce: int,
    *,
    seq: int,
    size: int = INTEREST_SIZE,
) -> Bundle:
    """Create an interest for ``name`` issued by ``requester``.

    ``target`` is the initial (random) host the interest is addressed to.
    """
    _check_eid(requester, "requester")
    _check_eid(target, "target")
    _check_name(name)
    if not ttl > 0:
        raise BundleError(f"ttl must be positive, got {ttl}")
    if target == requester:
        raise BundleError("interest target must differ from requester")
    if size <= 0:
        raise BundleError(f"interest size must be positive, got {size}")
    if not 0 <= nonce < 2**NONCE_BITS:
        raise BundleError(f"nonce out of range: {nonce}")
    return Bundle(
        id=bundle_id(requester, seq),
        source=requester,
        destination=target,
        creation_time=float(now),
        lifetime=float(ttl),
        size=int(size),
        kind=BundleKind.INTEREST,
        name=name,
        nonce=nonce,
        hops=(requester,),
    )


def make_response(
    interest: Bundle, provider: Eid, content_size: int, now: float, *, seq: int
) -> Bundle:
    """Build the response a content holder sends back to the interest source.

    The response gets the interest's lifetime, counted from ``now``.
    """
    if interest.kind is not BundleKind.INTEREST:
        raise BundleError("make_response needs an interest")
    if interest.expired(now):
        raise InterestExpired(f"interest {interest.id} expired at {interest.expiry}")
    if content_size <= 0:
        raise BundleError(f"content size must be positive, got {content_size}")
    if provider == interest.source:
        raise BundleError("provider cannot answer its own interest")
    return Bundle(
        id=bundle_id(provider, seq),
        source=provider,
        destination=interest.source,
        creation_time=float(now),
        lifetime=interest.lifetime,
        size=int(content_size),
        kind=BundleKind.RESPONSE,
        name=interest.name,
        nonce=interest.nonce,
        hops=(provider,),
    )


def dedup_key(b: Bundle) -> tuple[ContentName, int, BundleKind]:
    return (b.name, b.nonce, b.kind)


def extension_blocks(b: Bundle) -> tuple:
    """The CIDOR metadata a vanilla relay must carry through untouched."""
    return (b.kind, b.name, b.nonce, b.prit_block)


def transfer_time(size: int, rate_bps: float) -> float:
    return 8.0 * size / rate_bps


class IdAllocator:
    """Per-origin monotone sequence numbers for bundle ids."""

    def __init__(self) -> None:
        self._next: dict[Eid, int] = {}

    def next(self, origin: Eid) -> int:
        seq = self._next.get(origin, 0) + 1
        self._next[origin] = seq
        return seq


# -- canonical text encoding -------------------------------------------------

_FIELDS = (
    "id",
    "kind",
    "source",
    "destination",
    "creation_time",
    "lifetime",
    "size",
    "name",
    "nonce",
    "prit_block",
    "copy_budget",
    "dest_history",
    "hops",
)


def _fields(b: Bundle) -> Iterator[tuple[str, str]]:
    for key in _FIELDS:
        value = getattr(b, key)
        if key == "kind":
            text = value.value
        elif key in ("creation_time", "lifetime"):
            text = repr(float(value))
        elif key in ("prit_block", "dest_history", "hops"):
            text = ",".join(value)
        elif key == "copy_budget":
            text = "-" if value is None else str(value)
        else:
            text = str(value)
        yield key, text


def encode(b: Bundle) -> str:
    return "".join(f"{k}={v}\n" for k, v in _fields(b))


def encode_inline(b: Bundle) -> str:
    """Single-line form of :func:`encode` used in event traces."""
    return " ".join(f"{k}={v}" for k, v in _fields(b))


def decode(text: str) -> Bundle:
    values: dict[str, str] = {}
    for token in text.split():
        key, sep, value = token.partition("=")
        if not sep:
            raise BundleError(f"malformed field {token!r}")
        values[key] = value
    missing = [k for k in _FIELDS if k not in values]
    if missing:
        raise BundleError(f"missing fields: {', '.join(missing)}")

    def seq(key: str) -> tuple[str, ...]:
        return tuple(values[key].split(",")) if values[key] else ()

    budget = values["copy_budget"]
    return Bundle(
        id=values["id"],
        source=values["source"],
        destination=values["destination"],
        creation_time=float(values["creation_time"]),
        lifetime=float(values["lifetime"]),
        size=int(values["size"]),
        kind=BundleKind(values["kind"]),
        name=values["name"],
        nonce=int(values["nonce"]),
        prit_block=seq("prit_block"),
        copy_budget=None if budget == "-" else int(budget),
        dest_history=seq("dest_history"),
        hops=seq("hops"),
    )


__all__ = [
    "Bundle",
    "BundleError",
    "BundleKind",
    "ContentName",
    "Eid",
    "IdAllocator",
    "InterestExpired",
    "decode",
    "dedup_key",
    "encode",
    "encode_inline",
    "extension_blocks",
    "make_interest",
    "make_response",
    "replace",
    "transfer_time",
]

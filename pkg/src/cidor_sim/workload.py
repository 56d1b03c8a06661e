"""Content catalog, popularity ladder, resource placement and query schedule."""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bundle import ContentName, Eid


class WorkloadError(ValueError):
    pass


@dataclass(frozen=True)
class Catalog:
    names: tuple[ContentName, ...]
    sizes: tuple[int, ...]

    def __post_init__(self):
        if not self.names:
            raise WorkloadError("catalog needs at least one item")
        if len(set(self.names)) != len(self.names):
            raise WorkloadError("catalog names must be unique")
        if len(self.sizes) != len(self.names):
            raise WorkloadError("one size per catalog item")

    def __len__(self) -> int:
        return len(self.names)

    def size_of(self, name: ContentName) -> int:
        return self.sizes[self.names.index(name)]


def make_catalog(n: int, rng, size_range=(500_000, 1_000_000), prefix="/content") -> Catalog:
    lo, hi = size_range
    sizes = rng.integers(lo, hi + 1, size=n)
    return Catalog(tuple(f"{prefix}/{j}" for j in range(n)), tuple(int(s) for s in sizes))


@dataclass(frozen=True)
class ContentLadder:
    cumulative: tuple[int, ...]
    range_max: int

    def __len__(self) -> int:
        return len(self.cumulative)


def _round(x: float) -> int:
    return int(math.floor(x + 0.5))


def zipf_probabilities(n: int, s: float = 1.0, c: float = 0.2) -> list[float]:
    return [c / j**s for j in range(1, n + 1)]


def ladder_from_probabilities(
    probs: Sequence[float], range_max: int = 1000, renormalize: bool = True
) -> ContentLadder:
    total = math.fsum(probs) if renormalize else 1.0
    if not total > 0:
        raise WorkloadError("probabilities sum to zero")
    acc = 0.0
    cumulative = []
    for p in probs:
        acc += p
        cumulative.append(_round(range_max * acc / total))
    if renormalize:
        cumulative[-1] = range_max
    # rounding must not break monotonicity
    for j in range(1, len(cumulative)):
        cumulative[j] = max(cumulative[j], cumulative[j - 1])
    return ContentLadder(tuple(cumulative), range_max)


def build_ladder(
    dist: str,
    n: int,
    range_max: int = 1000,
    *,
    s: float = 1.0,
    c: float = 0.2,
    renormalize: bool = True,
) -> ContentLadder:
    if n < 1:
        raise WorkloadError("ladder needs at least one item")
    if n > range_max:
        raise WorkloadError(f"catalog size {n} exceeds ladder range {range_max}")
    if dist == "uniform":
        return ContentLadder(tuple(_round(j * range_max / n) for j in range(1, n + 1)), range_max)
    if dist == "zipf":
        return ladder_from_probabilities(zipf_probabilities(n, s, c), range_max, renormalize)
    raise WorkloadError(f"unknown popularity distribution {dist!r}")


def base_probabilities(dist: str, n: int, s: float = 1.0, c: float = 0.2) -> list[float]:
    if dist == "uniform":
        return [1.0 / n] * n
    return zipf_probabilities(n, s, c)


def lookup(ladder: ContentLadder, v: int) -> int:
    """Smallest index whose ladder entry reaches ``v``; leftover range maps to the last item."""
    j = bisect.bisect_left(ladder.cumulative, v)
    return min(j, len(ladder.cumulative) - 1)


def sample_query(ladder: ContentLadder, rng) -> int:
    v = int(rng.integers(1, ladder.range_max + 1))
    return lookup(ladder, v)


def place_resources(
    catalog: Catalog, producers: Sequence[Eid], items_per_producer: int, rng
) -> dict[Eid, set[ContentName]]:
    n = len(catalog)
    if items_per_producer > n:
        raise WorkloadError(f"items_per_producer {items_per_producer} exceeds catalog size {n}")
    if items_per_producer < 0:
        raise WorkloadError("items_per_producer must be >= 0")
    plan = {}
    for p in producers:
        picks = rng.choice(n, size=items_per_producer, replace=False)
        plan[p] = {catalog.names[int(j)] for j in picks}
    return plan


def requester_ladder(
    base: Sequence[float], rng, sd_fraction: float = 0.1, range_max: int = 1000
) -> ContentLadder:
    """Ladder from per-item probabilities jittered around ``base`` (clamped, renormalized)."""
    base = np.asarray(base, dtype=float)
    if sd_fraction > 0:
        drawn = rng.normal(base, sd_fraction * base)
    else:
        drawn = base.copy()
    drawn = np.clip(drawn, 0.0, None)
    if drawn.sum() <= 0:
        drawn = base
    return ladder_from_probabilities(drawn.tolist(), range_max, renormalize=True)


def schedule_interests(
    requesters: Sequence[Eid], interval: float, duration: float
) -> list[tuple[float, Eid]]:
    """(time, requester) pairs; the first interest goes out at ``interval``."""
    if not interval > 0:
        raise WorkloadError("interest interval must be positive")
    count = int(math.floor(duration / interval + 1e-9)) if duration > 0 else 0
    return [(k * interval, r) for k in range(1, count + 1) for r in requesters]

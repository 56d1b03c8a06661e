"""Run counters, the four evaluation metrics, and CSV output."""
from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

NAN = float("nan")

CONFIG_COLUMNS = ["router", "dist", "buffer_mb", "ttl_s", "producers", "items_per_producer"]
RUN_COLUMNS = (
    ["seed"]
    + CONFIG_COLUMNS
    + [
        "issued",
        "satisfied",
        "response_ratio",
        "avg_latency_s",
        "delivery_ratio",
        "avg_cost",
        "transmissions",
        # auxiliary columns beyond the core set
        "avg_cost_data_only",
        "data_transmissions",
        "created",
        "delivered",
        "point",
    ]
)
METRICS = ["response_ratio", "avg_latency_s", "delivery_ratio", "avg_cost", "avg_cost_data_only"]


class AggregationError(ValueError):
    pass


@dataclass
class RunSummary:
    interests_issued: int = 0
    interests_satisfied: int = 0
    latency_samples: list[float] = field(default_factory=list)
    bundles_created: int = 0
    bundles_delivered: int = 0
    transmissions: int = 0
    data_transmissions: int = 0
    seed: int = 0
    config: dict = field(default_factory=dict)

    def check(self) -> None:
        assert 0 <= self.interests_satisfied <= self.interests_issued
        assert 0 <= self.bundles_delivered <= self.bundles_created
        assert len(self.latency_samples) == self.interests_satisfied
        assert self.transmissions >= self.data_transmissions >= 0


class MetricsSink:
    """Collects per-run counters while the event loop runs.

    An issued interest can be satisfied until ``patience`` seconds after
    issue (interest lifetime plus response lifetime).
    """

    def __init__(self, patience: float = math.inf) -> None:
        self.patience = patience
        self.summary = RunSummary()
        # requester -> name -> issue times still waiting for content
        self.pending: dict[str, dict[str, list[float]]] = {}
        self._created: set[str] = set()
        self._delivered: set[str] = set()

    def issued(self, requester: str, name: str, now: float) -> None:
        self.summary.interests_issued += 1
        self.pending.setdefault(requester, {}).setdefault(name, []).append(now)

    def content_received(self, requester: str, name: str, now: float) -> int:
        """Satisfy every pending interest of ``requester`` for ``name``."""
        waiting = self.pending.get(requester, {}).pop(name, [])
        n = 0
        for t in waiting:
            if now - t <= self.patience:
                self.summary.interests_satisfied += 1
                self.summary.latency_samples.append(now - t)
                n += 1
        return n

    def created(self, bundle_id: str) -> None:
        if bundle_id not in self._created:
            self._created.add(bundle_id)
            self.summary.bundles_created += 1

    def delivered(self, bundle_id: str) -> None:
        if bundle_id in self._created and bundle_id not in self._delivered:
            self._delivered.add(bundle_id)
            self.summary.bundles_delivered += 1

    def transmitted(self, is_response: bool) -> None:
        self.summary.transmissions += 1
        if is_response:
            self.summary.data_transmissions += 1


def _ratio(num: float, den: float) -> float:
    return num / den if den else NAN


def finalize(s: RunSummary) -> dict[str, float]:
    lat = s.latency_samples
    return {
        "response_ratio": _ratio(s.interests_satisfied, s.interests_issued),
        "avg_latency_s": math.fsum(lat) / len(lat) if lat else NAN,
        "delivery_ratio": _ratio(s.bundles_delivered, s.bundles_created),
        "avg_cost": _ratio(s.transmissions, s.interests_satisfied),
        "avg_cost_data_only": _ratio(s.data_transmissions, s.interests_satisfied),
    }


def run_row(s: RunSummary, point: int = 0) -> dict:
    m = finalize(s)
    row = {"seed": s.seed}
    row.update({k: s.config.get(k, "") for k in CONFIG_COLUMNS})
    row.update(
        issued=s.interests_issued,
        satisfied=s.interests_satisfied,
        transmissions=s.transmissions,
        data_transmissions=s.data_transmissions,
        created=s.bundles_created,
        delivered=s.bundles_delivered,
        point=point,
    )
    row.update(m)
    return row


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def write_rows(path: str | Path, rows: Iterable[dict], columns: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c, "")) for c in columns])


def read_rows(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@dataclass
class Aggregate:
    n_runs: int
    mean: dict[str, float]
    sd: dict[str, float]
    excluded: dict[str, int]


def aggregate_values(per_run: Sequence[dict[str, float]], metrics: Sequence[str] = METRICS) -> Aggregate:
    if not per_run:
        raise AggregationError("nothing to aggregate")
    mean, sd, excluded = {}, {}, {}
    for m in metrics:
        vals = [float(r[m]) for r in per_run]
        ok = [v for v in vals if not math.isnan(v)]
        excluded[m] = len(vals) - len(ok)
        mean[m] = statistics.fmean(ok) if ok else NAN
        sd[m] = statistics.stdev(ok) if len(ok) > 1 else (0.0 if ok else NAN)
    return Aggregate(len(per_run), mean, sd, excluded)


def aggregate(runs: Sequence[RunSummary]) -> Aggregate:
    """Mean and sample sd per metric over runs that differ only by seed."""
    if not runs:
        raise AggregationError("nothing to aggregate")
    ref = {k: v for k, v in runs[0].config.items() if k != "seed"}
    for r in runs[1:]:
        if {k: v for k, v in r.config.items() if k != "seed"} != ref:
            raise AggregationError("runs have different configurations")
    return aggregate_values([finalize(r) for r in runs])


def aggregate_columns() -> list[str]:
    cols = CONFIG_COLUMNS + ["point", "n_runs"]
    for m in METRICS:
        cols += [f"{m}_mean", f"{m}_sd", f"{m}_excluded"]
    return cols


def aggregate_rows(rows: Sequence[dict]) -> list[dict]:
    """Group per-run CSV rows by sweep point and average their metrics."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        key = (str(row.get("point", 0)),) + tuple(str(row[c]) for c in CONFIG_COLUMNS)
        groups.setdefault(key, []).append(row)
    out = []
    for key, members in groups.items():
        agg = aggregate_values(members)
        row = {c: members[0][c] for c in CONFIG_COLUMNS}
        row["point"] = members[0].get("point", 0)
        row["n_runs"] = agg.n_runs
        row["sweep"] = members[0].get("sweep", "")
        for m in METRICS:
            row[f"{m}_mean"] = agg.mean[m]
            row[f"{m}_sd"] = agg.sd[m]
            row[f"{m}_excluded"] = agg.excluded[m]
        out.append(row)
    out.sort(key=lambda r: int(r["point"]))
    return out


def mean_of(rows: Sequence[dict], metric: str) -> Optional[float]:
    vals = [float(r[metric]) for r in rows if not math.isnan(float(r[metric]))]
    return statistics.fmean(vals) if vals else None

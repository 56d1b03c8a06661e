import math

import pytest

from cidor_sim.metrics import (
    RUN_COLUMNS,
    AggregationError,
    MetricsSink,
    RunSummary,
    aggregate,
    aggregate_rows,
    aggregate_values,
    finalize,
    read_rows,
    run_row,
    write_rows,
)


def summary(issued=5, satisfied=4, tx=30, lat=None, created=10, delivered=6, cfg=None):
    lat = lat if lat is not None else [10.0] * satisfied
    return RunSummary(issued, satisfied, lat, created, delivered, tx, 0, config=cfg or {"router": "snw"})


def test_finalize_examples():
    m = finalize(summary(lat=[10.0, 30.0, 20.0, 20.0]))
    assert m["response_ratio"] == 0.8
    assert m["avg_cost"] == 7.5
    assert m["avg_latency_s"] == 20.0
    assert m["delivery_ratio"] == 0.6


def test_finalize_empty_run_is_nan():
    m = finalize(RunSummary())
    assert all(math.isnan(v) for v in m.values())


def test_aggregate_identical_runs():
    agg = aggregate([summary() for _ in range(10)])
    assert agg.sd["response_ratio"] == 0.0
    assert agg.mean["avg_cost"] == 7.5


def test_aggregate_mean():
    agg = aggregate([summary(issued=5, satisfied=4), summary(issued=4, satisfied=4)])
    assert agg.mean["response_ratio"] == pytest.approx(0.9)


def test_aggregate_excludes_nan():
    runs = [summary() for _ in range(9)] + [summary(issued=0, satisfied=0, tx=0, lat=[], created=0, delivered=0)]
    agg = aggregate(runs)
    assert agg.excluded["response_ratio"] == 1
    assert agg.mean["response_ratio"] == 0.8
    assert agg.n_runs == 10


def test_aggregate_rejects_mixed_configs():
    with pytest.raises(AggregationError):
        aggregate([summary(cfg={"router": "snw"}), summary(cfg={"router": "epidemic"})])
    with pytest.raises(AggregationError):
        aggregate([])


def test_sink_satisfies_all_pending_once():
    sink = MetricsSink(patience=1000)
    sink.issued("R", "X", 0)
    sink.issued("R", "X", 100)
    sink.issued("Q", "X", 50)
    assert sink.content_received("R", "X", 150) == 2
    assert sink.content_received("R", "X", 160) == 0
    assert sorted(sink.summary.latency_samples) == [50, 150]


def test_sink_patience():
    sink = MetricsSink(patience=1000)
    sink.issued("R", "X", 0)
    assert sink.content_received("R", "X", 1001) == 0


def test_sink_counts_bundles_once():
    sink = MetricsSink()
    sink.created("a")
    sink.created("a")
    sink.delivered("a")
    sink.delivered("a")
    sink.delivered("never-created")
    assert (sink.summary.bundles_created, sink.summary.bundles_delivered) == (1, 1)


def test_csv_round_trip(tmp_path):
    rows = [run_row(summary(cfg={"router": "snw", "dist": "zipf"}), point=p) for p in (0, 0, 1)]
    rows[1]["seed"] = 2
    write_rows(tmp_path / "r.csv", rows, RUN_COLUMNS)
    back = read_rows(tmp_path / "r.csv")
    assert [r["point"] for r in back] == ["0", "0", "1"]
    agg = aggregate_rows(back)
    assert [a["n_runs"] for a in agg] == [2, 1]
    assert aggregate_values(back).mean["avg_cost"] == 7.5

import io

import numpy as np
import pytest

from cidor_sim.engine import make_node
from cidor_sim.routing import Router
from cidor_sim.sim import LinkModel, World

ACCEPTANCE_LINES: list[str] = []


def node(eid, *, buffer=64_000_000, opp=16_000_000, cidor=True, content=None):
    n = make_node(eid, buffer_bytes=buffer, opp_cache_bytes=opp, retention=500.0, cidor_enabled=cidor)
    for name, size in (content or {}).items():
        n.cs[name] = size
    return n


def scripted_world(nodes, router="epidemic", *, copies=10, rate=2_500_000.0, duration=1000.0,
                   ttl=500.0, interest_size=1000, seed=0, trace=True):
    buf = io.StringIO() if trace else None
    w = World(nodes, Router.parse(router, copies), LinkModel(100.0, rate), seed=seed,
              duration=duration, ttl=ttl, interest_size=interest_size, trace=buf,
              check_invariants=True)
    return w, buf


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

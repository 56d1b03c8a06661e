"""Random Waypoint and Shortest-Path Map-Based movement."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

Point = tuple[float, float]

BUILTIN_MAP = "builtin:grid"


class MapError(ValueError):
    pass


@dataclass
class MapGraph:
    ids: list[str]
    coords: np.ndarray  # (n, 2) meters
    edges: list[tuple[int, int]]
    poi_groups: dict[str, tuple[list[int], list[float]]] = field(default_factory=dict)

    def __post_init__(self):
        self.index = {v: i for i, v in enumerate(self.ids)}
        n = len(self.ids)
        rows, cols, w = [], [], []
        for a, b in self.edges:
            d = float(np.hypot(*(self.coords[a] - self.coords[b])))
            if not d > 0:
                raise MapError(f"edge {self.ids[a]}-{self.ids[b]} has zero length")
            rows += [a, b]
            cols += [b, a]
            w += [d, d]
        graph = csr_matrix((w, (rows, cols)), shape=(n, n))
        if n and connected_components(graph, directed=False)[0] != 1:
            raise MapError("map graph is not connected")
        self.dist, self._pred = dijkstra(graph, directed=False, return_predecessors=True)
        for name, (_, weights) in self.poi_groups.items():
            if not math.isclose(sum(weights), 1.0, abs_tol=1e-9):
                raise MapError(f"POI group {name!r} weights sum to {sum(weights)}")

    def __len__(self) -> int:
        return len(self.ids)

    def shortest_path(self, src: int, dst: int) -> list[int]:
        if src == dst:
            return [src]
        path = [dst]
        while path[-1] != src:
            prev = int(self._pred[src, path[-1]])
            assert prev >= 0, "unreachable vertex on a connected map"
            path.append(prev)
        return path[::-1]

    def point(self, v: int) -> Point:
        x, y = self.coords[v]
        return float(x), float(y)

    @property
    def group_names(self) -> list[str]:
        return sorted(self.poi_groups)


def parse_map(text: str) -> MapGraph:
    """Parse ``V id x y`` / ``E a b`` / ``POI group id weight`` lines."""
    ids: list[str] = []
    coords: list[Point] = []
    index: dict[str, int] = {}
    edges: list[tuple[int, int]] = []
    raw_poi: dict[str, list[tuple[str, float]]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "V" and len(parts) == 4:
                if parts[1] in index:
                    raise MapError(f"line {lineno}: duplicate vertex {parts[1]}")
                index[parts[1]] = len(ids)
                ids.append(parts[1])
                coords.append((float(parts[2]), float(parts[3])))
            elif parts[0] == "E" and len(parts) == 3:
                edges.append((index[parts[1]], index[parts[2]]))
            elif parts[0] == "POI" and len(parts) == 4:
                raw_poi.setdefault(parts[1], []).append((parts[2], float(parts[3])))
            else:
                raise MapError(f"line {lineno}: cannot parse {line!r}")
        except KeyError as exc:
            raise MapError(f"line {lineno}: unknown vertex {exc.args[0]}") from None
        except ValueError as exc:
            if isinstance(exc, MapError):
                raise
            raise MapError(f"line {lineno}: {exc}") from None
    if not ids:
        raise MapError("map has no vertices")
    poi = {}
    for name, members in raw_poi.items():
        try:
            verts = [index[v] for v, _ in members]
        except KeyError as exc:
            raise MapError(f"POI group {name}: unknown vertex {exc.args[0]}") from None
        poi[name] = (verts, [w for _, w in members])
    return MapGraph(ids, np.array(coords, dtype=float).reshape(-1, 2), edges, poi)


def load_map(path: str | Path) -> MapGraph:
    if str(path) == BUILTIN_MAP:
        text = resources.files("cidor_sim").joinpath("data/grid.map").read_text()
        return parse_map(text)
    return parse_map(Path(path).read_text())


def grid_map_text(cells: int = 10, spacing: float = 450.0, poi_len: int = 2) -> str:
    """Square grid with one POI group per corner.

    A group is the corner vertex plus the next ``poi_len - 1`` vertices
    along the boundary street running east or west from it.
    """
    n = cells + 1
    lines = [f"# {cells}x{cells} cell grid, {spacing:g} m spacing"]
    vid = lambda r, c: f"v{r * n + c}"  # noqa: E731
    for r in range(n):
        for c in range(n):
            lines.append(f"V {vid(r, c)} {c * spacing:g} {r * spacing:g}")
    for r in range(n):
        for c in range(n):
            if c + 1 < n:
                lines.append(f"E {vid(r, c)} {vid(r, c + 1)}")
            if r + 1 < n:
                lines.append(f"E {vid(r, c)} {vid(r + 1, c)}")
    corners = {"sw": (0, 0, 1), "se": (0, n - 1, -1), "nw": (n - 1, 0, 1), "ne": (n - 1, n - 1, -1)}
    for name, (r, c, step) in corners.items():
        members = [vid(r, c + k * step) for k in range(poi_len)]
        w = 1.0 / len(members)
        lines += [f"POI {name} {v} {w!r}" for v in members]
    return "\n".join(lines) + "\n"


# -- movement ----------------------------------------------------------------


@dataclass
class MobilityState:
    """One movement leg: walk ``points`` from ``t0`` at ``speed``, then pause."""

    points: list[Point]
    speed: float
    t0: float
    pause_until: float
    vertex: Optional[int] = None  # map vertex at the end of the leg

    @property
    def length(self) -> float:
        return sum(math.dist(p, q) for p, q in zip(self.points, self.points[1:]))

    @property
    def arrival(self) -> float:
        return self.t0 + (self.length / self.speed if self.speed > 0 else 0.0)

    def segments(self):
        """(t_start, x0, y0, vx, vy, t_end) pieces, the final pause included."""
        t = self.t0
        for (x0, y0), (x1, y1) in zip(self.points, self.points[1:]):
            d = math.hypot(x1 - x0, y1 - y0)
            if d == 0:
                continue
            dt = d / self.speed
            yield (t, x0, y0, (x1 - x0) / dt, (y1 - y0) / dt, t + dt)
            t += dt
        x, y = self.points[-1]
        yield (t, x, y, 0.0, 0.0, max(t, self.pause_until))


def position_at(state: MobilityState, t: float) -> Point:
    travelled = max(0.0, t - state.t0) * state.speed
    pts = state.points
    for p, q in zip(pts, pts[1:]):
        d = math.dist(p, q)
        if travelled <= d:
            if d == 0:
                return p
            f = travelled / d
            return (p[0] + f * (q[0] - p[0]), p[1] + f * (q[1] - p[1]))
        travelled -= d
    return pts[-1]


def _uniform(rng, lo: float, hi: float) -> float:
    return float(lo) if hi <= lo else float(rng.uniform(lo, hi))


def next_waypoint_rwp(
    state: MobilityState,
    rng,
    area: tuple[float, float],
    speed_range: tuple[float, float],
    pause_range: tuple[float, float],
) -> MobilityState:
    start = state.points[-1]
    t0 = state.pause_until
    dest = (_uniform(rng, 0.0, area[0]), _uniform(rng, 0.0, area[1]))
    speed = _uniform(rng, *speed_range)
    pause = _uniform(rng, *pause_range)
    leg = MobilityState([start, dest], speed, t0, t0)
    leg.pause_until = leg.arrival + pause
    return leg


def next_waypoint_spmb(
    state: MobilityState,
    rng,
    graph: MapGraph,
    poi_prob: float,
    speed_range: tuple[float, float],
    pause_range: tuple[float, float],
    group: Optional[str] = None,
    max_draws: int = 64,
) -> MobilityState:
    """Walk the shortest path to a POI of ``group`` (with ``poi_prob``) or any vertex."""
    here = state.vertex
    t0 = state.pause_until
    if here is None:
        raise ValueError("map-based movement must start on a vertex")
    dest = here
    for _ in range(max_draws):
        if group is not None and group in graph.poi_groups and rng.random() < poi_prob:
            verts, weights = graph.poi_groups[group]
            dest = verts[int(rng.choice(len(verts), p=weights))]
        else:
            dest = int(rng.integers(len(graph)))
        if dest != here:
            break
    speed = _uniform(rng, *speed_range)
    pause = _uniform(rng, *pause_range)
    points = [graph.point(v) for v in graph.shortest_path(here, dest)]
    leg = MobilityState(points, speed, t0, t0, vertex=dest)
    leg.pause_until = leg.arrival + pause
    return leg


def stationary(point: Point, t0: float = 0.0, until: float = math.inf, vertex=None) -> MobilityState:
    return MobilityState([point], 1.0, t0, until, vertex)


@dataclass
class MovementModel:
    """Generates successive legs for every node of a run."""

    kind: str  # "rwp" | "spmb"
    speed_range: tuple[float, float] = (0.5, 1.5)
    pause_range: tuple[float, float] = (0.0, 120.0)
    area: tuple[float, float] = (4500.0, 4500.0)
    graph: Optional[MapGraph] = None
    poi_prob: Sequence[float] = (0.8,)

    def initial(self, rng, node: int) -> MobilityState:
        if self.kind == "rwp":
            p = (_uniform(rng, 0.0, self.area[0]), _uniform(rng, 0.0, self.area[1]))
            return stationary(p, 0.0, 0.0)
        v = int(rng.integers(len(self.graph)))
        return stationary(self.graph.point(v), 0.0, 0.0, vertex=v)

    def group_of(self, node: int) -> Optional[str]:
        if self.graph is None or not self.graph.poi_groups:
            return None
        names = self.graph.group_names
        return names[node % len(names)]

    def next_leg(self, state: MobilityState, rng, node: int) -> MobilityState:
        if self.kind == "rwp":
            leg = next_waypoint_rwp(state, rng, self.area, self.speed_range, self.pause_range)
        else:
            probs = self.poi_prob
            leg = next_waypoint_spmb(
                state,
                rng,
                self.graph,
                probs[node % len(probs)],
                self.speed_range,
                self.pause_range,
                self.group_of(node),
            )
        if leg.pause_until <= leg.t0:
            # zero-length leg with no pause: hold still for a moment
            leg.pause_until = leg.t0 + 1.0
        return leg

"""Scenario configuration: flat ``key=value`` text with dotted section prefixes.

Defaults follow the evaluation setup (86400 s runs, 5 requesters, 35
intermediates, 10 producers, 64 MB buffers, 500 s TTL, 100 m / 2500 kbps
links).
"""
from __future__ import annotations

from pathlib import Path
from typing import Any, Callable, Iterable, Mapping

from .mobility import BUILTIN_MAP


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    vals = tuple(float(v) for v in text.split(",") if v.strip())
    if not vals:
        raise ValueError("empty list")
    return vals


def _str(text: str) -> str:
    return text.strip()


SCHEMA: dict[str, tuple[Callable[[str], Any], Any]] = {
    "duration_s": (float, 86400.0),
    "seed": (int, 1),
    "nodes.requesters": (int, 5),
    "nodes.intermediates": (int, 35),
    "nodes.intermediates_cidor": (_bool, True),
    "buffer_mb": (float, 64.0),
    "opp_cache_mb": (float, 16.0),
    "ttl_s": (float, 500.0),
    "link.range_m": (float, 100.0),
    "link.rate_bps": (float, 2_500_000.0),
    "router": (_str, "epidemic"),
    "snw.copies": (int, 10),
    "epsw.copies": (int, 10),
    "mobility": (_str, "spmb"),
    "mobility.map": (_str, BUILTIN_MAP),
    "mobility.speed_min": (float, 0.5),
    "mobility.speed_max": (float, 1.5),
    "mobility.pause_min": (float, 0.0),
    "mobility.pause_max": (float, 120.0),
    "mobility.poi_prob": (_floats, (1.0,)),
    "mobility.area_w": (float, 4500.0),
    "mobility.area_h": (float, 4500.0),
    "mobility.tick_s": (float, 1.0),
    "workload.catalog_size": (int, 100),
    "workload.dist": (_str, "zipf"),
    "workload.zipf_s": (float, 1.0),
    "workload.zipf_c": (float, 0.2),
    "workload.renormalize": (_bool, True),
    "workload.range_max": (int, 1000),
    "workload.jitter_sd": (float, 0.1),
    "workload.interval_s": (float, 100.0),
    "workload.producers": (int, 10),
    "workload.items_per_producer": (int, 100),
    "workload.interest_size": (int, 1000),
    "workload.content_min": (int, 500_000),
    "workload.content_max": (int, 1_000_000),
    "processed.capacity": (int, 10_000),
    "processed.retention_s": (float, 0.0),  # 0 -> use ttl_s
}

ROUTERS = ("epidemic", "snw", "firstcontact", "epsw")
MOBILITY = ("spmb", "rwp", "none")


def _render(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_render(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


class ScenarioConfig(Mapping):
    """Validated scenario parameters with every default filled in."""

    def __init__(self, values: Mapping[str, Any] | None = None, base_dir: Path | None = None):
        merged = {k: default for k, (_, default) in SCHEMA.items()}
        for key, value in (values or {}).items():
            if key not in SCHEMA:
                raise ConfigError(key, "unknown key")
            parse = SCHEMA[key][0]
            if isinstance(value, str):
                try:
                    value = parse(value)
                except ValueError as exc:
                    raise ConfigError(key, str(exc)) from None
            merged[key] = value
        self._values = merged
        self.base_dir = base_dir
        self._validate()

    def __getitem__(self, key: str) -> Any:
        return self._values[key]

    def __iter__(self):
        return iter(self._values)

    def __len__(self) -> int:
        return len(self._values)

    def replace(self, **changes) -> "ScenarioConfig":
        vals = dict(self._values)
        vals.update({k.replace("__", "."): v for k, v in changes.items()})
        return ScenarioConfig(vals, self.base_dir)

    def with_values(self, changes: Mapping[str, Any]) -> "ScenarioConfig":
        vals = dict(self._values)
        vals.update(changes)
        return ScenarioConfig(vals, self.base_dir)

    @property
    def retention(self) -> float:
        return self["processed.retention_s"] or self["ttl_s"]

    def map_path(self) -> str:
        path = self["mobility.map"]
        if path == BUILTIN_MAP or self.base_dir is None or Path(path).is_absolute():
            return path
        return str(self.base_dir / path)

    def dumps(self) -> str:
        return "".join(f"{k}={_render(v)}\n" for k, v in self._values.items())

    def echo(self) -> dict[str, Any]:
        """The identifying columns written into result rows."""
        return {
            "router": self["router"],
            "dist": self["workload.dist"],
            "buffer_mb": _render(self["buffer_mb"]),
            "ttl_s": _render(self["ttl_s"]),
            "producers": self["workload.producers"],
            "items_per_producer": self["workload.items_per_producer"],
        }

    def _validate(self) -> None:
        v = self._values
        for key in ("nodes.requesters", "nodes.intermediates", "workload.producers",
                    "workload.items_per_producer"):
            if v[key] < 0:
                raise ConfigError(key, "must be >= 0")
        if v["nodes.requesters"] < 1:
            raise ConfigError("nodes.requesters", "a run needs at least one requester")
        for key in ("buffer_mb", "ttl_s", "link.range_m", "link.rate_bps", "workload.interval_s",
                    "mobility.tick_s", "workload.interest_size", "workload.content_min"):
            if not v[key] > 0:
                raise ConfigError(key, "must be > 0")
        if v["duration_s"] < 0:
            raise ConfigError("duration_s", "must be >= 0")
        if v["opp_cache_mb"] < 0:
            raise ConfigError("opp_cache_mb", "must be >= 0")
        if v["router"] not in ROUTERS:
            raise ConfigError("router", f"expected one of {', '.join(ROUTERS)}")
        for key in ("snw.copies", "epsw.copies"):
            if v[key] < 1:
                raise ConfigError(key, "must be >= 1")
        if v["mobility"] not in MOBILITY:
            raise ConfigError("mobility", f"expected one of {', '.join(MOBILITY)}")
        if not 0 < v["mobility.speed_min"] <= v["mobility.speed_max"]:
            raise ConfigError("mobility.speed_min", "need 0 < speed_min <= speed_max")
        if not 0 <= v["mobility.pause_min"] <= v["mobility.pause_max"]:
            raise ConfigError("mobility.pause_min", "need 0 <= pause_min <= pause_max")
        if any(not 0 <= p <= 1 for p in v["mobility.poi_prob"]):
            raise ConfigError("mobility.poi_prob", "probabilities must lie in [0, 1]")
        if v["workload.dist"] not in ("zipf", "uniform"):
            raise ConfigError("workload.dist", "expected zipf or uniform")
        if v["workload.catalog_size"] < 1:
            raise ConfigError("workload.catalog_size", "must be >= 1")
        if v["workload.catalog_size"] > v["workload.range_max"]:
            raise ConfigError("workload.catalog_size", "exceeds workload.range_max")
        if v["workload.items_per_producer"] > v["workload.catalog_size"]:
            raise ConfigError("workload.items_per_producer", "exceeds workload.catalog_size")
        if v["workload.content_max"] < v["workload.content_min"]:
            raise ConfigError("workload.content_max", "below workload.content_min")
        if v["workload.jitter_sd"] < 0:
            raise ConfigError("workload.jitter_sd", "must be >= 0")
        if v["processed.capacity"] < 1:
            raise ConfigError("processed.capacity", "must be >= 1")
        if v["mobility"] == "spmb":
            path = self.map_path()
            if path != BUILTIN_MAP and not Path(path).is_file():
                raise ConfigError("mobility.map", f"file not found: {path}")


def parse_text(text: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}", f"expected key=value, got {raw.strip()!r}")
        values[key] = value.strip()
    return values


def load_config(path: str | Path, overrides: Mapping[str, Any] | None = None) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    values: dict[str, Any] = parse_text(text)
    values.update(overrides or {})
    return ScenarioConfig(values, base_dir=path.parent)


def parse_vary(specs: Iterable[str]) -> list[tuple[str, list[str]]]:
    """``KEY=V1,V2,...`` sweep specs; list values use ``;`` between points."""
    out = []
    for spec in specs:
        key, sep, values = spec.partition("=")
        key = key.strip()
        if not sep or not values.strip():
            raise ConfigError(key or spec, "expected KEY=V1,V2,...")
        if key not in SCHEMA:
            raise ConfigError(key, "unknown sweep key")
        sep_char = ";" if SCHEMA[key][0] is _floats else ","
        out.append((key, [v.strip() for v in values.split(sep_char) if v.strip()]))
    return out

"""Scenario files: sectioned key-value text, schema validation, defaults, echo.

Sections: [graph] [mobility] [phy] [mac] [routing] [traffic] [run]. Every key is
optional; defaults reproduce the reference experimental frame (100 vehicles,
1000x1000 m grid, 100 s, 40 CBR flows at 4 pkt/s x 512 B, 6 Mbps 802.11p,
Nakagami fading calibrated to 250 m). The full schema is documented in the README.
"""

import configparser
import io
import math
from dataclasses import dataclass, field, fields, replace

from .roadnet import Edge, GraphError, RoadGraph, TrafficLight, Vertex, generate_grid

PROTOCOLS = ("aodv", "aomdv", "dsdv", "olsr")
MOBILITY_MODELS = ("idm-im", "idm-lc")


class SchemaError(ValueError):
    """Scenario file violates the schema; message names the key and line."""


@dataclass
class GraphConfig:
    grid: tuple[int, int, float] | None = (5, 5, 250.0)   # rows cols spacing
    vertices: list[tuple[str, float, float]] = field(default_factory=list)
    edges: list[tuple[str, str, int]] = field(default_factory=list)
    lanes: int = 2
    speed_limit: float = 80 / 3.6
    phase_length: float = 10.0


@dataclass
class MobilityConfig:
    model: str = "idm-im"
    a_max: float = 0.6           # maximal acceleration, m/s^2
    b: float = 0.9               # comfortable deceleration, m/s^2
    s0: float = 1.0              # jam distance, m
    headway: float = 0.5         # safe time headway, s
    vehicle_length: float = 5.0
    visibility: float = 200.0
    recalc_step: float = 1.0     # lane-change / reporting grid, s
    integration_dt: float = 0.1
    v_min_kmh: float = 10.0
    v_max_kmh: float = 80.0
    politeness: float = 0.5
    accel_threshold: float = 0.5
    safe_decel_limit: float | None = None    # defaults to b
    min_stay: float = 2.0
    max_stay: float = 6.0


@dataclass
class PhyConfig:
    m0: float = 1.5
    m1: float = 0.75
    m2: float = 0.75
    d0_m: float = 80.0
    d1_m: float = 200.0
    gamma0: float = 1.9
    gamma1: float = 3.8
    gamma2: float = 3.8
    d0_g: float = 200.0
    d1_g: float = 500.0
    ref_distance: float = 1.0
    frequency: float = 5.9e9
    rx_threshold: float = -82.0          # dBm
    carrier_sense_threshold: float = -92.0
    target_range: float = 250.0
    capture_margin: float = 10.0         # dB
    loss_model: str = "nakagami"         # nakagami | ideal
    collisions: bool = True


@dataclass
class MacConfig:
    bitrate: float = 6e6
    slot: float = 13e-6
    sifs: float = 32e-6
    cw_min: int = 15
    cw_max: int = 1023
    retry_limit: int = 7
    queue_capacity: int = 50
    phy_overhead: float = 40e-6
    mac_overhead: int = 34

    @property
    def difs(self) -> float:
        return self.sifs + 2 * self.slot


@dataclass
class RoutingConfig:
    protocol: str = "aodv"
    ttl: int = 64
    buffer_packets: int = 64       # reactive send buffer, per destination
    buffer_timeout: float = 30.0
    aodv_route_timeout: float = 3.0
    aodv_rreq_retries: int = 2
    aodv_ring_ttls: tuple[int, ...] = (1, 3, 7)
    aodv_node_traversal: float = 0.04
    aomdv_max_paths: int = 3
    dsdv_full_dump_interval: float = 15.0
    dsdv_settling_time: float = 6.0
    dsdv_trigger_min_gap: float = 1.0
    olsr_hello_interval: float = 2.0
    olsr_tc_interval: float = 5.0
    hold_multiplier: float = 3.0


@dataclass
class TrafficConfig:
    cbr_connections: int = 40
    packet_size: int = 512
    rate: float = 4.0
    cbr_start: float = 0.0
    cbr_stop: float | None = None        # defaults to run duration
    beacon_interval: float = 0.1
    beacon_size: int = 200
    emergency_decel: float = 2.7         # m/s^2 deceleration magnitude triggering a beacon
    emergency_rate_limit: float = 1.0    # min seconds between emergency beacons per vehicle


@dataclass
class RunConfig:
    duration: float = 100.0
    seed: int = 1
    vehicles: int = 100
    mobility_trace: bool = False


@dataclass
class ScenarioConfig:
    graph: GraphConfig = field(default_factory=GraphConfig)
    mobility: MobilityConfig = field(default_factory=MobilityConfig)
    phy: PhyConfig = field(default_factory=PhyConfig)
    mac: MacConfig = field(default_factory=MacConfig)
    routing: RoutingConfig = field(default_factory=RoutingConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def build_graph(self) -> RoadGraph:
        g = self.graph
        if g.vertices or g.edges:
            if not (g.vertices and g.edges):
                raise SchemaError("inline graphs need both 'vertices' and 'edges' keys")
            verts = [Vertex(vid, x, y) for vid, x, y in g.vertices]
            coords = {v.id: v for v in verts}
            edges = []
            for src, dst, lanes in g.edges:
                for vid in (src, dst):
                    if vid not in coords:
                        raise SchemaError(f"edge references unknown vertex '{vid}'")
                a, b = coords[src], coords[dst]
                length = math.hypot(b.x - a.x, b.y - a.y)
                edges.append(Edge(f"{src}>{dst}", src, dst, lanes, length, g.speed_limit))
            return RoadGraph(verts, edges).validate()
        rows, cols, spacing = g.grid
        return generate_grid(rows, cols, spacing, g.lanes, g.speed_limit, g.phase_length)

    def validate(self):
        m = self.mobility
        if m.model not in MOBILITY_MODELS:
            raise SchemaError(f"mobility.model '{m.model}' not one of {MOBILITY_MODELS}")
        for name in ("a_max", "b", "s0", "headway", "vehicle_length", "visibility",
                     "recalc_step", "integration_dt"):
            if getattr(m, name) <= 0:
                raise SchemaError(f"mobility.{name} must be positive")
        if not 0 <= m.politeness <= 1:
            raise SchemaError("mobility.politeness must lie in [0, 1]")
        if m.accel_threshold < 0:
            raise SchemaError("mobility.accel_threshold must be >= 0")
        if not 0 < m.v_min_kmh <= m.v_max_kmh:
            raise SchemaError("mobility speed band requires 0 < v_min_kmh <= v_max_kmh")
        if m.min_stay > m.max_stay or m.min_stay < 0:
            raise SchemaError("mobility stay bounds require 0 <= min_stay <= max_stay")
        steps = m.recalc_step / m.integration_dt
        if abs(steps - round(steps)) > 1e-9 or round(steps) < 1:
            raise SchemaError("mobility.recalc_step must be a multiple of integration_dt")
        p = self.phy
        if not ( p.d0_m < p.d1_m and p.d0_g < p.d1_g):
            raise SchemaError("phy band thresholds must be strictly increasing")
        if min(p.m0, p.m1, p.m2) <= 0 or min(p.gamma0, p.gamma1, p.gamma2) <= 0:
            raise SchemaError("phy shape factors and exponents must be positive")
        if p.carrier_sense_threshold > p.rx_threshold:
            raise SchemaError("phy.carrier_sense_threshold must be <= rx_threshold")
        if p.loss_model not in ("nakagami", "ideal"):
            raise SchemaError("phy.loss_model must be 'nakagami' or 'ideal'")
        c = self.mac
        for name in ("cw_min", "cw_max"):
            v = getattr(c, name)
            if v < 0 or (v + 1) & v != 0:
                raise SchemaError(f"mac.{name} must be of the form 2^k - 1")
        if c.cw_min >= c.cw_max:
            raise SchemaError("mac.cw_min must be < cw_max")
        if c.queue_capacity <= 0:
            raise SchemaError("mac.queue_capacity must be positive")
        if self.routing.protocol not in PROTOCOLS:
            raise SchemaError(f"routing.protocol '{self.routing.protocol}' "
                              f"not one of {PROTOCOLS}")
        t = self.traffic
        if t.cbr_connections < 0 or t.packet_size <= 0 or t.rate <= 0:
            raise SchemaError("traffic requires cbr_connections >= 0, packet_size > 0, rate > 0")
        if t.beacon_interval <= 0 or t.beacon_size <= 0:
            raise SchemaError("traffic beacon settings must be positive")
        if self.run.duration <= 0 or self.run.vehicles < 0:
            raise SchemaError("run.duration must be positive and run.vehicles >= 0")
        n = self.run.vehicles
        if t.cbr_connections > n * (n - 1):
            raise SchemaError(f"traffic.cbr_connections={t.cbr_connections} exceeds "
                              f"available ordered pairs for {n} vehicles")
        return self


# ---------------------------------------------------------------------------
# parsing

def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_grid(s: str):
    parts = s.split()
    if len(parts) != 3:
        raise ValueError("grid expects 'rows cols spacing'")
    return (int(parts[0]), int(parts[1]), float(parts[2]))


def _parse_vertices(s: str):
    out = []
    for item in filter(None, (p.strip() for p in s.split(";"))):
        tok = item.split()
        if len(tok) != 3:
            raise ValueError(f"vertex entry '{item}' expects 'id x y'")
        out.append((tok[0], float(tok[1]), float(tok[2])))
    return out


def _parse_edges(s: str):
    out = []
    for item in filter(None, (p.strip() for p in s.split(";"))):
        tok = item.split()
        if len(tok) not in (2, 3):
            raise ValueError(f"edge entry '{item}' expects 'src dst [lanes]'")
        out.append((tok[0], tok[1], int(tok[2]) if len(tok) == 3 else -1))
    return out


def _parse_int_tuple(s: str):
    return tuple(int(x) for x in s.replace(",", " ").split())


_OPT_FLOAT = ("optfloat", float)

# (section, key) -> (config attr path, parser)
_SCHEMA: dict[tuple[str, str], tuple[str, object]] = {
    ("graph", "grid"): ("graph.grid", _parse_grid),
    ("graph", "vertices"): ("graph.vertices", _parse_vertices),
    ("graph", "edges"): ("graph.edges", _parse_edges),
    ("graph", "lanes"): ("graph.lanes", int),
    ("graph", "speed_limit"): ("graph.speed_limit", float),
    ("graph", "phase_length"): ("graph.phase_length", float),
    ("mobility", "model"): ("mobility.model", str),
    ("mobility", "a_max"): ("mobility.a_max", float),
    ("mobility", "b"): ("mobility.b", float),
    ("mobility", "s0"): ("mobility.s0", float),
    ("mobility", "headway"): ("mobility.headway", float),
    ("mobility", "vehicle_length"): ("mobility.vehicle_length", float),
    ("mobility", "visibility"): ("mobility.visibility", float),
    ("mobility", "recalc_step"): ("mobility.recalc_step", float),
    ("mobility", "integration_dt"): ("mobility.integration_dt", float),
    ("mobility", "v_min_kmh"): ("mobility.v_min_kmh", float),
    ("mobility", "v_max_kmh"): ("mobility.v_max_kmh", float),
    ("mobility", "politeness"): ("mobility.politeness", float),
    ("mobility", "accel_threshold"): ("mobility.accel_threshold", float),
    ("mobility", "safe_decel_limit"): ("mobility.safe_decel_limit", float),
    ("mobility", "min_stay"): ("mobility.min_stay", float),
    ("mobility", "max_stay"): ("mobility.max_stay", float),
    ("phy", "m0"): ("phy.m0", float),
    ("phy", "m1"): ("phy.m1", float),
    ("phy", "m2"): ("phy.m2", float),
    ("phy", "d0_m"): ("phy.d0_m", float),
    ("phy", "d1_m"): ("phy.d1_m", float),
    ("phy", "gamma0"): ("phy.gamma0", float),
    ("phy", "gamma1"): ("phy.gamma1", float),
    ("phy", "gamma2"): ("phy.gamma2", float),
    ("phy", "d0_g"): ("phy.d0_g", float),
    ("phy", "d1_g"): ("phy.d1_g", float),
    ("phy", "ref_distance"): ("phy.ref_distance", float),
    ("phy", "frequency"): ("phy.frequency", float),
    ("phy", "rx_threshold"): ("phy.rx_threshold", float),
    ("phy", "carrier_sense_threshold"): ("phy.carrier_sense_threshold", float),
    ("phy", "target_range"): ("phy.target_range", float),
    ("phy", "capture_margin"): ("phy.capture_margin", float),
    ("phy", "loss_model"): ("phy.loss_model", str),
    ("phy", "collisions"): ("phy.collisions", _parse_bool),
    ("mac", "bitrate"): ("mac.bitrate", float),
    ("mac", "slot"): ("mac.slot", float),
    ("mac", "sifs"): ("mac.sifs", float),
    ("mac", "cw_min"): ("mac.cw_min", int),
    ("mac", "cw_max"): ("mac.cw_max", int),
    ("mac", "retry_limit"): ("mac.retry_limit", int),
    ("mac", "queue_capacity"): ("mac.queue_capacity", int),
    ("mac", "phy_overhead"): ("mac.phy_overhead", float),
    ("mac", "mac_overhead"): ("mac.mac_overhead", int),
    ("routing", "protocol"): ("routing.protocol", str),
    ("routing", "ttl"): ("routing.ttl", int),
    ("routing", "buffer_packets"): ("routing.buffer_packets", int),
    ("routing", "buffer_timeout"): ("routing.buffer_timeout", float),
    ("routing", "aodv_route_timeout"): ("routing.aodv_route_timeout", float),
    ("routing", "aodv_rreq_retries"): ("routing.aodv_rreq_retries", int),
    ("routing", "aodv_ring_ttls"): ("routing.aodv_ring_ttls", _parse_int_tuple),
    ("routing", "aodv_node_traversal"): ("routing.aodv_node_traversal", float),
    ("routing", "aomdv_max_paths"): ("routing.aomdv_max_paths", int),
    ("routing", "dsdv_full_dump_interval"): ("routing.dsdv_full_dump_interval", float),
    ("routing", "dsdv_settling_time"): ("routing.dsdv_settling_time", float),
    ("routing", "dsdv_trigger_min_gap"): ("routing.dsdv_trigger_min_gap", float),
    ("routing", "olsr_hello_interval"): ("routing.olsr_hello_interval", float),
    ("routing", "olsr_tc_interval"): ("routing.olsr_tc_interval", float),
    ("routing", "hold_multiplier"): ("routing.hold_multiplier", float),
    ("traffic", "cbr_connections"): ("traffic.cbr_connections", int),
    ("traffic", "packet_size"): ("traffic.packet_size", int),
    ("traffic", "rate"): ("traffic.rate", float),
    ("traffic", "cbr_start"): ("traffic.cbr_start", float),
    ("traffic", "cbr_stop"): ("traffic.cbr_stop", float),
    ("traffic", "beacon_interval"): ("traffic.beacon_interval", float),
    ("traffic", "beacon_size"): ("traffic.beacon_size", int),
    ("traffic", "emergency_decel"): ("traffic.emergency_decel", float),
    ("traffic", "emergency_rate_limit"): ("traffic.emergency_rate_limit", float),
    ("run", "duration"): ("run.duration", float),
    ("run", "seed"): ("run.seed", int),
    ("run", "vehicles"): ("run.vehicles", int),
    ("run", "mobility_trace"): ("run.mobility_trace", _parse_bool),
}


def _key_line(text: str, section: str, key: str) -> int:
    """Best-effort line number of `key` within `section` for diagnostics."""
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1].strip().lower()
        elif current == section and stripped.lower().startswith(key.lower()):
            rest = stripped[len(key):].lstrip()
            if rest.startswith(("=", ":")):
                return lineno
    return 0


def parse_scenario_text(text: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    cfg = base if base is not None else ScenarioConfig()
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise SchemaError(f"scenario parse error: {exc}") from exc
    grid_given = inline_given = False
    for section in parser.sections():
        sec = section.lower()
        for key, raw in parser.items(section):
            spec = _SCHEMA.get((sec, key.lower()))
            line = _key_line(text, sec, key)
            if spec is None:
                raise SchemaError(f"unknown key '{key}' in section [{sec}] (line {line})")
            attr_path, parse = spec
            try:
                value = parse(raw)
            except ValueError as exc:
                raise SchemaError(
                    f"bad value for [{sec}] {key} (line {line}): {exc}") from exc
            obj_name, attr = attr_path.split(".")
            obj = getattr(cfg, obj_name)
            setattr(obj, attr, value)
            if attr_path == "graph.grid":
                grid_given = True
            if attr_path in ("graph.vertices", "graph.edges"):
                inline_given = True
    if inline_given and not grid_given:
        cfg.graph.grid = None
    if inline_given:
        # -1 marks "lanes not given": fill the section default, keep explicit values
        cfg.graph.edges = [(s, d, n if n >= 0 else cfg.graph.lanes)
                           for s, d, n in cfg.graph.edges]
    cfg.validate()
    return cfg


def load_scenario(path) -> tuple[ScenarioConfig, RoadGraph]:
    """Parse and validate a scenario file; returns the config and its road graph."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    cfg = parse_scenario_text(text)
    graph = cfg.build_graph()
    return cfg, graph


def effective_ini(cfg: ScenarioConfig) -> str:
    """Render the complete effective configuration; re-loading it reproduces the run."""
    out = io.StringIO()
    g = cfg.graph
    out.write("[graph]\n")
    if g.vertices or g.edges:
        out.write("vertices = " + "; ".join(f"{v} {x!r} {y!r}" for v, x, y in g.vertices) + "\n")
        out.write("edges = " + "; ".join(f"{s} {d} {n}" for s, d, n in g.edges) + "\n")
    else:
        rows, cols, spacing = g.grid
        out.write(f"grid = {rows} {cols} {spacing!r}\n")
    out.write(f"lanes = {g.lanes}\n")
    out.write(f"speed_limit = {g.speed_limit!r}\n")
    out.write(f"phase_length = {g.phase_length!r}\n")
    for section in ("mobility", "phy", "mac", "routing", "traffic", "run"):
        obj = getattr(cfg, section)
        out.write(f"\n[{section}]\n")
        for f in fields(obj):
            value = getattr(obj, f.name)
            if value is None:
                continue
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, float):
                text = repr(value)
            elif isinstance(value, tuple):
                text = " ".join(str(x) for x in value)
            else:
                text = str(value)
            out.write(f"{f.name} = {text}\n")
    return out.getvalue()

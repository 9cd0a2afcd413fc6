"""Run assembly: build the world, stacks and agents from a scenario and execute it."""

import math
from dataclasses import dataclass, field

import numpy as np

from . import phy
from .agents import CbrAgent, PbcAgent, setup_flows
from .core import RngStreams, Simulator
from .mac import Channel, NodeMac
from .metrics import (EV_DROPPED, EV_RECEIVED, EV_SENT, LAYER_APP, Trace,
                      TraceAggregator, TraceFileWriter)
from .mobility import VehicleWorld
from .packets import BROADCAST, KIND_CBR, KIND_CONTROL, KIND_PBC, Packet, PacketIds
from .roadnet import RoadGraph
from .routing import make_protocol
from .scenario import ScenarioConfig


class StaticPositions:
    """Fixed node placements for protocol-level experiments without mobility."""

    def __init__(self, positions: dict[int, tuple[float, float]]):
        n = max(positions) + 1 if positions else 0
        self._coords = np.zeros((n, 2))
        for node, (x, y) in positions.items():
            self._coords[node] = (x, y)

    def coords(self) -> np.ndarray:
        return self._coords

    def position(self, node: int) -> tuple[float, float]:
        return tuple(self._coords[node])


class NodeStack:
    """Binds one node's MAC and routing protocol to the shared run services."""

    def __init__(self, node_id, sim, channel, mac_params, routing_cfg, trace,
                 rng_mac, rng_routing, packet_ids, ledger):
        self.node_id = node_id
        self.sim = sim
        self.trace = trace
        self.routing_cfg = routing_cfg
        self.rng_routing = rng_routing
        self._packet_ids = packet_ids
        self._ledger = ledger
        self.mac = NodeMac(node_id, sim, channel, mac_params, rng_mac, trace,
                           deliver_cb=self._on_frame,
                           link_break_cb=self._on_link_break,
                           drop_cb=self._on_mac_drop)
        self.routing = make_protocol(routing_cfg.protocol, self)

    # -- id and accounting services -------------------------------------------

    def new_packet_id(self) -> int:
        return self._packet_ids.new()

    def note_data_packet(self, packet):
        if self._ledger is not None:
            self._ledger[packet.packet_id] = packet

    def _settle(self, packet):
        if self._ledger is not None:
            self._ledger.pop(packet.packet_id, None)

    # -- downward path -----------------------------------------------------------

    def send_unicast(self, packet, next_hop: int):
        self.mac.enqueue_packet(packet, next_hop)

    def send_broadcast(self, packet):
        self.mac.enqueue_packet(packet, BROADCAST)

    # -- upward path ---------------------------------------------------------------

    def _on_frame(self, packet, from_node: int):
        if packet.kind == KIND_PBC:
            self.trace.add(self.sim.now, EV_RECEIVED, "none", LAYER_APP, KIND_PBC,
                           packet.packet_id, None, self.node_id, packet.size)
            return
        self.routing.on_packet_arrival(packet, from_node)

    def deliver_local(self, packet):
        self.trace.add(self.sim.now, EV_RECEIVED, "none", LAYER_APP, packet.kind,
                       packet.packet_id, packet.flow_id, self.node_id, packet.size)
        self._settle(packet)

    def drop_packet(self, packet, reason: str, layer: str):
        if packet.kind == KIND_CONTROL:
            return   # lost control packets are not tracked per packet
        self.trace.add(self.sim.now, EV_DROPPED, reason, layer, packet.kind,
                       packet.packet_id, packet.flow_id, self.node_id, packet.size)
        self._settle(packet)

    def _on_mac_drop(self, packet, reason: str):
        # the MAC wrote the trace record; only settle the accounting here
        if packet.kind != KIND_CONTROL:
            self._settle(packet)

    def _on_link_break(self, neighbor: int, packet):
        self.routing.on_link_break(neighbor, packet)


@dataclass
class RunResult:
    aggregator: TraceAggregator
    events: int
    warnings: dict = field(default_factory=dict)
    config: ScenarioConfig | None = None


class Simulation:
    """One deterministic run: mobility + channel + MAC + routing + traffic."""

    def __init__(self, cfg: ScenarioConfig, graph: RoadGraph | None = None,
                 trace_file=None, keep_records: bool = False):
        cfg.validate()
        self.cfg = cfg
        self.graph = graph if graph is not None else cfg.build_graph()
        self.sim = Simulator()
        self.rngs = RngStreams(cfg.run.seed)
        self.trace = Trace(keep_records=keep_records)
        self.aggregator = self.trace.attach(TraceAggregator())
        if trace_file is not None:
            self.trace.attach(TraceFileWriter(trace_file))
        self.packet_ids = PacketIds()
        self.ledger: dict[int, object] = {}

        n = cfg.run.vehicles
        self.world = VehicleWorld(self.graph, cfg.mobility, n,
                                  self.rngs.stream("mobility"),
                                  lane_changes=(cfg.mobility.model == "idm-lc"))

        nak = phy.NakagamiParams(cfg.phy.m0, cfg.phy.m1, cfg.phy.m2,
                                 cfg.phy.d0_m, cfg.phy.d1_m,
                                 cfg.phy.gamma0, cfg.phy.gamma1, cfg.phy.gamma2,
                                 cfg.phy.d0_g, cfg.phy.d1_g,
                                 cfg.phy.ref_distance)
        txp = phy.TxParams(0.0, cfg.phy.frequency, cfg.phy.rx_threshold,
                           cfg.phy.carrier_sense_threshold, cfg.phy.target_range,
                           cfg.phy.capture_margin)
        txp.tx_power = phy.calibrate_range(nak, txp)
        self._coords = np.zeros((n, 2))
        self._refresh_coords()
        self.channel = Channel(self.sim, n, lambda: self._coords, nak, txp,
                               self.rngs.stream("channel"), self.trace,
                               loss_model=cfg.phy.loss_model,
                               collisions=cfg.phy.collisions)

        rng_mac = self.rngs.stream("mac")
        rng_routing = self.rngs.stream("routing")
        self.stacks = [NodeStack(i, self.sim, self.channel, cfg.mac, cfg.routing,
                                 self.trace, rng_mac, rng_routing,
                                 self.packet_ids, self.ledger)
                       for i in range(n)]

        rng_traffic = self.rngs.stream("traffic")
        stop = cfg.traffic.cbr_stop if cfg.traffic.cbr_stop is not None else cfg.run.duration
        self.flows = setup_flows(rng_traffic, cfg.traffic.cbr_connections, range(n),
                                 cfg.traffic.packet_size, cfg.traffic.rate,
                                 cfg.traffic.cbr_start, stop)
        self.cbr_agents = [CbrAgent(self.sim, self.stacks[f.src], f)
                           for f in self.flows]
        phases = rng_traffic.uniform(0.0, cfg.traffic.beacon_interval, size=n)
        self.pbc_agents = [PbcAgent(self.sim, self.stacks[i], self.world,
                                    cfg.traffic, cfg.run.duration, float(phases[i]))
                           for i in range(n)]
        self.world.brake_listeners.append(self._dispatch_brake)
        self.mobility_rows: list[tuple] = []   # (t, vehicle, x, y, speed) on the 1 s grid

    # -- wiring helpers ---------------------------------------------------------

    def _refresh_coords(self):
        for vid, st in self.world.vehicles.items():
            self._coords[vid, 0] = st.x
            self._coords[vid, 1] = st.y

    def _dispatch_brake(self, vehicle_id: int, accel: float, t: float):
        self.pbc_agents[vehicle_id].on_accel(vehicle_id, accel, t)

    def _mobility_tick(self, k: int):
        dt = self.cfg.mobility.integration_dt
        self.world.step(dt)
        self._refresh_coords()
        self.channel.bump_geometry()
        if self.cfg.run.mobility_trace:
            steps_per_report = round(self.cfg.mobility.recalc_step / dt)
            if (k + 1) % steps_per_report == 0:
                t = self.sim.now
                for vid, st in self.world.vehicles.items():
                    self.mobility_rows.append((t, vid, st.x, st.y, st.speed))
        t_next = (k + 1) * dt
        if t_next < self.cfg.run.duration:
            self.sim.schedule(t_next, lambda: self._mobility_tick(k + 1),
                              target="world.step")

    # -- execution -----------------------------------------------------------------

    def run(self) -> RunResult:
        cfg = self.cfg
        if cfg.run.vehicles > 0:
            self.sim.schedule(0.0, lambda: self._mobility_tick(0), target="world.step")
        for stack in self.stacks:
            stack.routing.start()
        for agent in self.cbr_agents:
            agent.start()
        for agent in self.pbc_agents:
            agent.start()
        events = self.sim.run_until(cfg.run.duration)
        self._close()
        warnings = {
            "emergency_brakes": self.world.emergency_warnings,
            "lane_changes": self.world.lane_change_count,
        }
        return RunResult(self.aggregator, events, warnings, cfg)

    def _close(self):
        """Flush packets with no terminal state so conservation holds exactly."""
        now = self.sim.now
        for pid in sorted(self.ledger):
            pkt = self.ledger[pid]
            self.trace.add(now, EV_DROPPED, "none", LAYER_APP, pkt.kind,
                           pkt.packet_id, pkt.flow_id, pkt.src, pkt.size)
        self.ledger.clear()


def run_scenario(cfg: ScenarioConfig, trace_file=None, keep_records=False) -> RunResult:
    return Simulation(cfg, trace_file=trace_file, keep_records=keep_records).run()


class StaticNetwork:
    """Full network stack over fixed node positions (no mobility, no agents).

    The workbench for protocol-level experiments: place nodes, run the clock,
    inject data packets, inspect routing state and the trace.
    """

    def __init__(self, positions: dict[int, tuple[float, float]],
                 cfg: ScenarioConfig | None = None, keep_records: bool = True):
        self.cfg = cfg if cfg is not None else ScenarioConfig()
        self.cfg.run.vehicles = len(positions)
        self.sim = Simulator()
        self.rngs = RngStreams(self.cfg.run.seed)
        self.trace = Trace(keep_records=keep_records)
        self.aggregator = self.trace.attach(TraceAggregator())
        self.packet_ids = PacketIds()
        self.ledger: dict[int, object] = {}
        self.positions = StaticPositions(positions)

        p = self.cfg.phy
        nak = phy.NakagamiParams(p.m0, p.m1, p.m2, p.d0_m, p.d1_m,
                                 p.gamma0, p.gamma1, p.gamma2, p.d0_g, p.d1_g,
                                 p.ref_distance)
        txp = phy.TxParams(0.0, p.frequency, p.rx_threshold,
                           p.carrier_sense_threshold, p.target_range,
                           p.capture_margin)
        txp.tx_power = phy.calibrate_range(nak, txp)
        self.channel = Channel(self.sim, len(positions), self.positions.coords,
                               nak, txp, self.rngs.stream("channel"), self.trace,
                               loss_model=p.loss_model, collisions=p.collisions)
        rng_mac = self.rngs.stream("mac")
        rng_routing = self.rngs.stream("routing")
        self.stacks = [NodeStack(i, self.sim, self.channel, self.cfg.mac,
                                 self.cfg.routing, self.trace, rng_mac, rng_routing,
                                 self.packet_ids, self.ledger)
                       for i in sorted(positions)]

    def start_protocols(self):
        for stack in self.stacks:
            stack.routing.start()

    def send_data(self, src: int, dst: int, size: int = 512, flow_id: int | None = None):
        stack = self.stacks[src]
        pkt = Packet(KIND_CBR, src, dst, size, stack.new_packet_id(), flow_id,
                     self.cfg.routing.ttl, self.sim.now)
        self.trace.add(self.sim.now, EV_SENT, "none", LAYER_APP, KIND_CBR,
                       pkt.packet_id, flow_id, src, size)
        stack.note_data_packet(pkt)
        stack.routing.on_data_to_send(pkt)
        return pkt

    def run_for(self, seconds: float):
        self.sim.run_until(self.sim.now + seconds)

    def close(self):
        now = self.sim.now
        for pid in sorted(self.ledger):
            pkt = self.ledger[pid]
            self.trace.add(now, EV_DROPPED, "none", LAYER_APP, pkt.kind,
                           pkt.packet_id, pkt.flow_id, pkt.src, pkt.size)
        self.ledger.clear()

"""Node-level routing interface and the shared data-forwarding plane."""

from collections import deque

from ..metrics import EV_FORWARDED, LAYER_ROUTING
from ..packets import BROADCAST, KIND_CONTROL, Packet


class RoutingProtocol:
    """Common surface: route lookup, data send/arrival, link-break signal, timers.

    Reactive protocols buffer data pending discovery (bounded per destination);
    proactive protocols drop immediately when the table has no route.
    """

    reactive = False

    def __init__(self, stack):
        self.stack = stack
        self.node_id = stack.node_id
        self.sim = stack.sim
        self.cfg = stack.routing_cfg
        self.buffer: dict[int, deque] = {}      # dest -> deque[(packet, enq time)]

    # -- protocol hooks ------------------------------------------------------

    def start(self):
        """Schedule periodic timers; called once at run start."""

    def route_lookup(self, dest: int):
        raise NotImplementedError

    def on_link_break(self, neighbor: int, packet=None):
        pass

    def on_control(self, packet: Packet, from_node: int):
        raise NotImplementedError

    def begin_discovery(self, dest: int):
        """Reactive protocols start route discovery here."""

    # -- data plane ----------------------------------------------------------

    def on_data_to_send(self, packet: Packet):
        self._route_or_fail(packet, origin=True)

    def on_packet_arrival(self, packet: Packet, from_node: int):
        if packet.kind == KIND_CONTROL:
            self.on_control(packet, from_node)
            return
        self.forward_data(packet, from_node)

    def forward_data(self, packet: Packet, from_node: int | None):
        """Deliver locally, or resolve the next hop and hand the packet to the MAC."""
        if packet.dst == self.node_id:
            self.stack.deliver_local(packet)
            return
        if from_node is not None:
            packet.ttl -= 1
            if packet.ttl <= 0:
                self.stack.drop_packet(packet, "ttl", LAYER_ROUTING)
                return
        self._route_or_fail(packet, origin=from_node is None)

    def _route_or_fail(self, packet: Packet, origin: bool):
        nh = self.route_lookup(packet.dst)
        if nh is None:
            if self.reactive:
                self._buffer_packet(packet, origin)
            else:
                self.stack.drop_packet(packet, "no-route", LAYER_ROUTING)
            return
        if not origin:
            self._trace_forward(packet)
        self.stack.send_unicast(packet, nh)

    def _trace_forward(self, packet: Packet):
        self.stack.trace.add(self.sim.now, EV_FORWARDED, "none", LAYER_ROUTING,
                             packet.kind, packet.packet_id, packet.flow_id,
                             self.node_id, packet.size)

    # -- reactive send buffer --------------------------------------------------

    def _buffer_packet(self, packet: Packet, origin: bool):
        q = self.buffer.setdefault(packet.dst, deque())
        self._expire_buffer(packet.dst)
        if len(q) >= self.cfg.buffer_packets:
            old, _, _ = q.popleft()
            self.stack.drop_packet(old, "no-route", LAYER_ROUTING)
        q.append((packet, self.sim.now, origin))
        self.begin_discovery(packet.dst)

    def _expire_buffer(self, dest: int):
        q = self.buffer.get(dest)
        if not q:
            return
        horizon = self.sim.now - self.cfg.buffer_timeout
        while q and q[0][1] < horizon:
            old, _, _ = q.popleft()
            self.stack.drop_packet(old, "no-route", LAYER_ROUTING)

    def flush_buffer(self, dest: int):
        """Send everything buffered for dest via the (now valid) route."""
        q = self.buffer.pop(dest, None)
        if not q:
            return
        horizon = self.sim.now - self.cfg.buffer_timeout
        for packet, enq_t, origin in q:
            if enq_t < horizon:
                self.stack.drop_packet(packet, "no-route", LAYER_ROUTING)
                continue
            nh = self.route_lookup(dest)
            if nh is None:
                self.stack.drop_packet(packet, "no-route", LAYER_ROUTING)
                continue
            if not origin:
                self._trace_forward(packet)
            self.stack.send_unicast(packet, nh)

    def drop_buffer(self, dest: int):
        """Discovery failed: drop everything buffered for dest."""
        q = self.buffer.pop(dest, None)
        if not q:
            return
        for packet, _, _ in q:
            self.stack.drop_packet(packet, "no-route", LAYER_ROUTING)

    # -- control emission helper ----------------------------------------------

    def send_control(self, payload, size: int, dest: int = BROADCAST):
        pkt = Packet(KIND_CONTROL, self.node_id, dest, size,
                     self.stack.new_packet_id(), None, 255, self.sim.now, payload)
        if dest == BROADCAST:
            self.stack.send_broadcast(pkt)
        else:
            self.stack.send_unicast(pkt, dest)
        return pkt

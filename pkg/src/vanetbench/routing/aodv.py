"""On-demand distance-vector routing: RREQ flood / RREP reverse-path / RERR."""

from dataclasses import dataclass, field

from ..packets import BROADCAST
from .base import RoutingProtocol

RREQ_SIZE = 24
RREP_SIZE = 20
RERR_SIZE = 20


@dataclass
class Rreq:
    origin: int
    rreq_id: int
    origin_seq: int
    dest: int
    dest_seq: int            # last known; -1 when unknown
    hop_count: int
    ttl: int


@dataclass
class Rrep:
    origin: int              # discovery source the reply travels to
    dest: int                # destination the route leads to
    dest_seq: int
    hop_count: int


@dataclass
class Rerr:
    unreachable: list        # [(dest, seq), ...]


@dataclass
class AodvEntry:
    dest: int
    dest_seq: int
    seq_valid: bool
    hop_count: int
    next_hop: int
    expiry: float
    valid: bool
    precursors: set = field(default_factory=set)


@dataclass
class _Discovery:
    attempt: int
    timer: object
    best_hops: int = 1 << 30


class Aodv(RoutingProtocol):
    reactive = True

    def __init__(self, stack):
        super().__init__(stack)
        self.seq = 0
        self.rreq_id = 0
        self.table: dict[int, AodvEntry] = {}
        self.pending: dict[int, _Discovery] = {}
        # (origin, rreq_id) -> best hop count seen, for duplicate suppression
        self.seen: dict[tuple, int] = {}

    # -- table helpers ---------------------------------------------------------

    def _entry_usable(self, e: AodvEntry | None) -> bool:
        return (e is not None and e.valid and e.seq_valid
                and e.expiry > self.sim.now)

    def route_lookup(self, dest: int):
        e = self.table.get(dest)
        if not self._entry_usable(e):
            return None
        e.expiry = self.sim.now + self.cfg.aodv_route_timeout   # refresh on use
        return e.next_hop

    def _update_route(self, dest, seq, seq_valid, hops, next_hop) -> bool:
        """Install/refresh under the freshness rule: newer seq, or equal seq
        with fewer hops, or replacing an unusable entry."""
        now = self.sim.now
        expiry = now + self.cfg.aodv_route_timeout
        e = self.table.get(dest)
        if e is None:
            self.table[dest] = AodvEntry(dest, seq, seq_valid, hops, next_hop,
                                         expiry, True)
            return True
        fresher = (seq_valid and (not e.seq_valid or seq > e.dest_seq
                                  or (seq == e.dest_seq and hops < e.hop_count)))
        if fresher or not self._entry_usable(e):
            e.dest_seq = seq if seq_valid else e.dest_seq
            e.seq_valid = e.seq_valid or seq_valid
            e.hop_count = hops
            e.next_hop = next_hop
            e.expiry = expiry
            e.valid = True
            return True
        e.expiry = max(e.expiry, expiry)
        return False

    # -- discovery ---------------------------------------------------------------

    def begin_discovery(self, dest: int):
        if dest in self.pending:
            return
        self._send_rreq(dest, attempt=0)

    def _send_rreq(self, dest: int, attempt: int):
        ttls = self.cfg.aodv_ring_ttls
        ttl = ttls[min(attempt, len(ttls) - 1)]
        self.rreq_id += 1
        self.seq += 1
        e = self.table.get(dest)
        dest_seq = e.dest_seq if (e is not None and e.seq_valid) else -1
        rreq = Rreq(self.node_id, self.rreq_id, self.seq, dest, dest_seq, 0, ttl)
        self.seen[(self.node_id, self.rreq_id)] = 0
        self.send_control(rreq, RREQ_SIZE)
        timeout = 2.0 * self.cfg.aodv_node_traversal * ttl
        timer = self.sim.after(timeout, lambda: self._discovery_timeout(dest),
                               target="aodv.discovery")
        self.pending[dest] = _Discovery(attempt, timer)

    def _discovery_timeout(self, dest: int):
        disc = self.pending.pop(dest, None)
        if disc is None:
            return
        if self._entry_usable(self.table.get(dest)):
            self.flush_buffer(dest)
            return
        if disc.attempt >= self.cfg.aodv_rreq_retries:
            self.drop_buffer(dest)
            return
        self._send_rreq(dest, disc.attempt + 1)

    # -- control handling ---------------------------------------------------------

    def on_control(self, packet, from_node: int):
        msg = packet.payload
        if isinstance(msg, Rreq):
            self._on_rreq(msg, from_node)
        elif isinstance(msg, Rrep):
            self._on_rrep(msg, from_node, packet)
        elif isinstance(msg, Rerr):
            self._on_rerr(msg, from_node)

    def _on_rreq(self, rreq: Rreq, prev: int):
        if rreq.origin == self.node_id:
            return
        # neighbor route to the transmitter
        self._update_route(prev, 0, False, 1, prev)
        hops_here = rreq.hop_count + 1
        key = (rreq.origin, rreq.rreq_id)
        if key in self.seen:
            # duplicate: keep the better reverse path, never re-flood
            if hops_here < self.seen[key]:
                self.seen[key] = hops_here
                self._update_route(rreq.origin, rreq.origin_seq, True, hops_here, prev)
                if rreq.dest == self.node_id:
                    self._reply_as_dest(rreq, prev)
            return
        self.seen[key] = hops_here
        self._update_route(rreq.origin, rreq.origin_seq, True, hops_here, prev)
        if rreq.dest == self.node_id:
            self._reply_as_dest(rreq, prev)
            return
        e = self.table.get(rreq.dest)
        if self._entry_usable(e) and e.seq_valid and e.dest_seq >= rreq.dest_seq:
            rrep = Rrep(rreq.origin, rreq.dest, e.dest_seq, e.hop_count)
            e.precursors.add(prev)
            self.send_control(rrep, RREP_SIZE, dest=prev)
            return
        if rreq.ttl - 1 > 0:
            fwd = Rreq(rreq.origin, rreq.rreq_id, rreq.origin_seq, rreq.dest,
                       rreq.dest_seq, hops_here, rreq.ttl - 1)
            self.send_control(fwd, RREQ_SIZE)

    def _reply_as_dest(self, rreq: Rreq, prev: int):
        if rreq.dest_seq > self.seq:
            self.seq = rreq.dest_seq
        self.seq += 1
        self.send_control(Rrep(rreq.origin, self.node_id, self.seq, 0),
                          RREP_SIZE, dest=prev)

    def _on_rrep(self, rrep: Rrep, prev: int, packet):
        hops_here = rrep.hop_count + 1
        self._update_route(prev, 0, False, 1, prev)
        self._update_route(rrep.dest, rrep.dest_seq, True, hops_here, prev)
        if rrep.origin == self.node_id:
            disc = self.pending.pop(rrep.dest, None)
            if disc is not None and disc.timer is not None:
                self.sim.cancel(disc.timer)
            self.flush_buffer(rrep.dest)
            return
        back = self.table.get(rrep.origin)
        if not self._entry_usable(back):
            return   # reverse route evaporated; the reply dies here
        fwd = Rrep(rrep.origin, rrep.dest, rrep.dest_seq, hops_here)
        e = self.table.get(rrep.dest)
        if e is not None:
            e.precursors.add(back.next_hop)
        self.send_control(fwd, RREP_SIZE, dest=back.next_hop)

    # -- failure handling -----------------------------------------------------------

    def on_link_break(self, neighbor: int, packet=None):
        unreachable = []
        for e in self.table.values():
            if e.valid and e.next_hop == neighbor:
                e.valid = False
                if e.seq_valid:
                    e.dest_seq += 1
                unreachable.append((e.dest, e.dest_seq))
        nbr = self.table.get(neighbor)
        if nbr is not None:
            nbr.valid = False
        if unreachable:
            has_precursors = any(self.table[d].precursors for d, _ in unreachable
                                 if d in self.table)
            if has_precursors:
                self.send_control(Rerr(unreachable), RERR_SIZE)

    def _on_rerr(self, rerr: Rerr, prev: int):
        propagate = []
        for dest, seq in rerr.unreachable:
            e = self.table.get(dest)
            if e is not None and e.valid and e.next_hop == prev:
                e.valid = False
                if seq > e.dest_seq:
                    e.dest_seq = seq
                if e.precursors:
                    propagate.append((dest, e.dest_seq))
        if propagate:
            self.send_control(Rerr(propagate), RERR_SIZE)

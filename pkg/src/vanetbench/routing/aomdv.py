"""Multipath on-demand routing: link-disjoint path sets with loop freedom via
the advertised-hop-count rule."""

import math
from dataclasses import dataclass, field

from .base import RoutingProtocol

RREQ_SIZE = 28
RREP_SIZE = 24
RERR_SIZE = 20


@dataclass
class MRreq:
    origin: int
    rreq_id: int
    origin_seq: int
    dest: int
    dest_seq: int
    advertised_hops: int     # hop count this copy advertises for the reverse path
    first_hop: int           # first forwarder after the origin; origin itself at hop 0
    ttl: int


@dataclass
class MRrep:
    origin: int
    dest: int
    dest_seq: int
    advertised_hops: int
    first_hop: int           # dest-side neighbor the reply left through


@dataclass
class MRerr:
    unreachable: list


@dataclass
class AomdvPath:
    next_hop: int
    last_hop: int
    hop_count: int
    expiry: float


@dataclass
class AomdvEntry:
    dest: int
    dest_seq: int
    advertised_hops: float = math.inf    # frozen at first advertisement per sequence
    paths: list = field(default_factory=list)

    def alive_paths(self, now: float):
        return [p for p in self.paths if p.expiry > now]


@dataclass
class _Discovery:
    attempt: int
    timer: object


class Aomdv(RoutingProtocol):
    reactive = True

    def __init__(self, stack):
        super().__init__(stack)
        self.seq = 0
        self.rreq_id = 0
        self.table: dict[int, AomdvEntry] = {}
        self.pending: dict[int, _Discovery] = {}
        self.seen_forwarded: set = set()       # (origin, rreq_id) already re-flooded
        self.replied: dict[tuple, tuple] = {}  # (origin, rreq_id) -> (replies, seq used)

    # -- table ------------------------------------------------------------------

    def _entry(self, dest: int) -> AomdvEntry | None:
        return self.table.get(dest)

    def route_lookup(self, dest: int):
        e = self.table.get(dest)
        if e is None:
            return None
        now = self.sim.now
        alive = e.alive_paths(now)
        if not alive:
            return None
        primary = alive[0]
        primary.expiry = now + self.cfg.aodv_route_timeout
        return primary.next_hop

    def _install_path(self, dest, seq, next_hop, last_hop, hop_count) -> bool:
        """Disjointness (distinct next and last hops) plus the hop-count rule."""
        now = self.sim.now
        e = self.table.get(dest)
        if e is None:
            e = self.table[dest] = AomdvEntry(dest, seq)
        if seq > e.dest_seq:
            e.dest_seq = seq
            e.paths = []
            e.advertised_hops = math.inf
        elif seq < e.dest_seq:
            return False
        if hop_count >= e.advertised_hops:
            return False
        for p in e.paths:
            if p.next_hop == next_hop or p.last_hop == last_hop:
                # refresh an identical path rather than violating disjointness
                if p.next_hop == next_hop and p.last_hop == last_hop:
                    if hop_count < p.hop_count:
                        p.hop_count = hop_count
                    p.expiry = now + self.cfg.aodv_route_timeout
                return False
        if len(e.paths) >= self.cfg.aomdv_max_paths:
            return False
        e.paths.append(AomdvPath(next_hop, last_hop, hop_count,
                                 now + self.cfg.aodv_route_timeout))
        e.paths.sort(key=lambda p: (p.hop_count, p.next_hop))
        return True

    def _freeze_advertised(self, e: AomdvEntry):
        if e.advertised_hops is math.inf and e.paths:
            e.advertised_hops = max(p.hop_count for p in e.paths)

    # -- discovery ----------------------------------------------------------------

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
        dest_seq = e.dest_seq if e is not None else -1
        rreq = MRreq(self.node_id, self.rreq_id, self.seq, dest, dest_seq,
                     0, self.node_id, ttl)
        self.seen_forwarded.add((self.node_id, self.rreq_id))
        self.send_control(rreq, RREQ_SIZE)
        timeout = 2.0 * self.cfg.aodv_node_traversal * ttl
        timer = self.sim.after(timeout, lambda: self._discovery_timeout(dest),
                               target="aomdv.discovery")
        self.pending[dest] = _Discovery(attempt, timer)

    def _discovery_timeout(self, dest: int):
        disc = self.pending.pop(dest, None)
        if disc is None:
            return
        if self.route_lookup(dest) is not None:
            self.flush_buffer(dest)
            return
        if disc.attempt >= self.cfg.aodv_rreq_retries:
            self.drop_buffer(dest)
            return
        self._send_rreq(dest, disc.attempt + 1)

    # -- control --------------------------------------------------------------------

    def on_control(self, packet, from_node: int):
        msg = packet.payload
        if isinstance(msg, MRreq):
            self._on_rreq(msg, from_node)
        elif isinstance(msg, MRrep):
            self._on_rrep(msg, from_node)
        elif isinstance(msg, MRerr):
            self._on_rerr(msg, from_node)

    def _on_rreq(self, rreq: MRreq, prev: int):
        if rreq.origin == self.node_id:
            return
        hops_here = rreq.advertised_hops + 1
        last_hop = rreq.first_hop if rreq.first_hop != rreq.origin else prev
        # every copy is examined for an additional disjoint reverse path
        self._install_path(rreq.origin, rreq.origin_seq, prev, last_hop, hops_here)
        key = (rreq.origin, rreq.rreq_id)
        if rreq.dest == self.node_id:
            replies, reply_seq = self.replied.get(key, (0, None))
            if replies >= self.cfg.aomdv_max_paths:
                return
            if reply_seq is None:
                # one sequence bump per discovery; later replies reuse it so the
                # origin accumulates paths instead of resetting on a fresher seq
                if rreq.origin_seq > self.seq:
                    self.seq = rreq.origin_seq
                self.seq += 1
                reply_seq = self.seq
            self.replied[key] = (replies + 1, reply_seq)
            self.send_control(MRrep(rreq.origin, self.node_id, reply_seq, 0,
                                    self.node_id), RREP_SIZE, dest=prev)
            return
        if key in self.seen_forwarded:
            return
        self.seen_forwarded.add(key)
        if rreq.ttl - 1 > 0:
            entry = self.table.get(rreq.origin)
            if entry is not None:
                self._freeze_advertised(entry)   # forwarding advertises the reverse path
            first = self.node_id if rreq.first_hop == rreq.origin else rreq.first_hop
            fwd = MRreq(rreq.origin, rreq.rreq_id, rreq.origin_seq, rreq.dest,
                        rreq.dest_seq, hops_here, first, rreq.ttl - 1)
            self.send_control(fwd, RREQ_SIZE)

    def _on_rrep(self, rrep: MRrep, prev: int):
        hops_here = rrep.advertised_hops + 1
        last_hop = rrep.first_hop if rrep.first_hop != rrep.dest else prev
        installed = self._install_path(rrep.dest, rrep.dest_seq, prev, last_hop,
                                       hops_here)
        if rrep.origin == self.node_id:
            disc = self.pending.pop(rrep.dest, None)
            if disc is not None and disc.timer is not None:
                self.sim.cancel(disc.timer)
            self.flush_buffer(rrep.dest)
            return
        if not installed:
            return
        back = self.table.get(rrep.origin)
        alive = back.alive_paths(self.sim.now) if back is not None else []
        if not alive:
            return
        e = self.table[rrep.dest]
        self._freeze_advertised(e)
        first = self.node_id if rrep.first_hop == rrep.dest else rrep.first_hop
        fwd = MRrep(rrep.origin, rrep.dest, rrep.dest_seq,
                    int(e.advertised_hops), first)
        self.send_control(fwd, RREP_SIZE, dest=alive[0].next_hop)

    # -- failure ----------------------------------------------------------------------

    def on_link_break(self, neighbor: int, packet=None):
        lost = []
        for e in self.table.values():
            before = bool(e.paths)
            e.paths = [p for p in e.paths if p.next_hop != neighbor]
            if before and not e.paths:
                e.dest_seq += 1
                lost.append((e.dest, e.dest_seq))
        if lost:
            self.send_control(MRerr(lost), RERR_SIZE)

    def _on_rerr(self, rerr: MRerr, prev: int):
        propagate = []
        for dest, seq in rerr.unreachable:
            e = self.table.get(dest)
            if e is None:
                continue
            before = bool(e.paths)
            e.paths = [p for p in e.paths if p.next_hop != prev]
            if before and not e.paths:
                if seq > e.dest_seq:
                    e.dest_seq = seq
                propagate.append((dest, e.dest_seq))
        if propagate:
            self.send_control(MRerr(propagate), RERR_SIZE)

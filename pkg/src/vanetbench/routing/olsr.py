"""Proactive link-state routing with multipoint relays: HELLO link sensing,
greedy MPR election, TC flooding via MPRs, hop-count shortest paths."""

from collections import deque
from dataclasses import dataclass, field

from .base import RoutingProtocol

HELLO_HEADER = 16
HELLO_LINK_SIZE = 4
TC_HEADER = 16
TC_ENTRY_SIZE = 4

SYM = "sym"
HEARD = "heard"


@dataclass
class Hello:
    links: list              # [(neighbor, status, is_mpr), ...]


@dataclass
class Tc:
    origin: int
    seq: int
    selectors: list


@dataclass
class LinkInfo:
    status: str
    expiry: float


def select_mprs(neighbors: set, two_hop: dict) -> set:
    """Greedy MPR election over a neighborhood snapshot.

    `two_hop` maps each symmetric neighbor to the set of nodes it covers.
    First take neighbors uniquely covering some strict two-hop neighbor, then
    repeatedly the neighbor covering most uncovered nodes (smallest id on ties).
    """
    strict = set()
    for n, covered in two_hop.items():
        strict |= covered
    strict -= neighbors
    mprs = set()
    uncovered = set(strict)
    for target in sorted(strict):
        holders = [n for n in neighbors if target in two_hop.get(n, ())]
        if len(holders) == 1:
            mprs.add(holders[0])
    for m in mprs:
        uncovered -= two_hop.get(m, set())
    while uncovered:
        best = None
        best_gain = -1
        for n in sorted(neighbors - mprs):
            gain = len(uncovered & two_hop.get(n, set()))
            if gain > best_gain:
                best, best_gain = n, gain
        if best is None or best_gain <= 0:
            break   # leftover targets are uncoverable (stale two-hop info)
        mprs.add(best)
        uncovered -= two_hop.get(best, set())
    return mprs


class Olsr(RoutingProtocol):
    reactive = False

    def __init__(self, stack):
        super().__init__(stack)
        self.links: dict[int, LinkInfo] = {}
        self.two_hop: dict[int, tuple] = {}          # nbr -> (set of its sym nbrs, expiry)
        self.mpr_set: set = set()
        self.mpr_selectors: dict[int, float] = {}    # nbr -> expiry
        self.topology: dict[int, tuple] = {}         # origin -> (seq, selectors, expiry)
        self.tc_seq = 0
        self.seen_tc: dict[int, int] = {}            # origin -> highest seq seen
        self.routes: dict[int, int] = {}
        self._dirty = True

    def start(self):
        rng = self.stack.rng_routing
        self.sim.after(float(rng.uniform(0.0, self.cfg.olsr_hello_interval)),
                       self._hello_tick, target="olsr.hello")
        self.sim.after(float(rng.uniform(0.0, self.cfg.olsr_tc_interval)),
                       self._tc_tick, target="olsr.tc")

    # -- timers ------------------------------------------------------------------

    def _hello_tick(self):
        self._expire()
        links = [(n, info.status, n in self.mpr_set)
                 for n, info in sorted(self.links.items())]
        self.send_control(Hello(links), HELLO_HEADER + HELLO_LINK_SIZE * len(links))
        self.sim.after(self.cfg.olsr_hello_interval, self._hello_tick,
                       target="olsr.hello")

    def _tc_tick(self):
        self._expire()
        if self.mpr_selectors:
            self.tc_seq += 1
            selectors = sorted(self.mpr_selectors)
            self.send_control(Tc(self.node_id, self.tc_seq, selectors),
                              TC_HEADER + TC_ENTRY_SIZE * len(selectors))
        self.sim.after(self.cfg.olsr_tc_interval, self._tc_tick, target="olsr.tc")

    def _expire(self):
        now = self.sim.now
        dirty = False
        for n in [n for n, i in self.links.items() if i.expiry <= now]:
            del self.links[n]
            self.two_hop.pop(n, None)
            dirty = True
        for n in [n for n, (_, exp) in self.two_hop.items() if exp <= now]:
            del self.two_hop[n]
            dirty = True
        for n in [n for n, exp in self.mpr_selectors.items() if exp <= now]:
            del self.mpr_selectors[n]
        for o in [o for o, (_, _, exp) in self.topology.items() if exp <= now]:
            del self.topology[o]
            dirty = True
        if dirty:
            self._recompute_mprs()
            self._dirty = True

    # -- control ------------------------------------------------------------------

    def on_control(self, packet, from_node: int):
        msg = packet.payload
        if isinstance(msg, Hello):
            self._on_hello(msg, from_node)
        elif isinstance(msg, Tc):
            self._on_tc(msg, from_node, packet)

    def _on_hello(self, hello: Hello, nbr: int):
        now = self.sim.now
        hold = self.cfg.hold_multiplier * self.cfg.olsr_hello_interval
        heard_me = False
        nbr_sym = set()
        for other, status, is_mpr in hello.links:
            if other == self.node_id:
                heard_me = True
                if is_mpr:
                    self.mpr_selectors[nbr] = now + hold
            elif status == SYM:
                nbr_sym.add(other)
        status = SYM if heard_me else HEARD
        self.links[nbr] = LinkInfo(status, now + hold)
        self.two_hop[nbr] = (nbr_sym, now + hold)
        self._recompute_mprs()
        self._dirty = True

    def _on_tc(self, tc: Tc, prev: int, packet):
        if tc.origin == self.node_id:
            return
        if self.seen_tc.get(tc.origin, -1) >= tc.seq:
            return
        self.seen_tc[tc.origin] = tc.seq
        hold = self.cfg.hold_multiplier * self.cfg.olsr_tc_interval
        self.topology[tc.origin] = (tc.seq, list(tc.selectors), self.sim.now + hold)
        self._dirty = True
        # only multipoint relays of the previous hop retransmit the flood
        if prev in self.mpr_selectors:
            self.send_control(Tc(tc.origin, tc.seq, list(tc.selectors)),
                              TC_HEADER + TC_ENTRY_SIZE * len(tc.selectors))

    # -- state --------------------------------------------------------------------

    def _sym_neighbors(self) -> set:
        return {n for n, i in self.links.items() if i.status == SYM}

    def _recompute_mprs(self):
        neighbors = self._sym_neighbors()
        two_hop = {n: set(self.two_hop.get(n, (set(), 0))[0]) - {self.node_id}
                   for n in neighbors}
        self.mpr_set = select_mprs(neighbors, two_hop)

    def _recompute_routes(self):
        """Hop-count BFS over the learned topology; deterministic next hops."""
        adj: dict[int, set] = {}

        def connect(a, b):
            adj.setdefault(a, set()).add(b)
            adj.setdefault(b, set()).add(a)

        me = self.node_id
        for n in self._sym_neighbors():
            connect(me, n)
        for n, (sym_set, _) in self.two_hop.items():
            if n in self.links:
                for x in sym_set:
                    connect(n, x)
        for origin, (_, selectors, _) in self.topology.items():
            for s in selectors:
                connect(origin, s)

        routes: dict[int, int] = {}
        first_hop: dict[int, int] = {me: me}
        q = deque([me])
        while q:
            u = q.popleft()
            for v in sorted(adj.get(u, ())):
                if v in first_hop:
                    continue
                first_hop[v] = v if u == me else first_hop[u]
                if v != me:
                    routes[v] = first_hop[v]
                q.append(v)
        self.routes = routes
        self._dirty = False

    def route_lookup(self, dest: int):
        if self._dirty:
            self._recompute_routes()
        nh = self.routes.get(dest)
        if nh is not None and nh in self.links and self.links[nh].status == SYM:
            return nh
        return None

    def on_link_break(self, neighbor: int, packet=None):
        if neighbor in self.links:
            del self.links[neighbor]
            self.two_hop.pop(neighbor, None)
            self.mpr_selectors.pop(neighbor, None)
            self._recompute_mprs()
            self._dirty = True

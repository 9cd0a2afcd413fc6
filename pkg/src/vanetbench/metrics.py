"""Packet-trace collection and the QoS / performance metrics computed from it.

Trace file format (stable, versioned): one record per line, space-separated
columns `time event reason layer kind packet_id flow_id node size`; absent
flow ids are written as `-`. Header lines start with `#`.
"""

import math
from dataclasses import dataclass, field

TRACE_VERSION = "vanetbench-trace v1"
TRACE_COLUMNS = ("time", "event", "reason", "layer", "kind",
                 "packet_id", "flow_id", "node", "size")

EV_SENT = "sent"
EV_RECEIVED = "received"
EV_FORWARDED = "forwarded"
EV_DROPPED = "dropped"

# drop reasons; "none" also tags packets still unterminated when a run closes
REASONS = ("ifq", "no-route", "ttl", "fading", "collision", "none")

LAYER_APP = "app"
LAYER_ROUTING = "routing"
LAYER_MAC = "mac"


class TraceCorruptionError(RuntimeError):
    """The trace violates an accounting invariant (e.g. receive without send)."""


@dataclass
class TraceRecord:
    time: float
    event: str
    reason: str
    layer: str
    kind: str
    packet_id: int
    flow_id: int | None
    node: int
    size: int


class Trace:
    """Append-only record stream fanned out to sinks (file writer, aggregator, list)."""

    def __init__(self, keep_records: bool = False):
        self.records: list[TraceRecord] = []
        self._keep = keep_records
        self._sinks: list = []

    def attach(self, sink):
        self._sinks.append(sink)
        return sink

    def add(self, time, event, reason, layer, kind, packet_id, flow_id, node, size):
        if self._keep:
            self.records.append(TraceRecord(time, event, reason, layer, kind,
                                            packet_id, flow_id, node, size))
        for sink in self._sinks:
            sink.add(time, event, reason, layer, kind, packet_id, flow_id, node, size)


class TraceFileWriter:
    """Line-oriented sink; float times use repr so runs replay byte-identically."""

    def __init__(self, fh):
        self.fh = fh
        fh.write(f"#{TRACE_VERSION}\n")
        fh.write("#" + " ".join(TRACE_COLUMNS) + "\n")

    def add(self, time, event, reason, layer, kind, packet_id, flow_id, node, size):
        fid = "-" if flow_id is None else flow_id
        self.fh.write(f"{time!r} {event} {reason} {layer} {kind} "
                      f"{packet_id} {fid} {node} {size}\n")


def read_trace(path):
    """Yield TraceRecords from a trace file."""
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            t, event, reason, layer, kind, pid, fid, node, size = line.split()
            yield TraceRecord(float(t), event, reason, layer, kind, int(pid),
                              None if fid == "-" else int(fid), int(node), int(size))


class TraceAggregator:
    """Streaming aggregation of the counts and series every metric needs."""

    def __init__(self):
        self.counts: dict[tuple, int] = {}           # (layer, kind, event, reason) -> n
        self.app_sent_bytes: dict[str, int] = {}     # kind -> bytes
        self.app_recv_bytes: dict[str, int] = {}
        self.control_tx = 0                          # MAC transmissions of control packets
        self.control_tx_bytes = 0
        self.sent_meta: dict[int, tuple] = {}        # cbr pid -> (t, flow, node, size)
        self.recv_events: list[tuple] = []           # (t_recv, pid, flow)
        self.terminal: set[int] = set()              # cbr pids with a terminal record
        self.drops_by_reason: dict[str, dict[str, int]] = {}   # kind -> reason -> n
        self.first_send: float | None = None
        self.last_receive: float | None = None
        self.data_kind = "cbr"

    def add(self, time, event, reason, layer, kind, packet_id, flow_id, node, size):
        key = (layer, kind, event, reason)
        self.counts[key] = self.counts.get(key, 0) + 1
        if layer == LAYER_MAC and event == EV_SENT and kind == "routing-control":
            self.control_tx += 1
            self.control_tx_bytes += size
        if layer == LAYER_APP and event == EV_SENT:
            self.app_sent_bytes[kind] = self.app_sent_bytes.get(kind, 0) + size
            if kind == self.data_kind:
                if packet_id in self.sent_meta:
                    raise TraceCorruptionError(f"duplicate sent for packet {packet_id}")
                self.sent_meta[packet_id] = (time, flow_id, node, size)
                if self.first_send is None or time < self.first_send:
                    self.first_send = time
        elif layer == LAYER_APP and event == EV_RECEIVED:
            self.app_recv_bytes[kind] = self.app_recv_bytes.get(kind, 0) + size
            if kind == self.data_kind:
                if packet_id not in self.sent_meta:
                    raise TraceCorruptionError(
                        f"receive without matching send for packet {packet_id}")
                if packet_id in self.terminal:
                    raise TraceCorruptionError(f"packet {packet_id} terminated twice")
                self.terminal.add(packet_id)
                self.recv_events.append((time, packet_id, flow_id))
                if self.last_receive is None or time > self.last_receive:
                    self.last_receive = time
        elif event == EV_DROPPED and kind == self.data_kind:
            if packet_id in self.terminal:
                raise TraceCorruptionError(f"packet {packet_id} terminated twice")
            self.terminal.add(packet_id)
        if event == EV_DROPPED:
            per = self.drops_by_reason.setdefault(kind, {})
            per[reason] = per.get(reason, 0) + 1

    # -- raw counts ---------------------------------------------------------

    def count(self, layer=None, kind=None, event=None, reason=None) -> int:
        total = 0
        for (l, k, e, r), n in self.counts.items():
            if ((layer is None or l == layer) and (kind is None or k == kind)
                    and (event is None or e == event) and (reason is None or r == reason)):
                total += n
        return total

    def sent(self, kind="cbr") -> int:
        return self.count(layer=LAYER_APP, kind=kind, event=EV_SENT)

    def received(self, kind="cbr") -> int:
        return self.count(layer=LAYER_APP, kind=kind, event=EV_RECEIVED)

    def dropped(self, kind="cbr") -> int:
        return self.count(kind=kind, event=EV_DROPPED)

    def forwards(self, kind="cbr") -> int:
        return self.count(layer=LAYER_ROUTING, kind=kind, event=EV_FORWARDED)

    def outstanding(self):
        """cbr packets with no terminal record yet: [(pid, flow, node, size)]."""
        out = []
        for pid, (t, flow, node, size) in self.sent_meta.items():
            if pid not in self.terminal:
                out.append((pid, flow, node, size))
        return out


def aggregate(records) -> TraceAggregator:
    agg = TraceAggregator()
    for r in records:
        agg.add(r.time, r.event, r.reason, r.layer, r.kind, r.packet_id,
                r.flow_id, r.node, r.size)
    return agg


def _as_agg(trace) -> TraceAggregator:
    if isinstance(trace, TraceAggregator):
        return trace
    if isinstance(trace, Trace):
        return aggregate(trace.records)
    return aggregate(trace)


# ---------------------------------------------------------------------------
# metric operations

def packet_drop(trace, kind="cbr") -> int:
    """Dropped packets = sent - received for the class."""
    agg = _as_agg(trace)
    diff = agg.sent(kind) - agg.received(kind)
    if diff < 0:
        raise TraceCorruptionError(f"negative drop count for {kind}: {diff}")
    return diff


def throughput_bytes(trace, kind="cbr", direction="received") -> int:
    """Raw byte totals over app-layer sent or received packets."""
    agg = _as_agg(trace)
    if direction == "received":
        return agg.app_recv_bytes.get(kind, 0)
    if direction == "sent":
        return agg.app_sent_bytes.get(kind, 0)
    raise ValueError(f"direction must be 'sent' or 'received', not {direction!r}")


def delay_series(trace, kind="cbr"):
    """Per delivered packet (receive time, delay), ordered by receive time."""
    agg = _as_agg(trace)
    out = []
    for t_recv, pid, flow in agg.recv_events:
        t_sent = agg.sent_meta[pid][0]
        out.append((t_recv, t_recv - t_sent, flow))
    out.sort(key=lambda x: (x[0], x[2] if x[2] is not None else -1))
    return [(t, d) for t, d, _ in out]


def _delays_per_flow(agg: TraceAggregator):
    flows: dict = {}
    for t_recv, pid, flow in sorted(agg.recv_events):
        t_sent = agg.sent_meta[pid][0]
        flows.setdefault(flow, []).append((t_recv, t_recv - t_sent))
    return flows


def jitter_series(trace, kind="cbr"):
    """Signed delay differences between consecutive deliveries of the same flow,
    merged across flows by receive time."""
    agg = _as_agg(trace)
    out = []
    for flow, delays in _delays_per_flow(agg).items():
        for (t_prev, d_prev), (t_next, d_next) in zip(delays, delays[1:]):
            out.append((t_next, d_next - d_prev, flow))
    out.sort(key=lambda x: (x[0], x[2] if x[2] is not None else -1))
    return [(t, j) for t, j, _ in out]


def average_throughput(trace, kind="cbr", window="flow", duration=None) -> float:
    """Received bits over the active window, in kbit/s.

    window='flow' uses (last receive - first send); window='nominal' uses the
    configured run duration.
    """
    agg = _as_agg(trace)
    bytes_recv = agg.app_recv_bytes.get(kind, 0)
    if agg.received(kind) == 0:
        raise ValueError("average throughput undefined with zero deliveries")
    if window == "nominal":
        if not duration:
            raise ValueError("nominal window needs the run duration")
        span = float(duration)
    else:
        span = (agg.last_receive or 0.0) - (agg.first_send or 0.0)
    if span <= 0:
        raise ValueError("zero-length throughput window")
    return bytes_recv * 8.0 / span / 1000.0


def nrl(trace, kind="cbr"):
    """Routing-control MAC transmissions per delivered data packet; None if no deliveries."""
    agg = _as_agg(trace)
    delivered = agg.received(kind)
    if delivered == 0:
        return None
    return agg.control_tx / delivered


def mean_hop(trace, kind="cbr"):
    """Hops per delivery, 1 + forwards/deliveries; None if no deliveries."""
    agg = _as_agg(trace)
    delivered = agg.received(kind)
    if delivered == 0:
        return None
    return 1.0 + agg.forwards(kind) / delivered


def mean_hop_raw(trace, kind="cbr"):
    """Forwarded-over-sent ratio exactly as printed; the conflated reading."""
    agg = _as_agg(trace)
    sent = agg.sent(kind)
    if sent == 0:
        return None
    return agg.forwards(kind) / sent


def pdr(trace, kind="cbr"):
    """Packet delivery ratio in percent; None when nothing was sent."""
    agg = _as_agg(trace)
    sent = agg.sent(kind)
    if sent == 0:
        return None
    return agg.received(kind) / sent * 100.0


def route_cost(trace, kind="cbr") -> float:
    """Routing-control bytes transmitted per data byte sent; 0 with no control."""
    agg = _as_agg(trace)
    data_bytes = agg.app_sent_bytes.get(kind, 0)
    if agg.control_tx_bytes == 0:
        return 0.0
    if data_bytes == 0:
        return math.inf
    return agg.control_tx_bytes / data_bytes


def conservation_check(trace, kind="cbr") -> dict:
    """sent == received + sum(dropped-by-reason) for a unicast data class.

    Broadcast classes carry one outcome record per candidate receiver, so the
    identity is only meaningful for point-to-point traffic.
    """
    agg = _as_agg(trace)
    sent = agg.sent(kind)
    received = agg.received(kind)
    drops = agg.drops_by_reason.get(kind, {})
    dropped = sum(drops.values())
    if sent != received + dropped:
        raise TraceCorruptionError(
            f"conservation violated for {kind}: sent={sent} received={received} "
            f"dropped={dropped} by reason {drops}")
    return {"sent": sent, "received": received, "dropped": dropped, "by_reason": drops}


@dataclass
class MetricsReport:
    """All table metrics for one run; drop_pct = 100 - pdr by construction."""

    kind: str
    sent: int
    received: int
    dropped: int
    throughput_sent_bytes: int
    throughput_recv_bytes: int
    pdr: float | None
    drop_pct: float | None
    avg_throughput_kbps: float | None
    nrl: float | None
    route_cost: float
    mean_hop: float | None
    mean_hop_raw: float | None
    drops_by_reason: dict = field(default_factory=dict)

    METRIC_NAMES = ("sent", "received", "dropped", "throughput_sent_bytes",
                    "throughput_recv_bytes", "pdr", "drop_pct",
                    "avg_throughput_kbps", "nrl", "route_cost",
                    "mean_hop", "mean_hop_raw")

    def rows(self):
        return [(name, getattr(self, name)) for name in self.METRIC_NAMES]


def build_report(trace, kind="cbr", window="flow", duration=None) -> MetricsReport:
    agg = _as_agg(trace)
    sent = agg.sent(kind)
    received = agg.received(kind)
    p = pdr(agg, kind)
    try:
        avg = average_throughput(agg, kind, window=window, duration=duration)
    except ValueError:
        avg = None
    return MetricsReport(
        kind=kind,
        sent=sent,
        received=received,
        dropped=sent - received,
        throughput_sent_bytes=throughput_bytes(agg, kind, "sent"),
        throughput_recv_bytes=throughput_bytes(agg, kind, "received"),
        pdr=p,
        drop_pct=None if p is None else 100.0 - p,
        avg_throughput_kbps=avg,
        nrl=nrl(agg, kind),
        route_cost=route_cost(agg, kind),
        mean_hop=mean_hop(agg, kind),
        mean_hop_raw=mean_hop_raw(agg, kind),
        drops_by_reason=dict(agg.drops_by_reason.get(kind, {})),
    )

"""Simplified IEEE 802.11p MAC: drop-tail queue, DIFS + binary-exponential backoff
with freezing, broadcast and unicast (ACK/retry) services, and the shared medium."""

import math
from collections import deque

import numpy as np

from . import phy
from .metrics import EV_DROPPED, EV_SENT, LAYER_MAC
from .packets import BROADCAST, KIND_ACK, KIND_PBC

FRAME_DATA = "data"
FRAME_ACK = "ack"

# MAC states
IDLE = "idle"
CONTEND = "contend"       # DIFS + backoff countdown scheduled
FROZEN = "frozen"         # waiting for the medium to go idle
TX = "tx"                 # own data frame in the air
WAIT_ACK = "wait-ack"


class Frame:
    """One MAC frame; duration covers preamble plus serialized payload + overhead."""

    __slots__ = ("kind", "src", "dest", "packet", "payload_size", "duration",
                 "mac_seq", "ack_for", "delivered_to_dest", "last_outcome")

    def __init__(self, params, kind, src, dest, packet, payload_size, mac_seq,
                 ack_for=None):
        self.kind = kind
        self.src = src
        self.dest = dest
        self.packet = packet
        self.payload_size = payload_size
        self.duration = params.phy_overhead + 8.0 * (payload_size + params.mac_overhead) / params.bitrate
        self.mac_seq = mac_seq
        self.ack_for = ack_for
        self.delivered_to_dest = False
        self.last_outcome = None

    @property
    def trace_kind(self):
        return KIND_ACK if self.kind == FRAME_ACK else self.packet.kind


class Transmission:
    __slots__ = ("sender", "frame", "start", "end", "mean_dbm", "sample_mw",
                 "waiters")

    def __init__(self, sender, frame, start, end, mean_dbm, sample_mw):
        self.sender = sender
        self.frame = frame
        self.start = start
        self.end = end
        self.mean_dbm = mean_dbm      # per-node deterministic mean power (list)
        self.sample_mw = sample_mw    # per-node faded power for this transmission (list)
        self.waiters: list = []       # frozen MACs woken inline when this tx ends


class Channel:
    """The set of in-flight transmissions plus reception/busy decisions.

    Carrier sensing uses the deterministic mean power; fading samples are drawn
    i.i.d. per (transmission, receiver) from the channel RNG stream.
    """

    def __init__(self, sim, n_nodes, coords_fn, nak, txp, rng, trace,
                 loss_model="nakagami", collisions=True):
        self.sim = sim
        self.n_nodes = n_nodes
        self.coords_fn = coords_fn            # () -> ndarray (n, 2)
        self.nak = nak
        self.txp = txp
        self.rng = rng
        self.trace = trace
        self.loss_model = loss_model
        self.collisions = collisions
        self.active: list[Transmission] = []
        self.recent: deque[Transmission] = deque()
        self.contenders: dict[int, "NodeMac"] = {}
        self.macs: dict[int, "NodeMac"] = {}
        self._cs_dbm = txp.carrier_sense_threshold
        self._rx_mw = float(phy.dbm_to_mw(txp.rx_threshold))
        self._capture_ratio = 10.0 ** (txp.capture_margin / 10.0)
        self._horizon = 0.005                 # overlap history window, grown as needed
        self._geometry: dict[int, tuple] = {}   # sender -> cached link budget

    def register(self, mac: "NodeMac"):
        self.macs[mac.node_id] = mac

    # -- medium state --------------------------------------------------------

    def busy_tx(self, node_id: int):
        """The sensed in-flight transmission ending last; None when idle."""
        latest = None
        for tx in self.active:
            if tx.mean_dbm[node_id] >= self._cs_dbm:
                if latest is None or tx.end > latest.end:
                    latest = tx
        return latest

    def add_countdown(self, mac: "NodeMac"):
        self.contenders[mac.node_id] = mac

    def remove_countdown(self, node_id: int):
        self.contenders.pop(node_id, None)

    # -- transmission --------------------------------------------------------

    def bump_geometry(self):
        """Invalidate cached per-sender link budgets after node positions moved."""
        self._geometry.clear()

    def _link_budget(self, sender: int):
        """Per-receiver mean power for this sender at the current geometry."""
        cached = self._geometry.get(sender)
        if cached is not None:
            return cached
        coords = self.coords_fn()
        delta = coords - coords[sender]
        d = np.sqrt(delta[:, 0] ** 2 + delta[:, 1] ** 2)
        np.maximum(d, self.nak.ref_distance, out=d)   # co-located nodes: clamp to ref
        mean_arr = self.txp.tx_power - phy.path_loss_db(d, self.nak, self.txp,
                                                        check=False)
        mean_mw = np.power(10.0, mean_arr / 10.0)
        shape = phy.shape_m(d, self.nak)
        mean_dbm = mean_arr.tolist()
        mean_dbm[sender] = math.inf
        budget = (mean_dbm, mean_mw, shape)
        self._geometry[sender] = budget
        return budget

    def transmit(self, sender: int, frame: Frame):
        now = self.sim.now
        for tx in self.active:
            if tx.sender == sender:
                raise RuntimeError(f"node {sender} already transmitting at t={now}")
        mean_dbm, mean_mw, shape = self._link_budget(sender)
        if self.loss_model == "nakagami":
            sample_mw = self.rng.gamma(shape, mean_mw / shape).tolist()
        else:
            sample_mw = mean_mw.tolist()
        sample_mw[sender] = math.inf
        end = now + frame.duration
        tx = Transmission(sender, frame, now, end, mean_dbm, sample_mw)
        self.active.append(tx)
        self.recent.append(tx)
        if frame.duration * 4.0 > self._horizon:
            self._horizon = frame.duration * 4.0
        pkt = frame.packet
        self.trace.add(now, EV_SENT, "none", LAYER_MAC, frame.trace_kind,
                       pkt.packet_id if pkt else -1,
                       pkt.flow_id if pkt else None, sender, frame.payload_size)
        cs = self._cs_dbm
        if self.contenders:
            # freeze nodes mid-countdown that sense this transmission
            for mac in list(self.contenders.values()):
                if mean_dbm[mac.node_id] >= cs:
                    mac.medium_busy(now, tx)
        self.sim.schedule(end, lambda: self._tx_end(tx), target="channel.tx_end")
        return tx

    def _overlapping(self, tx: Transmission):
        return [o for o in self.recent
                if o is not tx and o.start < tx.end and o.end > tx.start]

    def _outcome_at(self, node: int, tx: Transmission, overlapping) -> str:
        power = tx.sample_mw[node]
        if power < self._rx_mw:
            return phy.OUTCOME_FADING
        if not overlapping:
            return phy.OUTCOME_RECEIVED
        for o in overlapping:
            if o.sender == node:
                return phy.OUTCOME_COLLISION   # half-duplex: receiver was transmitting
        if not self.collisions:
            return phy.OUTCOME_RECEIVED
        return phy.frame_outcome_mw(power, [o.sample_mw[node] for o in overlapping],
                                    self._rx_mw, self._capture_ratio)

    def _tx_end(self, tx: Transmission):
        now = self.sim.now
        self.active.remove(tx)
        recent = self.recent
        cutoff = now - self._horizon
        while recent and recent[0].start < cutoff:
            recent.popleft()
        overlapping = self._overlapping(tx)
        frame = tx.frame
        if frame.dest == BROADCAST:
            mean_dbm = tx.mean_dbm
            cs = self._cs_dbm
            is_pbc = frame.packet is not None and frame.packet.kind == KIND_PBC
            for node in range(self.n_nodes):
                # only nodes within carrier range evaluate the frame
                if node == tx.sender or mean_dbm[node] < cs:
                    continue
                outcome = self._outcome_at(node, tx, overlapping)
                if outcome == phy.OUTCOME_RECEIVED:
                    mac = self.macs.get(node)
                    if mac is not None:
                        mac.frame_received(frame, tx)
                elif is_pbc:
                    reason = "fading" if outcome == phy.OUTCOME_FADING else "collision"
                    self.trace.add(now, EV_DROPPED, reason, LAYER_MAC, KIND_PBC,
                                   frame.packet.packet_id, None, node,
                                   frame.payload_size)
        else:
            node = frame.dest
            outcome = self._outcome_at(node, tx, overlapping)
            frame.last_outcome = outcome
            if outcome == phy.OUTCOME_RECEIVED:
                mac = self.macs.get(node)
                if mac is not None:
                    mac.frame_received(frame, tx)
        sender_mac = self.macs.get(tx.sender)
        if sender_mac is not None:
            sender_mac.own_tx_ended(frame)
        for mac in tx.waiters:
            mac.resume_contention()
        tx.waiters = ()


class NodeMac:
    """Per-node CSMA/CA state machine over the shared channel.

    Frozen nodes schedule their own resume at the sensed busy-until time rather
    than being polled on every transmission end.
    """

    def __init__(self, node_id, sim, channel: Channel, params, rng, trace,
                 deliver_cb, link_break_cb, drop_cb):
        self.node_id = node_id
        self.sim = sim
        self.channel = channel
        self.p = params
        self.rng = rng
        self.trace = trace
        self.deliver_cb = deliver_cb          # (packet, from_node) -> None
        self.link_break_cb = link_break_cb    # (neighbor, packet) -> None
        self.drop_cb = drop_cb                # (packet, reason) -> None
        self.queue: deque[Frame] = deque()
        self.state = IDLE
        self.cw = params.cw_min
        self.retries = 0
        self.backoff_remaining = 0
        self.wait_started = 0.0
        self._difs = params.difs
        self._done_ev = None
        self._timeout_ev = None
        self._mac_seq = 0
        self._dedupe: dict[int, int] = {}     # src -> last delivered mac_seq
        channel.register(self)

    # -- queue admission -----------------------------------------------------

    def enqueue_packet(self, packet, dest: int) -> bool:
        """FIFO admission of a network packet; False (and a trace record) when full."""
        if len(self.queue) >= self.p.queue_capacity:
            self.trace.add(self.sim.now, EV_DROPPED, "ifq", LAYER_MAC, packet.kind,
                           packet.packet_id, packet.flow_id, self.node_id, packet.size)
            if self.drop_cb is not None:
                self.drop_cb(packet, "ifq")
            return False
        self._mac_seq += 1
        frame = Frame(self.p, FRAME_DATA, self.node_id, dest, packet,
                      packet.size, self._mac_seq)
        self.queue.append(frame)
        if self.state == IDLE:
            self._start_access()
        return True

    # -- channel access ------------------------------------------------------

    def _start_access(self):
        self.retries = 0
        self.cw = self.p.cw_min
        self._new_backoff()

    def _new_backoff(self):
        self.backoff_remaining = int(self.rng.integers(0, self.cw + 1))
        self._begin_wait()

    def _begin_wait(self):
        blocker = self.channel.busy_tx(self.node_id)
        if blocker is not None:
            self.state = FROZEN
            blocker.waiters.append(self)
            return
        self.state = CONTEND
        self.channel.add_countdown(self)
        self.wait_started = self.sim.now
        fire = self.sim.now + self._difs + self.backoff_remaining * self.p.slot
        self._done_ev = self.sim.schedule(fire, self._backoff_done, target="mac.backoff")

    def resume_contention(self):
        """Woken by the channel when a transmission this node waited on ends.

        The medium may have gone busy again meanwhile; _begin_wait re-checks
        and re-registers on the new blocker, so stale wakeups are harmless."""
        if self.state == FROZEN:
            self._begin_wait()

    def _consume_slots(self, t_busy: float):
        elapsed = t_busy - (self.wait_started + self._difs)
        consumed = int(math.floor(elapsed / self.p.slot + 1e-9)) if elapsed > 0 else 0
        self.backoff_remaining -= min(max(consumed, 0), self.backoff_remaining)

    def medium_busy(self, t_busy: float, blocker):
        if self.state != CONTEND:
            return   # frozen nodes re-check the medium when their blocker ends
        if self._done_ev is not None and self._done_ev.fire_time <= self.sim.now:
            return   # backoff hit zero this same instant: transmit (and collide)
        self.sim.cancel(self._done_ev)
        self._done_ev = None
        self._consume_slots(t_busy)
        self.state = FROZEN
        self.channel.remove_countdown(self.node_id)
        blocker.waiters.append(self)

    def _backoff_done(self):
        self._done_ev = None
        self.channel.remove_countdown(self.node_id)
        frame = self.queue[0]
        self.state = TX
        self.channel.transmit(self.node_id, frame)

    # -- completion paths ----------------------------------------------------

    def own_tx_ended(self, frame: Frame):
        if frame.kind == FRAME_ACK:
            return
        if self.state != TX:
            return
        if frame.dest == BROADCAST:
            self._frame_done()
        else:
            self.state = WAIT_ACK
            ack_duration = self.p.phy_overhead + 8.0 * self.p.mac_overhead / self.p.bitrate
            timeout = self.p.sifs + ack_duration + self.p.slot
            self._timeout_ev = self.sim.after(timeout, self._ack_timeout,
                                              target="mac.ack_timeout")

    def _frame_done(self):
        self.queue.popleft()
        self.state = IDLE
        if self.queue:
            self._start_access()

    def _ack_timeout(self):
        self._timeout_ev = None
        frame = self.queue[0]
        self.retries += 1
        if self.retries > self.p.retry_limit:
            self.queue.popleft()
            self.state = IDLE
            packet = frame.packet
            # the run owns the outcome: suppress the terminal drop when the data
            # actually landed and only the ACKs were lost (packet lives downstream)
            if not frame.delivered_to_dest and self.drop_cb is not None:
                reason = "collision" if frame.last_outcome == phy.OUTCOME_COLLISION else "fading"
                self.trace.add(self.sim.now, EV_DROPPED, reason, LAYER_MAC, packet.kind,
                               packet.packet_id, packet.flow_id, self.node_id,
                               packet.size)
                self.drop_cb(packet, reason)
            if self.link_break_cb is not None:
                # may re-enter enqueue_packet on this node (e.g. a RERR broadcast)
                self.link_break_cb(frame.dest, packet)
            if self.queue and self.state == IDLE:
                self._start_access()
            return
        self.cw = min(2 * (self.cw + 1) - 1, self.p.cw_max)
        self._new_backoff()

    # -- reception -----------------------------------------------------------

    def _freeze_for_reception(self, tx_start: float):
        """Decoding a frame occupies the radio even when the transmitter sits
        below the carrier-sense threshold; the countdown must not have run
        through the frame, and nothing may transmit before the SIFS ack slot."""
        if self.state != CONTEND:
            return
        if self._done_ev is not None:
            self.sim.cancel(self._done_ev)
            self._done_ev = None
        self._consume_slots(tx_start)
        self.channel.remove_countdown(self.node_id)
        self.state = FROZEN
        self._begin_wait()

    def frame_received(self, frame: Frame, tx: Transmission):
        self._freeze_for_reception(tx.start)
        if frame.kind == FRAME_ACK:
            if (self.state == WAIT_ACK and self.queue
                    and frame.ack_for == self.queue[0].mac_seq
                    and frame.src == self.queue[0].dest):
                if self._timeout_ev is not None:
                    self.sim.cancel(self._timeout_ev)
                    self._timeout_ev = None
                self._frame_done()
            return
        if frame.dest == BROADCAST:
            self.deliver_cb(frame.packet, frame.src)
            return
        if frame.dest != self.node_id:
            return
        self._send_ack(frame)
        if self._dedupe.get(frame.src) == frame.mac_seq:
            return   # retry duplicate: ACK again but deliver once
        self._dedupe[frame.src] = frame.mac_seq
        frame.delivered_to_dest = True
        self.deliver_cb(frame.packet, frame.src)

    def _send_ack(self, data_frame: Frame):
        ack = Frame(self.p, FRAME_ACK, self.node_id, data_frame.src,
                    data_frame.packet, 0, 0, ack_for=data_frame.mac_seq)
        self.sim.after(self.p.sifs, lambda: self.channel.transmit(self.node_id, ack),
                       target="mac.ack")

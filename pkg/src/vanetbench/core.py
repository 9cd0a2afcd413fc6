"""Deterministic discrete-event engine: virtual clock, event queue, seeded RNG streams."""

import hashlib
import heapq

import numpy as np


class SchedulingError(Exception):
    """Raised when an event is scheduled in the past."""


class SimulationFault(RuntimeError):
    """A handler raised during dispatch; carries time and target context."""

    def __init__(self, time: float, target: str, cause: BaseException):
        super().__init__(f"handler fault at t={time!r} in {target!r}: {cause!r}")
        self.time = time
        self.target = target
        self.cause = cause


class Event:
    """One scheduled callback. Equal fire times dispatch in ascending sequence order."""

    __slots__ = ("fire_time", "sequence", "target", "payload", "fired", "cancelled")

    def __init__(self, fire_time: float, sequence: int, target: str, payload):
        self.fire_time = fire_time
        self.sequence = sequence
        self.target = target
        self.payload = payload  # zero-arg callable, opaque to the engine
        self.fired = False
        self.cancelled = False


# EventHandle is the event itself; exposed under the contract name.
EventHandle = Event


class Simulator:
    """Single-threaded event loop with a monotone virtual clock (seconds)."""

    def __init__(self, record_log: bool = False):
        self.now = 0.0
        # heap keyed by (fire_time, sequence) tuples for C-level comparisons
        self._queue: list[tuple[float, int, Event]] = []
        self._seq = 0
        self.record_log = record_log
        self.dispatch_log: list[tuple[float, int, str]] = []

    def schedule(self, at: float, action, target: str = "") -> EventHandle:
        """Schedule `action()` at absolute time `at`; returns a cancellable handle."""
        if at < self.now:
            raise SchedulingError(f"cannot schedule at t={at!r}, clock is {self.now!r}")
        ev = Event(at, self._seq, target or getattr(action, "__qualname__", "?"), action)
        heapq.heappush(self._queue, (at, self._seq, ev))
        self._seq += 1
        return ev

    def after(self, delay: float, action, target: str = "") -> EventHandle:
        return self.schedule(self.now + delay, action, target)

    def cancel(self, handle: EventHandle) -> bool:
        """True if the event was pending and is now removed; False otherwise."""
        if handle.fired or handle.cancelled:
            return False
        handle.cancelled = True
        return True

    def run_until(self, t_end: float) -> int:
        """Dispatch all events with fire_time <= t_end in order; clock ends at t_end."""
        if t_end < self.now:
            raise SchedulingError(f"run_until({t_end!r}) is before clock {self.now!r}")
        count = 0
        q = self._queue
        while q and q[0][0] <= t_end:
            at, _, ev = heapq.heappop(q)
            if ev.cancelled:
                continue
            self.now = at
            ev.fired = True
            if self.record_log:
                self.dispatch_log.append((at, ev.sequence, ev.target))
            try:
                ev.payload()
            except Exception as exc:
                raise SimulationFault(at, ev.target, exc) from exc
            count += 1
        self.now = t_end
        return count

    def pending(self) -> int:
        return sum(1 for _, _, ev in self._queue if not ev.cancelled)


class RngStreams:
    """Named independent random streams derived from one 64-bit master seed.

    Same (seed, label) always yields the identical sample sequence; distinct
    labels yield statistically independent streams, so adding draws on one
    stream never perturbs another.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: dict[str, np.random.Generator] = {}

    def stream(self, label: str) -> np.random.Generator:
        gen = self._streams.get(label)
        if gen is None:
            digest = hashlib.sha256(label.encode("utf-8")).digest()
            child = np.random.SeedSequence([self.seed, int.from_bytes(digest[:8], "big")])
            gen = np.random.default_rng(child)
            self._streams[label] = gen
        return gen

"""Event engine: ordering, cancellation, determinism, RNG streams."""

import random

import numpy as np
import pytest

from vanetbench.core import RngStreams, SchedulingError, SimulationFault, Simulator


def test_same_time_scheduling_dispatches():
    sim = Simulator()
    fired = []
    sim.schedule(0.0, lambda: fired.append("a"))
    assert sim.run_until(1.0) == 1
    assert fired == ["a"]


def test_tie_break_by_sequence():
    sim = Simulator()
    order = []
    sim.schedule(5.0, lambda: order.append("first"))
    sim.schedule(5.0, lambda: order.append("second"))
    sim.run_until(10.0)
    assert order == ["first", "second"]


def test_past_time_scheduling_rejected():
    sim = Simulator()
    sim.schedule(2.0, lambda: None)
    sim.run_until(2.0)
    with pytest.raises(SchedulingError):
        sim.schedule(1.0, lambda: None)


def test_run_until_empty_queue():
    sim = Simulator()
    assert sim.run_until(100.0) == 0
    assert sim.now == 100.0


def test_run_until_boundary():
    sim = Simulator()
    hits = []
    for t in (1.0, 2.0, 3.0):
        sim.schedule(t, lambda t=t: hits.append(t))
    assert sim.run_until(2.5) == 2
    assert hits == [1.0, 2.0]
    assert sim.now == 2.5


def test_cancel_semantics():
    sim = Simulator()
    fired = []
    h = sim.schedule(1.0, lambda: fired.append(1))
    assert sim.cancel(h) is True
    assert sim.cancel(h) is False
    sim.run_until(2.0)
    assert fired == []

    h2 = sim.schedule(3.0, lambda: fired.append(2))
    sim.run_until(4.0)
    assert sim.cancel(h2) is False   # already dispatched
    assert fired == [2]


def test_handler_fault_carries_context():
    sim = Simulator()

    def boom():
        raise ValueError("nope")

    sim.schedule(7.5, boom, target="bad.handler")
    with pytest.raises(SimulationFault) as err:
        sim.run_until(10.0)
    assert err.value.time == 7.5
    assert err.value.target == "bad.handler"


def _random_workload(sim, seed):
    rng = random.Random(seed)

    def spawn(depth):
        if depth > 0 and sim.pending() < 500:
            at = sim.now + rng.uniform(0.0, 3.0)
            sim.schedule(at, lambda: spawn(depth - 1), target=f"d{depth}")

    for _ in range(50):
        sim.schedule(rng.uniform(0.0, 5.0), lambda: spawn(3), target="seed")


def test_dispatch_log_is_strictly_ordered():
    sim = Simulator(record_log=True)
    _random_workload(sim, 99)
    sim.run_until(30.0)
    keys = [(t, seq) for t, seq, _ in sim.dispatch_log]
    assert keys == sorted(keys)
    assert len(set(keys)) == len(keys)


def test_identical_seed_identical_dispatch_log():
    logs = []
    for _ in range(2):
        sim = Simulator(record_log=True)
        _random_workload(sim, 1234)
        sim.run_until(30.0)
        logs.append(sim.dispatch_log)
    assert logs[0] == logs[1]


def test_clock_never_moves_backward():
    sim = Simulator(record_log=True)
    _random_workload(sim, 5)
    sim.run_until(20.0)
    times = [t for t, _, _ in sim.dispatch_log]
    assert all(a <= b for a, b in zip(times, times[1:]))


def test_rng_streams_reproducible():
    a = RngStreams(42).stream("mobility").uniform(size=16)
    b = RngStreams(42).stream("mobility").uniform(size=16)
    assert np.array_equal(a, b)


def test_rng_streams_label_independence():
    streams = RngStreams(42)
    a = streams.stream("mobility").uniform(size=20000)
    b = streams.stream("channel").uniform(size=20000)
    assert not np.array_equal(a[:16], b[:16])
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.05


def test_rng_streams_cached_instance():
    streams = RngStreams(7)
    assert streams.stream("mac") is streams.stream("mac")

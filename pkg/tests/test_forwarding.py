"""Shared data plane: delivery, forward records, TTL, buffers, no-route drops."""

import pytest

from vanetbench.packets import KIND_CBR, Packet

from conftest import fast_convergence_config, line_positions, make_net


def test_local_destination_delivers_without_forward_record():
    net = make_net(line_positions(2, 150.0), "aodv")
    pkt = Packet(KIND_CBR, 1, 0, 512, 777)
    net.trace.add(0.0, "sent", "none", "app", "cbr", 777, None, 1, 512)
    net.stacks[0].routing.forward_data(pkt, from_node=1)
    received = [r for r in net.trace.records
                if r.layer == "app" and r.event == "received"]
    assert len(received) == 1 and received[0].node == 0
    assert net.aggregator.forwards() == 0


def test_one_hop_no_forward_records():
    net = make_net(line_positions(2, 150.0), "aodv")
    net.send_data(0, 1)
    net.run_for(1.0)
    assert net.aggregator.sent() == 1
    assert net.aggregator.received() == 1
    assert net.aggregator.forwards() == 0


def test_three_hop_route_two_forward_records():
    net = make_net(line_positions(4, 240.0), "aodv")
    net.send_data(0, 3)
    net.run_for(2.0)
    assert net.aggregator.received() == 1
    assert net.aggregator.forwards() == 2


def test_ttl_expiry_drops_with_ttl_reason():
    cfg = fast_convergence_config("aodv")
    cfg.routing.ttl = 2
    net = make_net(line_positions(4, 240.0), "aodv", cfg=cfg)
    net.send_data(0, 3)                     # needs 3 hops, TTL allows 2
    net.run_for(3.0)
    net.close()
    drops = net.aggregator.drops_by_reason.get("cbr", {})
    assert drops.get("ttl") == 1
    assert net.aggregator.received() == 0


def test_proactive_protocol_drops_immediately_without_route():
    net = make_net(line_positions(3, 240.0), "dsdv")
    net.send_data(0, 2)                     # nothing has converged yet
    drops = net.aggregator.drops_by_reason.get("cbr", {})
    assert drops.get("no-route") == 1


def test_reactive_buffer_holds_then_flushes():
    net = make_net(line_positions(3, 240.0), "aodv")
    for _ in range(5):
        net.send_data(0, 2)
    net.run_for(2.0)
    assert net.aggregator.received() == 5


def test_reactive_buffer_overflow_drops_oldest():
    cfg = fast_convergence_config("aodv")
    cfg.routing.buffer_packets = 4
    pos = line_positions(2, 150.0)
    pos[7] = (50_000.0, 0.0)                # unreachable destination
    net = make_net(pos, "aodv", cfg=cfg)
    for _ in range(10):
        net.send_data(0, 7)
    net.run_for(5.0)
    net.close()
    drops = net.aggregator.drops_by_reason.get("cbr", {})
    assert drops.get("no-route") == 10      # all eventually dropped
    assert net.aggregator.received() == 0


def test_buffer_timeout_drops_stale_packets():
    cfg = fast_convergence_config("aodv")
    cfg.routing.buffer_timeout = 0.5
    pos = line_positions(2, 150.0)
    pos[7] = (50_000.0, 0.0)
    net = make_net(pos, "aodv", cfg=cfg)
    net.send_data(0, 7)
    net.run_for(4.0)
    net.close()
    drops = net.aggregator.drops_by_reason.get("cbr", {})
    assert drops.get("no-route") == 1

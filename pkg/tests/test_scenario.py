"""Scenario file parsing, schema validation, defaults and the effective echo."""

import pytest

from vanetbench.scenario import (ScenarioConfig, SchemaError, effective_ini,
                                 load_scenario, parse_scenario_text)


def test_minimal_inline_file(tmp_path):
    path = tmp_path / "mini.ini"
    path.write_text("""
[graph]
vertices = a 0 0; b 250 0
edges = a b; b a

[run]
vehicles = 2

[traffic]
cbr_connections = 1
""")
    cfg, graph = load_scenario(path)
    assert len(graph.edges) == 2
    assert graph.edges["a>b"].length == 250.0
    # defaults fill everything absent
    assert cfg.mac.queue_capacity == 50
    assert cfg.traffic.packet_size == 512
    assert cfg.traffic.rate == 4.0
    assert cfg.run.duration == 100.0
    assert cfg.mobility.a_max == 0.6


def test_defaults_reproduce_reference_frame():
    cfg = ScenarioConfig()
    assert cfg.run.vehicles == 100
    assert cfg.run.duration == 100.0
    assert cfg.traffic.cbr_connections == 40
    assert cfg.mac.bitrate == 6e6
    assert cfg.phy.target_range == 250.0
    g = cfg.build_graph()
    xs = [v.x for v in g.vertices.values()]
    ys = [v.y for v in g.vertices.values()]
    assert max(xs) - min(xs) == 1000.0
    assert max(ys) - min(ys) == 1000.0
    assert all(e.lane_count == 2 for e in g.edges.values())


def test_lane_count_zero_is_schema_error(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("""
[graph]
vertices = a 0 0; b 250 0
edges = a b 0; b a 0
""")
    with pytest.raises(Exception):
        load_scenario(path)


def test_unknown_key_names_key_and_line():
    text = "[mac]\nbitrate = 6e6\nbogus_knob = 3\n"
    with pytest.raises(SchemaError) as err:
        parse_scenario_text(text)
    assert "bogus_knob" in str(err.value)
    assert "line 3" in str(err.value)


def test_bad_value_reports_line():
    text = "[run]\nduration = fast\n"
    with pytest.raises(SchemaError) as err:
        parse_scenario_text(text)
    assert "duration" in str(err.value)
    assert "line 2" in str(err.value)


def test_unknown_protocol_rejected():
    with pytest.raises(SchemaError, match="protocol"):
        parse_scenario_text("[routing]\nprotocol = ospf\n")


def test_cw_shape_validated():
    with pytest.raises(SchemaError, match="cw_min"):
        parse_scenario_text("[mac]\ncw_min = 14\n")


def test_recalc_must_be_multiple_of_dt():
    with pytest.raises(SchemaError, match="recalc_step"):
        parse_scenario_text("[mobility]\nrecalc_step = 0.25\nintegration_dt = 0.1\n")


def test_flows_bounded_by_ordered_pairs():
    with pytest.raises(SchemaError, match="cbr_connections"):
        parse_scenario_text("[run]\nvehicles = 2\n[traffic]\ncbr_connections = 3\n")


def test_effective_ini_round_trips():
    cfg = ScenarioConfig()
    cfg.run.seed = 9
    cfg.routing.protocol = "olsr"
    cfg.mobility.model = "idm-lc"
    cfg.phy.rx_threshold = -79.5
    text = effective_ini(cfg)
    again = parse_scenario_text(text)
    assert again.run.seed == 9
    assert again.routing.protocol == "olsr"
    assert again.mobility.model == "idm-lc"
    assert again.phy.rx_threshold == -79.5
    assert effective_ini(again) == text


def test_grid_spec_parsing():
    cfg = parse_scenario_text("[graph]\ngrid = 3 4 125.5\n")
    assert cfg.graph.grid == (3, 4, 125.5)
    g = cfg.build_graph()
    assert len(g.vertices) == 12

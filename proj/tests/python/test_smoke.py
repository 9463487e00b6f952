import json
import math

import pytest

import netdt


def routed(nodes=6, seed=3):
    s = netdt.route_all_pairs(netdt.generate_topology(nodes, seed))
    for f in s["flows"]:
        f["traffic"]["avg_rate"] = 1e5
        f["traffic"]["avg_pkt_size"] = 2000
    return s


def test_topology_is_valid():
    s = netdt.generate_topology(10, 4)
    assert s["nodes"] == 10
    assert len(s["links"]) >= 10
    assert netdt.validate(s) == []


def test_routing_gives_full_mesh():
    s = routed(6)
    assert len(s["flows"]) == 30
    assert netdt.validate(s) == []


def test_broken_sample_reports_violations():
    s = routed(5)
    s["flows"][0]["path"][0]["queue_id"] = 999
    assert netdt.validate(s)
    with pytest.raises(ValueError):
        netdt.Model(hidden=16, iterations=2).predict(s)


def test_simulation_labels_every_entity():
    s = netdt.simulate(routed(5), warmup=1.0, measure=5.0, seed=2)
    labels = s["labels"]
    assert len(labels["flows"]) == len(s["flows"])
    assert len(labels["queues"]) == len(s["queues"])
    assert all(0.0 <= q["mean_occupancy"] <= 1.0 for q in labels["queues"])
    assert netdt.validate(s) == []


def test_prediction_shape_and_range(tmp_path):
    s = routed(7)
    m = netdt.Model(hidden=16, iterations=3, seed=5)
    p = m.predict(s)
    assert len(p["delay"]) == len(s["flows"])
    assert len(p["occupancy"]) == len(s["queues"])
    assert all(0.0 < o < 1.0 for o in p["occupancy"])
    assert all(math.isfinite(d) and d > 0.0 for d in p["delay"])

    path = tmp_path / "model.json"
    m.save(path)
    again = netdt.Model.load(path)
    assert again.hidden == 16 and again.iterations == 3
    assert again.predict(json.dumps(s)) == p


def test_bad_model_config():
    with pytest.raises(ValueError):
        netdt.Model(hidden=2)

import csv
import itertools
import json

import pytest

import cdp_lab


def test_presets_and_policies():
    assert {"base", "median", "large", "desk", "small_tw"} <= set(cdp_lab.preset_names())
    assert {"random", "ghav", "ghep", "mbm", "marl-b", "marl-ep"} <= set(cdp_lab.policy_names())
    desk = cdp_lab.scenario_preset("desk")
    assert desk["width"] == 8


def test_instance_is_deterministic():
    a = cdp_lab.build_instance("desk", 5)
    b = cdp_lab.build_instance("desk", 5)
    c = cdp_lab.build_instance("desk", 6)
    assert a == b
    assert a != c
    assert len(a["requests"]) > 0


def test_load_instance_round_trip(tmp_path):
    inst = cdp_lab.build_instance("desk", 2)
    path = tmp_path / "inst.json"
    path.write_text(json.dumps(inst))
    assert cdp_lab.load_instance(str(path)) == inst


def test_bad_instance_is_rejected(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"schema": "nope"}')
    with pytest.raises(ValueError):
        cdp_lab.load_instance(str(path))


def test_baselines_score_in_range():
    inst = cdp_lab.build_instance("desk", 1)
    scores = {}
    for policy in ("random", "ghav", "ghep", "mbm"):
        result = cdp_lab.run_episode(inst, policy, seed=3)
        assert 0.0 <= result["score"] <= 1.0
        scores[policy] = result["score"]
    assert scores["ghep"] > scores["random"]


def test_learned_policy_needs_checkpoint():
    inst = cdp_lab.build_instance("desk", 1)
    with pytest.raises(ValueError):
        cdp_lab.run_episode(inst, "marl-b")


def test_benchmark_csv():
    config = cdp_lab.default_config()
    config["bench"].update({"instances": 2, "seed": 4, "policies": ["random", "ghav"]})
    rows, text = cdp_lab.benchmark("desk", config)
    assert [r["policy"] for r in rows] == ["random", "ghav"]
    assert all(len(r["scores"]) == 2 for r in rows)
    parsed = list(csv.DictReader(text.splitlines()))
    assert len(parsed) == 2


def test_plan_route_matches_brute_force():
    requests = [
        {"id": 1, "x": 0.4, "y": 0.2, "earliest": 0, "latest": 20, "service": 2, "price": 3},
        {"id": 2, "x": 0.9, "y": 0.8, "earliest": 5, "latest": 15, "service": 3, "price": 5},
        {"id": 3, "x": 0.1, "y": 0.9, "earliest": 0, "latest": 8, "service": 1, "price": 2},
    ]
    route = cdp_lab.plan_route(requests, (0.5, 0.5), 0.0, 30.0)
    assert route["end_time"] <= 30.0 + 1e-9
    assert route["total_price"] == pytest.approx(
        sum(r["price"] for r in requests if r["id"] in {s["id"] for s in route["stops"]})
    )
    for stop in route["stops"]:
        req = next(r for r in requests if r["id"] == stop["id"])
        assert req["earliest"] - 1e-9 <= stop["start"] <= req["latest"] + 1e-9


def test_matching_matches_enumeration():
    w = [[3, 1, 4], [1, 5, 9], [2, 6, 5]]
    cols, value = cdp_lab.max_weight_matching(w)
    best = max(sum(w[r][p[r]] for r in range(3)) for p in itertools.permutations(range(3)))
    assert value == pytest.approx(best)
    assert sorted(cols) == [0, 1, 2]


def test_short_training_and_export(tmp_path):
    config = cdp_lab.default_config()
    config["scenario"] = cdp_lab.scenario_preset("desk")
    config["train"].update({"episodes": 2, "eval_every": 2, "eval_instances": 1, "hidden": 16})
    seen = []
    ckpt = tmp_path / "ck.json"
    curve_csv = tmp_path / "curve.csv"
    curve = cdp_lab.train(config, str(ckpt), str(curve_csv), progress=seen.append)
    assert len(curve) == 2
    assert len(seen) == 2
    assert ckpt.exists() and curve_csv.exists()

    inst = cdp_lab.build_instance("desk", 9)
    result = cdp_lab.run_episode(inst, "marl-b", checkpoint=str(ckpt), config=config)
    assert 0.0 <= result["score"] <= 1.0

    prefix = tmp_path / "traj"
    cdp_lab.export_trajectories(inst, ["random", "marl-b"], str(prefix),
                                checkpoints={"marl-b": str(ckpt)}, config=config)
    data = json.loads((tmp_path / "traj.json").read_text())
    assert data
    assert (tmp_path / "traj.csv").exists()

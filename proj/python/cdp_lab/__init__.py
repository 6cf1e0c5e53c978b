"""Python access to the courier dispatching lab."""

import json

from . import _core
from ._core import ConfigError, DispatchError, SchemaError, max_weight_matching

__all__ = [
    "ConfigError",
    "DispatchError",
    "SchemaError",
    "bench_instance",
    "benchmark",
    "build_instance",
    "default_config",
    "export_trajectories",
    "load_instance",
    "max_weight_matching",
    "plan_route",
    "policy_names",
    "preset_names",
    "run_episode",
    "scenario_preset",
    "train",
]


def _scenario_text(scenario):
    if isinstance(scenario, str):
        return _core.scenario_preset(scenario)
    return json.dumps(scenario)


def _config_text(config):
    return "" if config is None else json.dumps(config)


def _instance_text(instance):
    return instance if isinstance(instance, str) else json.dumps(instance)


def preset_names():
    return list(_core.preset_names())


def policy_names():
    return list(_core.policy_names())


def scenario_preset(name):
    return json.loads(_core.scenario_preset(name))


def default_config():
    return json.loads(_core.default_config())


def build_instance(scenario, seed):
    """Generated instance as a dict. `scenario` is a preset name or dict."""
    return json.loads(_core.build_instance(_scenario_text(scenario), seed))


def bench_instance(scenario, master_seed, index):
    """Instance `index` of a benchmark run with the given master seed."""
    return json.loads(_core.bench_instance(_scenario_text(scenario), master_seed, index))


def load_instance(path):
    with open(path, encoding="utf-8") as f:
        return json.loads(_core.validate_instance(f.read()))


def run_episode(instance, policy, seed=0, checkpoint="", config=None):
    return json.loads(
        _core.run_episode(_instance_text(instance), policy, seed, checkpoint, _config_text(config))
    )


def benchmark(scenarios, config=None, checkpoints=None):
    """Returns (rows, csv_text)."""
    if isinstance(scenarios, (str, dict)):
        scenarios = [scenarios]
    rows, csv_text = _core.benchmark(
        [_scenario_text(s) for s in scenarios], _config_text(config), checkpoints or {}
    )
    return json.loads(rows), csv_text


def plan_route(requests, start, start_time, budget, speed=0.5):
    """Pickup tour from `start` over request dicts with keys id, x, y,
    earliest, latest, service and price. Legs are straight-line."""
    return json.loads(
        _core.plan_route(json.dumps(list(requests)), start[0], start[1], start_time, budget, speed)
    )


def train(config=None, checkpoint="", curve_csv="", progress=None):
    """Trains with a lab config dict and returns the learning curve."""
    callback = None if progress is None else (lambda text: progress(json.loads(text)))
    return json.loads(_core.train(_config_text(config), checkpoint, curve_csv, callback))


def export_trajectories(instance, policies, prefix, seed=0, checkpoints=None, config=None):
    """Writes <prefix>.json and <prefix>.csv."""
    _core.export_trajectories(
        _instance_text(instance), list(policies), prefix, seed, checkpoints or {}, _config_text(config)
    )

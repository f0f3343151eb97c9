"""Scenario files: strict, versioned YAML documents describing one run.

Unknown keys are rejected at every level so typos fail loudly. Matrices
are nested row arrays, the graph an explicit edge list, adversaries tagged
objects. ``scenario_to_dict``/``scenario_from_dict`` round-trip, with
defaults materialized, so a parsed-serialized-parsed scenario is stable.
"""

from __future__ import annotations

import hashlib
import json
from importlib import resources
from pathlib import Path
from typing import Dict, Optional

import numpy as np
import yaml

from .adversary import AdversaryStrategy, strategy_from_config
from .engine import ChannelSpec, SimConfig
from .errors import ConfigInvalid, DomainError
from .graphs import Digraph
from .lti import Plant

SCHEMA_VERSION = 1

_TOP_KEYS = {
    "version", "name", "plant", "graph", "f", "adversaries", "protocol",
    "channel", "horizon", "x0", "gamma_local", "weight_rule", "m", "seed", "trials",
}
_PLANT_KEYS = {"a", "sensors"}
_GRAPH_KEYS = {"nodes", "edges"}
_CHANNEL_KEYS = {"kind", "T", "p", "e"}
_ADV_KEYS = {"node", "strategy", "params"}


class ScenarioError(ConfigInvalid):
    """A scenario document is malformed."""


def _require(cond, msg):
    if not cond:
        raise ScenarioError(msg)


def _check_keys(d: dict, allowed: set, where: str):
    _require(isinstance(d, dict), f"{where} must be a mapping")
    unknown = set(d) - allowed
    _require(not unknown, f"unknown keys {sorted(unknown)} in {where}")


def scenario_from_dict(doc: dict) -> SimConfig:
    _check_keys(doc, _TOP_KEYS, "scenario")
    _require(doc.get("version") == SCHEMA_VERSION,
             f"scenario must declare version: {SCHEMA_VERSION}")
    for key in ("plant", "graph", "f", "protocol", "channel", "x0"):
        _require(key in doc, f"missing required key {key!r}")

    plant_doc = doc["plant"]
    _check_keys(plant_doc, _PLANT_KEYS, "plant")
    _require("a" in plant_doc and "sensors" in plant_doc, "plant needs 'a' and 'sensors'")
    try:
        plant = Plant(plant_doc["a"], [np.asarray(c, dtype=float) for c in plant_doc["sensors"]])
    except Exception as exc:
        raise ScenarioError(f"bad plant: {exc}") from exc

    graph_doc = doc["graph"]
    _check_keys(graph_doc, _GRAPH_KEYS, "graph")
    _require("nodes" in graph_doc and "edges" in graph_doc, "graph needs 'nodes' and 'edges'")
    try:
        graph = Digraph(int(graph_doc["nodes"]), [tuple(e) for e in graph_doc["edges"]])
    except Exception as exc:
        raise ScenarioError(f"bad graph: {exc}") from exc

    adversaries: Dict[int, AdversaryStrategy] = {}
    for entry in doc.get("adversaries", []) or []:
        _check_keys(entry, _ADV_KEYS, "adversary entry")
        _require("node" in entry and "strategy" in entry,
                 "adversary entries need 'node' and 'strategy'")
        node = int(entry["node"])
        _require(node not in adversaries, f"duplicate adversary node {node}")
        try:
            adversaries[node] = strategy_from_config(entry["strategy"], entry.get("params"))
        except DomainError as exc:
            raise ScenarioError(str(exc)) from exc

    ch = doc["channel"]
    _check_keys(ch, _CHANNEL_KEYS, "channel")
    _require("kind" in ch, "channel needs 'kind'")
    channel = ChannelSpec(
        kind=str(ch["kind"]),
        window=None if ch.get("T") is None else int(ch["T"]),
        p=None if ch.get("p") is None else float(ch["p"]),
        e=None if ch.get("e") is None else float(ch["e"]),
    )

    horizon = doc.get("horizon")
    cfg = SimConfig(
        plant=plant,
        graph=graph,
        f=int(doc["f"]),
        adversaries=adversaries,
        channel=channel,
        protocol=str(doc["protocol"]),
        x0=np.asarray(doc["x0"], dtype=float).reshape(-1),
        horizon=None if horizon is None else int(horizon),
        gamma_local=float(doc.get("gamma_local", 0.5)),
        weight_rule=str(doc.get("weight_rule", "uniform")),
        m=int(doc.get("m", 3)),
        seed=int(doc.get("seed", 0)),
        trials=int(doc.get("trials", 100)),
        name=str(doc.get("name", "scenario")),
    )
    return cfg


def scenario_to_dict(cfg: SimConfig) -> dict:
    """Canonical dict form with defaults materialized (round-trip stable)."""
    return {
        "version": SCHEMA_VERSION,
        "name": cfg.name,
        "plant": {
            "a": [[float(v) for v in row] for row in cfg.plant.a],
            "sensors": [[[float(v) for v in row] for row in c] for c in cfg.plant.sensors],
        },
        "graph": {
            "nodes": cfg.graph.n,
            "edges": [[j, i] for j, i in sorted(cfg.graph.edges)],
        },
        "f": cfg.f,
        "adversaries": [
            {"node": node, "strategy": strat.name, "params": strat.params()}
            for node, strat in sorted(cfg.adversaries.items())
        ],
        "protocol": cfg.protocol,
        "channel": {
            "kind": cfg.channel.kind,
            "T": cfg.channel.window,
            "p": cfg.channel.p,
            "e": cfg.channel.e,
        },
        "horizon": cfg.horizon,
        "x0": [float(v) for v in np.asarray(cfg.x0).reshape(-1)],
        "gamma_local": cfg.gamma_local,
        "weight_rule": cfg.weight_rule,
        "m": cfg.m,
        "seed": cfg.seed,
        "trials": cfg.trials,
    }


def config_digest(cfg: SimConfig) -> str:
    payload = json.dumps(scenario_to_dict(cfg), sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()


def load_scenario(path) -> SimConfig:
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    _require(isinstance(doc, dict), f"{path}: scenario must be a mapping")
    cfg = scenario_from_dict(doc)
    if cfg.name == "scenario":
        cfg.name = Path(path).stem
    return cfg


def dump_scenario(cfg: SimConfig, path):
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(scenario_to_dict(cfg), fh, sort_keys=False)


def bundled_path(name: str) -> Optional[Path]:
    """Path of a bundled scenario (by stem) or data file (by filename)."""
    root = resources.files("resilient_observer") / "data"
    for candidate in (name, f"{name}.yaml", f"{name}.edges"):
        p = root / candidate
        if p.is_file():
            return Path(str(p))
    return None


def bundled_scenarios() -> Dict[str, Path]:
    root = resources.files("resilient_observer") / "data"
    out = {}
    for entry in root.iterdir():
        if entry.name.endswith(".yaml"):
            out[entry.name[: -len(".yaml")]] = Path(str(entry))
    return dict(sorted(out.items()))

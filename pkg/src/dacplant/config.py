"""Scenario configuration: defaults, strict schema validation and id resolution.

``parse_config`` returns a fully populated dict or raises ``ConfigError`` carrying
every problem found (schema, range and cross-reference), never just the first.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from typing import Any

import jsonschema

DEFAULTS: dict[str, Any] = {
    "arena": {
        "width": 10.0, "height": 8.0, "cell_size": 0.5,
        "obstacles": [],
        "home": [0.2, 0.2, 1.8, 1.8],
        "sorting": [0.2, 0.2, 1.8, 1.8],
        "landmarks": [],
        "conveyor": {"points": [], "speed": 0.05},
        "benches": [],
    },
    "sensors": {"rays": 8, "max_range": 3.0, "fov": math.pi, "cue_range": 3.0},
    "bins": {"capacity": 4, "replacement_fill": 0, "reach": 0.5},
    "battery": {"drain_idle": 0.0, "drain_per_m": 0.0, "charge_rate": 0.01},
    "devices": {
        "models": [], "n_models": 0, "step_duration": 20, "fail_duration": 5, "tol": 0.1,
        "arrivals": [], "period": 0, "queue_max": 2,
    },
    "mobile": [],
    "grippers": [],
    "workers": [],
    "swaps": [],
    "dac": {
        "eta": 0.05, "rho": 0.01, "theta_a": 0.5, "theta_c": 0.5, "gamma": 0.9, "beta": 1.5,
        "lam": 0.95, "stm": 50, "ltm": 200, "cap": 0.3,
        "mobile": {}, "gripper": {},
    },
    "agents": {
        "d_min": 0.4, "d_max": 1.2, "d_stop": 0.5, "delta_approach": 0.002, "delta_retreat": 0.01,
        "discomfort_scale": 0.1, "segment_spacing": 0.5, "place_cell": 1.0, "pref_weight": 0.2,
        "explore_turn": 0.3, "need_relax": 0.002,
    },
    "plant": {
        "central": True, "latency": 1, "drop": 0.0, "exchange_period": 200, "orchestrate_period": 10,
        "estop_release": 10, "d_crit": 0.3, "envelope": 0.5, "w_c": 0.5, "modulation_ttl": 40,
        "ema_weight": 0.1, "throughput_setpoint": 10.0, "congestion_setpoint": 1.0,
    },
    "bench": {"d_near": 0.8, "eps_adapt": 0.1, "seeds": 20, "ticks": 20000},
    "run": {"ticks": 1000, "seed": 0, "snapshot_in": None, "snapshot_out": None},
}

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_unit = {"type": "number", "minimum": 0, "maximum": 1}
_int0 = {"type": "integer", "minimum": 0}
_int1 = {"type": "integer", "minimum": 1}
_pt = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_rect = {"type": "array", "items": _num, "minItems": 4, "maxItems": 4}
_id = {"type": "string", "minLength": 1}


def _obj(props: dict, required: tuple = ()) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False, "required": list(required)}


_dac_block = {
    "eta": _nonneg, "rho": _nonneg, "theta_a": _num, "theta_c": _num, "gamma": _unit, "beta": _pos,
    "lam": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}, "stm": _int1, "ltm": _int1,
    "cap": _unit,
}

SCHEMA = _obj({
    "arena": _obj({
        "width": _pos, "height": _pos, "cell_size": _pos,
        "obstacles": {"type": "array", "items": _rect},
        "home": _rect, "sorting": _rect,
        "landmarks": {"type": "array", "items": _obj({"id": {"type": "integer"}, "x": _num, "y": _num},
                                                     ("id", "x", "y"))},
        "conveyor": _obj({"points": {"type": "array", "items": _pt}, "speed": _nonneg}),
        "benches": {"type": "array", "items": _obj({
            "id": _id, "x": _num, "y": _num, "marker": {"type": "integer"}, "slot": _pt, "gripper_base": _pt,
            "worker": {"type": ["string", "null"]},
            "materials": {"type": "array", "items": {"enum": ["Plastic", "Metal", "Paper", "Hazardous"]},
                          "uniqueItems": True},
            "fill_period": _int0,
        }, ("id", "x", "y", "marker"))},
    }),
    "sensors": _obj({"rays": _int1, "max_range": _pos, "fov": {"type": "number", "exclusiveMinimum": 0,
                                                             "maximum": 2 * math.pi}, "cue_range": _pos}),
    "bins": _obj({"capacity": _int1, "replacement_fill": _int0, "reach": _pos}),
    "battery": _obj({"drain_idle": _unit, "drain_per_m": _nonneg, "charge_rate": _unit}),
    "devices": _obj({
        "models": {"type": "array", "items": _obj({
            "id": _id,
            "materials": {"type": "array", "items": {"enum": ["Plastic", "Metal", "Paper", "Hazardous"]},
                          "minItems": 4, "maxItems": 4},
            "valid_order": {"type": "array", "items": {"type": "integer", "minimum": 0, "maximum": 3},
                            "minItems": 4, "maxItems": 4},
            "bands": {"type": "array", "items": {"type": "array", "items": _unit, "minItems": 2, "maxItems": 2},
                      "minItems": 4, "maxItems": 4},
            "durations": {"type": "array", "items": _int1, "minItems": 4, "maxItems": 4},
        }, ("id",))},
        "n_models": _int0, "step_duration": _int1, "fail_duration": _int1, "tol": _nonneg,
        "arrivals": {"type": "array", "items": _obj({"tick": _int0, "model": _id, "bench": _id},
                                                    ("tick", "model", "bench"))},
        "period": _int0, "queue_max": _int1,
    }),
    "mobile": {"type": "array", "items": _obj({
        "id": _id, "x": _num, "y": _num, "heading": _num, "radius": _pos, "max_speed": _pos,
        "max_turn": _pos, "battery": _unit,
    }, ("id", "x", "y"))},
    "grippers": {"type": "array", "items": _obj({"id": _id, "bench": _id, "standoff": _nonneg},
                                                ("id", "bench"))},
    "workers": {"type": "array", "items": _obj({
        "id": _id, "cue": {"type": "integer"}, "trust": _unit, "skill": _unit, "pace": _unit,
        "radius": _pos, "sway": _nonneg,
        "gestures": {"type": "array", "items": {"type": "array", "minItems": 2, "maxItems": 2,
                                                 "prefixItems": [_int0, {"type": "string"}]}},
    }, ("id", "cue"))},
    "swaps": {"type": "array", "items": _obj({"tick": _int0, "workers": {"type": "array", "items": _id,
                                                                         "minItems": 2, "maxItems": 2}},
                                             ("tick", "workers"))},
    "dac": _obj(dict(_dac_block, mobile=_obj(_dac_block), gripper=_obj(_dac_block))),
    "agents": _obj({
        "d_min": _nonneg, "d_max": _nonneg, "d_stop": _nonneg, "delta_approach": _nonneg,
        "delta_retreat": _nonneg, "discomfort_scale": _pos, "segment_spacing": _pos, "place_cell": _pos,
        "pref_weight": _nonneg, "explore_turn": _nonneg, "need_relax": _nonneg,
    }),
    "plant": _obj({
        "central": {"type": "boolean"}, "latency": _int1,
        "drop": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "exchange_period": _int1, "orchestrate_period": _int1, "estop_release": _int1, "d_crit": _nonneg,
        "envelope": _nonneg, "w_c": _nonneg, "modulation_ttl": _int1,
        "ema_weight": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "throughput_setpoint": _nonneg, "congestion_setpoint": _nonneg,
    }),
    "bench": _obj({"d_near": _pos, "eps_adapt": _pos, "seeds": _int1, "ticks": _int0}),
    "run": _obj({"ticks": _int0, "seed": {"type": "integer"}, "snapshot_in": {"type": ["string", "null"]},
                 "snapshot_out": {"type": ["string", "null"]}}),
})

BENCH_DEFAULTS = {"slot": None, "gripper_base": None, "worker": None,
                  "materials": ["Plastic", "Metal", "Paper", "Hazardous"], "fill_period": 0}
MOBILE_DEFAULTS = {"heading": 0.0, "radius": 0.3, "max_speed": 0.05, "max_turn": 0.5, "battery": 1.0}
GRIPPER_DEFAULTS = {"standoff": 0.8}
WORKER_DEFAULTS = {"trust": 0.5, "skill": 0.5, "pace": 0.5, "radius": 0.25, "sway": 0.03, "gestures": []}


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("invalid configuration:\n  " + "\n  ".join(errors))


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("mobile", "gripper"):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _path(e: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in e.absolute_path) or "<root>"


def parse_config(doc: dict) -> dict:
    """Validate a document and return it with every default filled in."""
    if not isinstance(doc, dict):
        raise ConfigError(["<root>: document must be an object"])
    v = jsonschema.Draft202012Validator(SCHEMA)
    errs = [f"{_path(e)}: {e.message}" for e in sorted(v.iter_errors(doc), key=lambda e: list(e.absolute_path))]
    if errs:
        raise ConfigError(errs)
    cfg = _merge(DEFAULTS, doc)
    cfg["dac"]["mobile"] = dict(doc.get("dac", {}).get("mobile", {}))
    cfg["dac"]["gripper"] = dict(doc.get("dac", {}).get("gripper", {}))
    for b in cfg["arena"]["benches"]:
        for k, d in BENCH_DEFAULTS.items():
            b.setdefault(k, copy.deepcopy(d))
        if b["slot"] is None:
            b["slot"] = [b["x"], b["y"] + 1.0]
        if b["gripper_base"] is None:
            b["gripper_base"] = [b["x"] + 1.5, b["y"] + 1.0]
    for m in cfg["mobile"]:
        for k, d in MOBILE_DEFAULTS.items():
            m.setdefault(k, d)
    for g in cfg["grippers"]:
        for k, d in GRIPPER_DEFAULTS.items():
            g.setdefault(k, d)
    for w in cfg["workers"]:
        for k, d in WORKER_DEFAULTS.items():
            w.setdefault(k, copy.deepcopy(d))
    errs = resolve(cfg)
    if errs:
        raise ConfigError(errs)
    return cfg


def resolve(cfg: dict) -> list[str]:
    errs = []
    ids: dict[str, str] = {}
    for section in ("mobile", "grippers", "workers"):
        for i, item in enumerate(cfg[section]):
            if item["id"] in ids:
                errs.append(f"{section}/{i}/id: duplicate id {item['id']!r} (also in {ids[item['id']]})")
            ids[item["id"]] = section
    workers = {w["id"] for w in cfg["workers"]}
    benches = {}
    for i, b in enumerate(cfg["arena"]["benches"]):
        if b["id"] in benches:
            errs.append(f"arena/benches/{i}/id: duplicate bench id {b['id']!r}")
        benches[b["id"]] = b
        if b["worker"] is not None and b["worker"] not in workers:
            errs.append(f"arena/benches/{i}/worker: unknown worker id {b['worker']!r}")
    bound = [b["worker"] for b in cfg["arena"]["benches"] if b["worker"] is not None]
    for w in workers:
        if bound.count(w) > 1:
            errs.append(f"workers: worker {w!r} is bound to more than one bench")
    for w in cfg["workers"]:
        if w["id"] not in bound:
            errs.append(f"workers: worker {w['id']!r} is not bound to any bench")
    for i, g in enumerate(cfg["grippers"]):
        if g["bench"] not in benches:
            errs.append(f"grippers/{i}/bench: unknown bench id {g['bench']!r}")
    if len({g["bench"] for g in cfg["grippers"]}) != len(cfg["grippers"]):
        errs.append("grippers: at most one gripper per bench")
    models = {m["id"] for m in cfg["devices"]["models"]}
    models |= {f"m{k}" for k in range(cfg["devices"]["n_models"])}
    for i, a in enumerate(cfg["devices"]["arrivals"]):
        if a["model"] not in models:
            errs.append(f"devices/arrivals/{i}/model: unknown model {a['model']!r}")
        if a["bench"] not in benches:
            errs.append(f"devices/arrivals/{i}/bench: unknown bench {a['bench']!r}")
    for i, m in enumerate(cfg["devices"]["models"]):
        if "valid_order" in m and sorted(m["valid_order"]) != [0, 1, 2, 3]:
            errs.append(f"devices/models/{i}/valid_order: must be a permutation of 0..3")
        if "materials" in m and len(set(m["materials"])) != 4:
            errs.append(f"devices/models/{i}/materials: each material exactly once")
    for i, s in enumerate(cfg["swaps"]):
        for w in s["workers"]:
            if w not in workers:
                errs.append(f"swaps/{i}/workers: unknown worker id {w!r}")
    a = cfg["agents"]
    if a["d_min"] > a["d_max"]:
        errs.append("agents/d_min: must not exceed agents/d_max")
    W, H = cfg["arena"]["width"], cfg["arena"]["height"]
    for i, m in enumerate(cfg["mobile"]):
        if not (0 <= m["x"] <= W and 0 <= m["y"] <= H):
            errs.append(f"mobile/{i}: start pose outside the arena")
    if not errs:
        from .world.build import arena_from_config
        try:
            errs += arena_from_config(cfg).validate()
        except ValueError as e:
            errs.append(f"arena: {e}")
    return errs


def checksum(cfg: dict, exclude: tuple[str, ...] = ()) -> str:
    """Stable hash of a config; dotted paths in ``exclude`` are left out."""
    c = copy.deepcopy(cfg)
    for path in exclude:
        node = c
        keys = path.split(".")
        for k in keys[:-1]:
            node = node.get(k, {})
        node.pop(keys[-1], None)
    return hashlib.sha256(json.dumps(c, sort_keys=True).encode()).hexdigest()[:16]


def dac_params(cfg: dict, kind: str) -> dict:
    base = {k: v for k, v in cfg["dac"].items() if k not in ("mobile", "gripper")}
    base.update(cfg["dac"].get(kind, {}))
    return base

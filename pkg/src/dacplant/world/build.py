"""Construct arenas and worlds from a parsed scenario config."""

from __future__ import annotations

from .. import rng
from .arena import MATERIALS, ArenaMap, BenchSpec
from .world import Body, DeviceModel, GripperState, World, WorldParams

BAND_GRID = (0.25, 0.5, 0.75)


def arena_from_config(cfg: dict) -> ArenaMap:
    a = cfg["arena"]
    benches = [BenchSpec(b["id"], float(b["x"]), float(b["y"]), int(b["marker"]), tuple(b["slot"]),
                         tuple(b["gripper_base"]), b.get("worker"), tuple(b["materials"]), int(b["fill_period"]))
               for b in a["benches"]]
    return ArenaMap(
        float(a["width"]), float(a["height"]), float(a["cell_size"]),
        [tuple(o) for o in a["obstacles"]], tuple(a["home"]), tuple(a["sorting"]), benches,
        [(int(l["id"]), float(l["x"]), float(l["y"])) for l in a["landmarks"]],
        [tuple(p) for p in a["conveyor"]["points"]], float(a["conveyor"]["speed"]),
    )


def preferred_standoff(trust: float, d_min: float, d_max: float) -> float:
    return d_min + (1.0 - trust) * (d_max - d_min)


def generate_models(cfg: dict, seed: int) -> list[DeviceModel]:
    dv = cfg["devices"]
    out = []
    dur = int(dv["step_duration"])
    for m in dv["models"]:
        r = rng.stream(seed, f"model/{m['id']}")
        order = list(range(4))
        r.shuffle(order)
        bands = [(r.choice(BAND_GRID), r.choice(BAND_GRID)) for _ in range(4)]
        out.append(DeviceModel(
            m["id"], tuple(m.get("materials", MATERIALS)), tuple(m.get("valid_order", order)),
            tuple(tuple(b) for b in m.get("bands", bands)), float(dv["tol"]),
            durations=tuple(m.get("durations", (dur,) * 4))))
    for k in range(dv["n_models"]):
        mid = f"m{k}"
        r = rng.stream(seed, f"model/{mid}")
        order = list(range(4))
        r.shuffle(order)
        bands = tuple((r.choice(BAND_GRID), r.choice(BAND_GRID)) for _ in range(4))
        out.append(DeviceModel(mid, MATERIALS, tuple(order), bands, float(dv["tol"]), durations=(dur,) * 4))
    return out


def build_world(cfg: dict, seed: int) -> World:
    arena = arena_from_config(cfg)
    s, b, bat, dv = cfg["sensors"], cfg["bins"], cfg["battery"], cfg["devices"]
    params = WorldParams(
        rays=s["rays"], max_range=s["max_range"], fov=s["fov"], cue_range=s["cue_range"], reach=b["reach"],
        bin_capacity=b["capacity"], replacement_fill=b["replacement_fill"], step_duration=dv["step_duration"],
        fail_duration=dv["fail_duration"], drain_idle=bat["drain_idle"], drain_per_m=bat["drain_per_m"],
        charge_rate=bat["charge_rate"],
    )
    world = World(arena, params, seed)
    if b["replacement_fill"]:
        for bn in world.bins.values():
            bn.items = [(-1, -1)] * min(b["replacement_fill"], bn.capacity)
    for m in cfg["mobile"]:
        world.add_body(Body(m["id"], "mobile", float(m["x"]), float(m["y"]), float(m["heading"]),
                            float(m["radius"]), float(m["max_speed"]), float(m["max_turn"]),
                            battery=float(m["battery"])))
    ag = cfg["agents"]
    bench_of = {bs.worker: bs.id for bs in arena.benches if bs.worker}
    for w in cfg["workers"]:
        bench = bench_of[w["id"]]
        sx, sy = arena.bench(bench).slot
        world.add_body(Body(w["id"], "worker", float(sx), float(sy), 0.0, float(w["radius"]),
                            max_v=0.05, max_w=1.0, cue=int(w["cue"])))
        world.workers[w["id"]] = {
            "trust": w["trust"], "skill": w["skill"], "pace": w["pace"], "cue": w["cue"], "bench": bench,
            "D": preferred_standoff(w["trust"], ag["d_min"], ag["d_max"]), "sway": w["sway"],
        }
    for g in cfg["grippers"]:
        world.add_gripper(GripperState(g["id"], g["bench"], float(g["standoff"])))
    for m in generate_models(cfg, seed):
        world.add_model(m)
    for a in dv["arrivals"]:
        world.schedule_device(a["tick"], a["bench"], a["model"])
    world.arrival_period = int(dv["period"])
    world.queue_max = int(dv["queue_max"])
    return world

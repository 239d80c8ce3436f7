import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dacplant import rng
from dacplant.actions import Action, Kind, move
from dacplant.config import ConfigError, parse_config
from dacplant.world.arena import ArenaMap, BenchSpec
from dacplant.world.world import Body, Device, DeviceModel, StepResult, World, WorldError, WorldParams

from conftest import make_world

MATS = ("Plastic", "Metal", "Paper", "Hazardous")


def robot_doc(*robots, **arena):
    a = {"width": 10.0, "height": 8.0, "home": [0.2, 0.2, 1.8, 1.8], "sorting": [0.2, 0.2, 1.8, 1.8]}
    a.update(arena)
    return {"arena": a, "mobile": [dict(r) for r in robots]}


def test_all_idle_leaves_poses_unchanged():
    w = make_world(robot_doc({"id": "r0", "x": 3.0, "y": 3.0, "heading": 0.7},
                             {"id": "r1", "x": 6.0, "y": 5.0, "heading": -2.0}))
    before = {i: (b.x, b.y, b.heading) for i, b in w.bodies.items()}
    w.step({"r0": Action(Kind.IDLE), "r1": Action(Kind.IDLE)})
    assert w.tick == 1
    assert {i: (b.x, b.y, b.heading) for i, b in w.bodies.items()} == before


def test_forward_one_tick_unicycle():
    w = make_world(robot_doc({"id": "r0", "x": 2.0, "y": 2.0, "heading": 0.0, "max_speed": 0.5}))
    w.step({"r0": move(0.5)})
    b = w.bodies["r0"]
    assert (b.x, b.y, b.heading) == pytest.approx((2.5, 2.0, 0.0))
    assert b.enc == pytest.approx((0.5, 0.0))


def test_speed_is_clamped_to_body_max():
    w = make_world(robot_doc({"id": "r0", "x": 2.0, "y": 2.0, "heading": 0.0, "max_speed": 0.2}))
    w.step({"r0": move(5.0)})
    assert w.bodies["r0"].x == pytest.approx(2.2)


def test_head_on_robots_stop_at_contact():
    # surface gap 0.1 m, each closes 0.5 m: contact after 0.05 m each
    w = make_world(robot_doc({"id": "a", "x": 4.0, "y": 4.0, "heading": 0.0, "max_speed": 0.5},
                             {"id": "b", "x": 4.7, "y": 4.0, "heading": math.pi, "max_speed": 0.5}))
    ev = w.step({"a": move(0.5), "b": move(0.5)})
    assert any(e["kind"] == "collision" for e in ev)
    a, b = w.bodies["a"], w.bodies["b"]
    assert a.x == pytest.approx(4.05, abs=1e-6)
    assert b.x == pytest.approx(4.65, abs=1e-6)
    assert math.hypot(a.x - b.x, a.y - b.y) >= a.radius + b.radius - 1e-6
    assert a.v == 0.0 and b.v == 0.0


def test_unknown_agent_action_rejected():
    w = make_world(robot_doc({"id": "r0", "x": 2.0, "y": 2.0}))
    with pytest.raises(WorldError, match="ghost"):
        w.step({"ghost": move(0.1)})


def test_sense_empty_arena_all_rays_max():
    w = make_world(robot_doc({"id": "r0", "x": 5.0, "y": 4.0}))
    f = w.sense("r0")
    assert len(f.proximity) == 8
    assert np.all(f.proximity == 3.0)
    assert f.cues == []


def test_sense_wall_ahead():
    w = make_world(robot_doc({"id": "r0", "x": 5.0, "y": 4.0, "heading": 0.0}, obstacles=[[6.0, 3.0, 7.0, 5.0]]))
    f = w.sense("r0")
    assert f.proximity[0] == pytest.approx(1.0)


def test_sense_worker_cue_bearing_and_range():
    w = make_world(robot_doc({"id": "r0", "x": 3.0, "y": 4.0, "heading": 0.0}))
    w.add_body(Body("w", "worker", 5.0, 4.0, 0.0, cue=3))
    f = w.sense("r0")
    assert len(f.cues) == 1
    cid, bearing, rng_ = f.cues[0]
    assert cid == 3 and bearing == pytest.approx(0.0) and rng_ == pytest.approx(2.0)


def test_cue_behind_robot_outside_fov():
    w = make_world(robot_doc({"id": "r0", "x": 5.0, "y": 4.0, "heading": 0.0}))
    w.add_body(Body("w", "worker", 3.5, 4.0, 0.0, cue=3))
    assert w.sense("r0").cues == []


def test_cue_occluded_by_obstacle():
    w = make_world(robot_doc({"id": "r0", "x": 3.0, "y": 4.0, "heading": 0.0}, obstacles=[[3.8, 3.5, 4.2, 4.5]]))
    w.add_body(Body("w", "worker", 5.0, 4.0, 0.0, cue=3))
    assert w.sense("r0").cues == []


def bench_world(order=(2, 0, 1, 3), tol=0.1):
    arena = ArenaMap(6.0, 4.0, 0.5, benches=[BenchSpec("b0", 3.0, 2.0, 10, (3.0, 2.6), (4.0, 2.6))])
    w = World(arena, WorldParams())
    bands = tuple((0.5, 0.5) for _ in range(4))
    w.add_model(DeviceModel("m", MATS, tuple(order), bands, tol))
    w.benches["b0"].current = Device(1, "m")
    return w


def test_disassembly_valid_order_first_succeeds():
    w = bench_world()
    assert w.apply_disassembly_step("b0", 2, 0.5, 0.5) == StepResult.SUCCESS
    assert w.benches["b0"].current.removed == {2}


def test_disassembly_wrong_order():
    w = bench_world()
    assert w.apply_disassembly_step("b0", 0, 0.5, 0.5) == StepResult.WRONG_ORDER
    assert w.benches["b0"].current.removed == set()


def test_disassembly_bad_params_keeps_component():
    w = bench_world()
    assert w.apply_disassembly_step("b0", 2, 0.5, 0.9) == StepResult.BAD_PARAMS
    assert w.benches["b0"].current.removed == set()


def test_disassembly_no_device():
    w = bench_world()
    w.benches["b0"].current = None
    assert w.apply_disassembly_step("b0", 2, 0.5, 0.5) == StepResult.NO_DEVICE


def test_success_makes_component_placeable_in_matching_bin():
    w = bench_world()
    w.apply_disassembly_step("b0", 2, 0.5, 0.5)
    bid = w.benches["b0"].bins[MATS[2]]
    assert w.bins[bid].items == [(1, 2)]


def test_device_model_invariants():
    with pytest.raises(ValueError):
        DeviceModel("x", ("Plastic", "Plastic", "Paper", "Hazardous"), (0, 1, 2, 3), ((0.5, 0.5),) * 4)
    with pytest.raises(ValueError):
        DeviceModel("x", MATS, (0, 1, 1, 3), ((0.5, 0.5),) * 4)


def lift_world():
    doc = robot_doc({"id": "r0", "x": 5.0, "y": 5.6, "heading": 1.57, "max_speed": 0.2})
    doc["arena"]["benches"] = [{"id": "b0", "x": 5.0, "y": 6.0, "marker": 10, "materials": ["Plastic"]}]
    doc["bins"] = {"capacity": 3, "replacement_fill": 2}
    return make_world(doc)


def test_lift_adjacent_then_bin_tracks_robot():
    w = lift_world()
    ev = w.step({"r0": Action(Kind.LIFT)})
    assert ev[0]["kind"] == "lift"
    b = w.bodies["r0"]
    assert b.load is not None
    w.step({"r0": move(0.0, 1.0)})
    w.step({"r0": move(0.2)})
    bn = w.bins[b.load]
    assert (bn.x, bn.y) == (b.x, b.y)


def test_lift_spawns_replacement_bin():
    w = lift_world()
    w.step({"r0": Action(Kind.LIFT)})
    new = w.bins[w.benches["b0"].bins["Plastic"]]
    assert new.carried_by is None and new.fill == 2


def test_place_in_sorting_zone_is_delivery():
    w = lift_world()
    w.step({"r0": Action(Kind.LIFT)})
    fill = w.bins[w.bodies["r0"].load].fill
    w.place("r0", 1.0, 1.0, 0.0)
    ev = w.step({"r0": Action(Kind.PLACE)})
    assert ev[0]["kind"] == "delivery" and ev[0]["fill"] == fill
    assert w.bodies["r0"].load is None


def test_lift_out_of_reach_is_fault_without_change():
    w = lift_world()
    w.place("r0", 5.0, 1.0, 0.0)
    before = {k: (b.carried_by, b.fill) for k, b in w.bins.items()}
    ev = w.step({"r0": Action(Kind.LIFT)})
    assert ev[0]["kind"] == "fault"
    assert w.bodies["r0"].load is None
    assert {k: (b.carried_by, b.fill) for k, b in w.bins.items()} == before


def test_place_without_load_is_fault():
    w = lift_world()
    assert w.step({"r0": Action(Kind.PLACE)})[0]["kind"] == "fault"


def test_bench_overlapping_obstacle_rejected():
    doc = robot_doc(obstacles=[[4.0, 4.0, 6.0, 6.0]])
    doc["arena"]["benches"] = [{"id": "b0", "x": 5.0, "y": 5.0, "marker": 10}]
    with pytest.raises(ConfigError, match="overlaps an obstacle"):
        parse_config(doc)


def test_unreachable_bench_rejected():
    # a closed box around the bench
    walls = [[6.0, 6.0, 9.0, 6.2], [6.0, 7.8, 9.0, 8.0], [6.0, 6.0, 6.2, 8.0], [8.8, 6.0, 9.0, 8.0]]
    doc = robot_doc(obstacles=walls)
    doc["arena"]["benches"] = [{"id": "b0", "x": 7.5, "y": 7.0, "marker": 10}]
    with pytest.raises(ConfigError, match="not reachable"):
        parse_config(doc)


def test_rng_streams_are_independent_of_other_entities():
    a = [rng.stream(7, "robot/r0").random() for _ in range(3)]
    _ = rng.stream(7, "robot/r1").random()
    assert [rng.stream(7, "robot/r0").random() for _ in range(3)] == a
    assert rng.stream(7, "robot/r0").random() != rng.stream(8, "robot/r0").random()


def test_world_determinism_same_seed():
    def trace(seed):
        w = make_world(robot_doc({"id": "r0", "x": 3.0, "y": 3.0}, {"id": "r1", "x": 6.0, "y": 5.0}), seed)
        r = random.Random(1)
        out = []
        for _ in range(200):
            ev = w.step({i: move(r.uniform(-0.05, 0.05), r.uniform(-0.5, 0.5)) for i in ("r0", "r1")})
            out.append((ev, w.state_record()))
        return out
    assert trace(3) == trace(3)


def fuzz_world(seed):
    doc = robot_doc(*[{"id": f"r{k}", "x": 2.0 + 2 * k, "y": 2.0 + k, "max_speed": 0.3, "max_turn": 1.0}
                      for k in range(3)], obstacles=[[4.5, 5.5, 5.5, 6.5]])
    doc["arena"]["benches"] = [{"id": f"b{k}", "x": 2.0 + 3 * k, "y": 7.0, "marker": 10 + k,
                                "fill_period": 3} for k in range(3)]
    doc["bins"] = {"capacity": 3, "replacement_fill": 1, "reach": 1.5}
    return make_world(doc, seed)


def test_fuzz_bins_and_bodies_stay_valid():
    # 10^5 random action ticks over three robots
    w = fuzz_world(0)
    r = random.Random(0)
    kinds = [Kind.MOVE] * 6 + [Kind.LIFT, Kind.PLACE, Kind.IDLE]
    ids = sorted(w.bodies)
    for _ in range(100_000 // len(ids)):
        acts = {}
        for i in ids:
            k = r.choice(kinds)
            acts[i] = move(r.uniform(-0.3, 0.3), r.uniform(-1, 1)) if k == Kind.MOVE else Action(k)
        before = {i: (w.bodies[i].x, w.bodies[i].y) for i in ids}
        w.step(acts)
        for i in ids:
            b = w.bodies[i]
            assert math.hypot(b.x - before[i][0], b.y - before[i][1]) <= b.max_v + 1e-12
            assert -math.pi <= b.heading < math.pi
        assert w.check_invariants() == []


@settings(max_examples=200, deadline=None)
@given(st.floats(0.7, 9.3), st.floats(0.7, 7.3), st.floats(0.7, 9.3), st.floats(0.7, 7.3),
       st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi))
def test_no_overlap_after_any_step(x0, y0, x1, y1, h0, h1):
    if math.hypot(x0 - x1, y0 - y1) < 0.6:
        return
    doc = robot_doc({"id": "a", "x": x0, "y": y0, "heading": h0, "max_speed": 0.5},
                    {"id": "b", "x": x1, "y": y1, "heading": h1, "max_speed": 0.5})
    w = make_world(doc)
    for _ in range(5):
        w.step({"a": move(0.5), "b": move(0.5)})
        assert w.check_invariants() == []
        for b in w.bodies.values():
            assert b.radius - 1e-6 <= b.x <= 10.0 - b.radius + 1e-6


def test_component_conservation_per_device():
    w = bench_world()
    g_order = [2, 0, 1, 3]
    for c in g_order:
        assert w.apply_disassembly_step("b0", c, 0.5, 0.5) == StepResult.SUCCESS
        assert w.component_census() == {1: 4}

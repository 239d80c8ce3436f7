import copy
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dacplant.actions import Kind
from dacplant.agents.gestures import Command, Gesture, gesture_to_command
from dacplant.agents.h5w import h5w_annotate
from dacplant.agents.worker import WorkerProxy, discomfort_intensity
from dacplant.bench import scenarios
from dacplant.dac.arbitration import Layer
from dacplant.simulation import Simulation
from dacplant.world.world import SensorFrame


def frame(cues=(), rays=3.0, gestures=(), workpiece=None, endo=None, discomfort=0.0):
    return SensorFrame(np.full(8, rays), list(cues), (0.0, 0.0), dict(endo or {"battery": 1.0}), list(gestures),
                       [], workpiece, discomfort)


def mobile_sim():
    doc = copy.deepcopy(scenarios.foraging(ticks=10))
    doc["workers"] = [{"id": "w9", "cue": 100, "trust": 0.5}]
    doc["arena"]["benches"][0]["worker"] = "w9"
    doc["arena"]["benches"][0]["slot"] = [5.6, 6.2]
    from dacplant.config import parse_config
    return Simulation(parse_config(doc), 0, keep_log=False)


# -- mobile robot ------------------------------------------------------------------------------------

def test_human_ahead_stops_regardless_of_goals():
    sim = mobile_sim()
    r = sim.mobiles["r0"]
    r.tutor = ("fetch:b0", 5.6, 5.6)
    a = r.act(frame(cues=[(100, 0.0, 0.3)], endo={"battery": 0.1}), 0)
    assert a.kind == Kind.STOP and r.last.layer == Layer.SAFETY


def test_naive_robot_explores_in_open_space():
    r = mobile_sim().mobiles["r0"]
    assert not r.am.W.any() and len(r.ltm) == 0
    a = r.act(frame(), 0)
    assert r.last.action.kind == Kind.EXPLORE and r.last.layer == Layer.DEFAULT
    assert a.kind == Kind.MOVE


def episode_paths(records):
    out, last, acc = [], None, 0.0
    for r in records:
        if r.get("type") == "state":
            x, y = r["mobile"]["r0"][:2]
            if last is not None:
                acc += math.hypot(x - last[0], y - last[1])
            last = (x, y)
        elif r.get("kind") == "delivery":
            out.append(acc)
            acc = 0.0
    return out


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_path_length_shrinks_with_experience(seed):
    sim = Simulation(scenarios.foraging(ticks=12000), seed)
    while sim.tick < 12000 and sum(1 for r in sim.log.records if r.get("kind") == "delivery") < 30:
        sim.step()
    lengths = episode_paths(sim.log.records)
    assert len(lengths) == 30
    assert lengths[-1] < lengths[0]
    # sanity: never shorter than the straight home-bench-home distance
    bench, home = (5.6, 5.6), (1.7, 1.7)
    assert lengths[-1] >= 2 * (math.hypot(bench[0] - home[0], bench[1] - home[1]) - 2 * 0.5)


# -- gripper --------------------------------------------------------------------------------------------

def test_stop_gesture_latches_idle():
    sim = Simulation(scenarios.disassembly(ticks=10), 0, keep_log=False)
    g = sim.grippers["g0"]
    a = g.act(frame(gestures=[("w0", "StopG")], workpiece=("m0", frozenset())), 0)
    assert a.kind == Kind.IDLE
    assert g.act(frame(workpiece=("m0", frozenset())), 1).kind == Kind.IDLE
    g.act(frame(gestures=[("w0", "StartG")], workpiece=("m0", frozenset())), 2)
    assert not g.stopped


def fixed_point(D, d_approach, d_retreat, scale=0.1):
    # s' = s - d_approach + d_retreat * (D - s) / scale  has its rest point where both pulls cancel
    return D - scale * d_approach / d_retreat


@pytest.mark.parametrize("trust", [1.0, 0.5, 0.0])
def test_standoff_settles_at_preferred_distance(trust):
    cfg = copy.deepcopy(scenarios.disassembly(ticks=500))
    cfg["workers"][0]["trust"] = trust
    sim = Simulation(cfg, 0, keep_log=False)
    sim.run()
    g = sim.grippers["g0"]
    D = WorkerProxy.preferred_standoff(trust, g.p.d_min, g.p.d_max)
    assert abs(g.standoff - D) <= 0.05
    assert abs(g.standoff - fixed_point(D, g.p.delta_approach, g.p.delta_retreat)) <= 0.05


def test_first_encounter_searches_then_four_attempts():
    sim = Simulation(scenarios.disassembly(n_models=1, ticks=4000), 1, keep_log=False)
    sim.run()
    done = sim.grippers["g0"].completed
    assert len(done) >= 7
    assert done[0][1] > 4
    assert [n for _m, n in done[5:]] == [4] * len(done[5:])


def test_gripper_segments_with_visible_worker_carry_who():
    sim = Simulation(scenarios.disassembly(ticks=1500), 0, keep_log=False)
    sim.run()
    segs = [s for q in sim.grippers["g0"].ltm.sequences for s in q.segments]
    assert segs
    assert all(s.h5w.who == "w0" for s in segs)


def test_gripper_never_acts_on_other_bench():
    sim = Simulation(scenarios.generalization(ticks=600), 0)
    res = sim.run()
    for rec in res.log.records:
        if rec.get("type") == "event" and rec.get("kind") == "step":
            assert rec["bench"] == sim.grippers[rec["agent"]].bench


# -- worker -----------------------------------------------------------------------------------------------

def test_preferred_standoff_endpoints_and_monotone():
    assert WorkerProxy.preferred_standoff(1.0, 0.4, 1.2) == pytest.approx(0.4)
    assert WorkerProxy.preferred_standoff(0.0, 0.4, 1.2) == pytest.approx(1.2)


@given(st.floats(0, 1), st.floats(0, 1))
def test_preferred_standoff_decreasing(a, b):
    lo, hi = sorted((a, b))
    assert WorkerProxy.preferred_standoff(hi, 0.4, 1.2) <= WorkerProxy.preferred_standoff(lo, 0.4, 1.2)


def test_discomfort_outside_standoff_none():
    assert discomfort_intensity(0.8, 0.9) == 0.0
    assert discomfort_intensity(0.8, None) == 0.0


def test_discomfort_proportional_to_intrusion():
    assert discomfort_intensity(0.8, 0.6) == pytest.approx(2.0)
    assert discomfort_intensity(0.8, 0.7) == pytest.approx(0.5 * discomfort_intensity(0.8, 0.6))


def test_onset_ranges_differ_by_span():
    d0 = WorkerProxy.preferred_standoff(0.0, 0.4, 1.2)
    d1 = WorkerProxy.preferred_standoff(1.0, 0.4, 1.2)
    # onset is the largest distance that still produces discomfort
    assert d0 - d1 == pytest.approx(1.2 - 0.4)
    assert discomfort_intensity(d0, 1.0) > 0.0 and discomfort_intensity(d1, 1.0) == 0.0


def test_worker_emits_scripted_gestures():
    cfg = copy.deepcopy(scenarios.disassembly(ticks=6))
    cfg["workers"][0]["gestures"] = [[3, "StopG"]]
    from dacplant.config import parse_config
    sim = Simulation(parse_config(cfg), 0)
    res = sim.run()
    ges = [r for r in res.log.records if r.get("kind") == "gesture"]
    assert [(r["tick"], r["symbol"]) for r in ges] == [(3, "StopG")]


# -- gestures and h5w -------------------------------------------------------------------------------------

@pytest.mark.parametrize("g,c", [("StopG", Command.STOP), ("RestG", Command.REST), ("StartG", Command.START),
                                 ("FasterG", Command.SPEED_UP), ("SlowerG", Command.SLOW_DOWN)])
def test_gesture_table(g, c):
    assert gesture_to_command(g) == c


def test_gesture_table_total_and_unknown_none():
    assert all(gesture_to_command(g) is not None for g in Gesture)
    assert gesture_to_command("WaveG") is None
    assert gesture_to_command(None) is None


CUES = {100: "w0", 101: "w1"}


def test_h5w_no_worker_visible():
    assert h5w_annotate(frame(), CUES, "m0", "b0", 7, None).who is None


def test_h5w_field_mapping():
    h = h5w_annotate(frame(cues=[(100, 0.2, 0.8)]), CUES, "m1", "b2", 12, "disassemble:m1",
                     {"component": 2, "velocity": 0.5, "pressure": 0.25})
    assert (h.who, h.what, h.where, h.when, h.why) == ("w0", "m1", "b2", 12, "disassemble:m1")
    assert h.how == {"component": 2, "velocity": 0.5, "pressure": 0.25}


@given(st.floats(0.1, 3.0), st.floats(0.1, 3.0))
def test_h5w_nearest_worker(r0, r1):
    h = h5w_annotate(frame(cues=[(101, 0.0, r1), (100, 1.0, r0)]), CUES, None, None, 0, None)
    expect = "w0" if r0 <= r1 else "w1"
    assert h.who == expect


def test_h5w_non_worker_cues_ignored():
    assert h5w_annotate(frame(cues=[(3, 0.0, 0.1)]), CUES, None, None, 0, None).who is None

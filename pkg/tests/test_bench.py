import copy
import csv
import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import binomtest

from dacplant.actions import Action, Kind
from dacplant.bench import experiments as ex
from dacplant.bench import scenarios
from dacplant.bench.metrics import compute_metrics, normalized_entropy
from dacplant.bench.stats import binom_two_sided, sign_test
from dacplant.config import checksum
from dacplant.eventlog import TruncatedLog, dumps, parse
from dacplant.simulation import Simulation
from dacplant.world.build import build_world


# -- sign test ----------------------------------------------------------------------------------------

def test_all_ties_flagged():
    t = sign_test([1, 2, 3, 4, 5], [1, 2, 3, 4, 5])
    assert t.n_effective == 0 and t.flagged and t.p_value == 1.0


def test_ten_of_ten():
    t = sign_test(list(range(1, 11)), [0] * 10)
    assert t.wins == 10 and t.p_value == pytest.approx(2 * 0.5 ** 10)
    assert t.p_value == pytest.approx(0.00195, abs=1e-5)


def test_seven_of_ten():
    t = sign_test([1] * 7 + [0] * 3, [0] * 7 + [1] * 3)
    assert t.p_value == pytest.approx(0.344, abs=5e-4)


def test_lower_is_better_direction():
    t = sign_test([1, 1, 1, 1, 1], [2, 2, 2, 2, 2], higher_is_better=False)
    assert t.wins == 5 and t.losses == 0


@given(st.integers(0, 60).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n))))
def test_binomial_matches_scipy(kn):
    k, n = kn
    expect = binomtest(k, n, 0.5).pvalue if n else 1.0
    assert binom_two_sided(k, n) == pytest.approx(expect, rel=1e-9)


def test_unpaired_rejected():
    with pytest.raises(ValueError):
        sign_test([1, 2], [1])


def test_win_fraction_counts_ties_against():
    t = sign_test([2, 2, 1, 1], [1, 1, 1, 1])
    assert t.win_fraction == 0.5 and t.at_least_fraction == 1.0


# -- metrics ----------------------------------------------------------------------------------------------

def test_uniform_service_entropy_one():
    assert normalized_entropy([5, 5], 2) == (pytest.approx(1.0), True)


def test_single_bench_served_entropy_zero():
    assert normalized_entropy([10, 0, 0], 3)[0] == 0.0


@given(st.lists(st.integers(0, 50), min_size=2, max_size=6))
def test_entropy_in_unit_interval(counts):
    h, ok = normalized_entropy(counts, len(counts))
    assert 0.0 <= h <= 1.0 + 1e-12
    assert ok == (sum(counts) > 0)


def zero_tick_log(cfg):
    sim = Simulation(cfg, 0, central=False)
    return sim.run(0).log.records


def test_empty_log_zero_metrics_flagged():
    m = compute_metrics(zero_tick_log(scenarios.navigation()))
    assert (m.ticks, m.occupancy, m.trajectory, m.rate, m.deliveries, m.near_miss, m.entropy) == (0, 0, 0, 0, 0, 0, 0)
    assert not m.entropy_defined and m.degenerate


def header_for(cfg):
    return zero_tick_log(cfg)[0]


def test_three_delivery_log_rate():
    cfg = scenarios.foraging(ticks=500)
    recs = [header_for(cfg)]
    for t in (100, 250, 400):
        recs.append({"type": "event", "kind": "delivery", "agent": "r0", "bench": "b0", "t": t})
    recs.append({"type": "end", "ticks": 500})
    m = compute_metrics(recs)
    assert m.deliveries == 3 and m.rate == pytest.approx(3 / (500 / 1000))


def test_truncated_log_reports_last_tick():
    res = Simulation(scenarios.foraging(ticks=20), 0).run()
    lines = [dumps(r) for r in res.log.records][:-1]
    with pytest.raises(TruncatedLog) as e:
        parse(lines)
    assert e.value.last_tick == 19
    with pytest.raises(TruncatedLog):
        compute_metrics(res.log.records[:-1])


def test_never_moving_robot_occupancy():
    cfg = scenarios.foraging(ticks=50)
    recs = [header_for(cfg)]
    for t in range(50):
        recs.append({"type": "state", "t": t, "mobile": {"r0": [1.0, 1.0, 0.0]}, "grippers": {}})
    recs.append({"type": "end", "ticks": 50})
    m = compute_metrics(recs)
    arena = build_world(cfg, 0).arena
    assert m.occupancy == pytest.approx(1 / arena.n_free())
    assert m.rate == 0.0


def test_straight_line_oracle_trajectory():
    cfg = copy.deepcopy(scenarios.foraging(ticks=400))
    cfg["arena"]["obstacles"] = []
    w = build_world(cfg, 0)
    b = w.bodies["r0"]
    start = (b.x, b.y)
    tx, ty = 5.6, 5.6
    b.heading = math.atan2(ty - b.y, tx - b.x)
    recs = [header_for(cfg)]
    t = 0
    while math.hypot(tx - b.x, ty - b.y) > 0.05:
        step = min(0.2, math.hypot(tx - b.x, ty - b.y))
        w.step({"r0": Action(Kind.MOVE, v=step, w=0.0)})
        recs.append({"type": "state", "t": t, "mobile": {"r0": [b.x, b.y, b.heading]}, "grippers": {}})
        t += 1
    recs.append({"type": "event", "kind": "delivery", "agent": "r0", "bench": "b0", "t": t})
    recs.append({"type": "end", "ticks": t + 1})
    m = compute_metrics(recs)
    euclid = math.hypot(tx - start[0], ty - start[1])
    assert abs(m.trajectory - euclid) <= cfg["arena"]["cell_size"]


def test_replay_equals_live(tmp_path):
    p = tmp_path / "log.jsonl"
    sim = Simulation(scenarios.navigation(ticks=300), 3, log_path=str(p))
    live = compute_metrics(sim.run().log.records)
    replay = compute_metrics(parse(p.read_text().splitlines()))
    assert live.to_dict() == replay.to_dict()


def test_foraging_degenerate_run_flagged():
    m = ex.run_foraging_phases(scenarios.foraging(), 0, episodes=60, max_ticks=5)
    assert m.degenerate and m.phases == []


def test_foraging_phases_split_into_thirds():
    m = ex.run_foraging_phases(scenarios.foraging(), 0, episodes=9)
    assert m.deliveries == 9
    assert [p["episodes"] for p in m.phases] == [3, 3, 3]


# -- experiments ----------------------------------------------------------------------------------------------

def test_navigation_rejects_single_robot():
    with pytest.raises(ex.ExperimentError, match="2"):
        ex.run_navigation_experiment(scenarios.navigation(n_robots=1), [0], pretrain=False)


def test_paired_configs_differ_only_in_central_flag():
    on, off = ex.paired_configs(scenarios.navigation())
    assert on["plant"]["central"] and not off["plant"]["central"]
    assert checksum(on, ("plant.central",)) == checksum(off, ("plant.central",))
    assert checksum(on) != checksum(off)


def test_logs_differ_only_after_first_plant_message():
    cfg = scenarios.navigation(ticks=200)
    on = Simulation(cfg, 4, central=True).run().log.records
    off = Simulation(cfg, 4, central=False).run().log.records
    first_plant = min(r["t"] for r in on if r.get("type") == "bus" and r["sender"] == "plant")

    def body(recs):
        return [r for r in recs if r.get("type") in ("state", "event")]

    a, b = body(on), body(off)
    diff = next(k for k, (x, y) in enumerate(zip(a, b)) if x != y)
    assert a[diff]["t"] > first_plant
    assert a[:diff] == b[:diff]


def test_equal_trust_swap_is_null_control():
    cfg = scenarios.generalization(trusts=(0.5, 0.5))
    m = {c: ex.run_condition(cfg, [0], c)[0][0] for c in (True, False)}
    assert m[True].recovery == m[False].recovery <= 1
    assert m[True].adapt_error_post == pytest.approx(m[False].adapt_error_post, rel=0.05)


def test_central_on_swap_inherits_learned_standoff():
    cfg = scenarios.generalization()
    swap = cfg["swaps"][0]["tick"]
    sim = Simulation(cfg, 0, central=True, keep_log=False)
    while sim.tick < swap:
        sim.step()
    g1 = sim.grippers["g1"]
    learned = [s.segments[-1].action.standoff for s in g1.ltm.sequences
               if s.goal == "comfort" and s.segments[-1].h5w.who == "w1"]
    assert len(learned) == 1
    sim.step()
    assert abs(sim.grippers["g0"].standoff - learned[0]) <= g1.p.delta_retreat


def test_recovery_censored_at_run_end():
    cfg = scenarios.generalization()
    m = ex.run_condition(cfg, [0], False)[0][0]
    m.recovery = None
    assert ex.recovery_ticks(m, cfg) == cfg["run"]["ticks"] - cfg["swaps"][0]["tick"]


def test_write_outputs_files(tmp_path):
    res = ex.run_foraging_experiment(scenarios.foraging(), [1, 0], episodes=6)
    paths = ex.write_outputs(res, tmp_path)
    names = sorted(p.name for p in paths)
    assert names == ["metrics.csv", "summary.json"]
    rows = list(csv.DictReader(open(tmp_path / "metrics.csv")))
    assert [r["seed"] for r in rows][:2] == ["0", "0"] or sorted({r["seed"] for r in rows}) == ["0", "1"]
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert set(summary["comparisons"]) == {"occupancy", "trajectory", "rate"}
    assert summary["seeds"] == [0, 1]
    assert not list(tmp_path.glob("*.tmp*"))


def test_trajectories_csv_written(tmp_path):
    cfg = scenarios.navigation(ticks=60)
    res = ex.run_navigation_experiment(cfg, [0], pretrain=False, traj_every=10)
    paths = ex.write_outputs(res, tmp_path)
    assert (tmp_path / "trajectories.csv") in paths
    rows = list(csv.DictReader(open(tmp_path / "trajectories.csv")))
    assert {r["condition"] for r in rows} == {"on", "off"}

"""Built-in scenario documents for the benchmarks. Each function returns a parsed config."""

from __future__ import annotations

import copy

from ..config import parse_config


def foraging(ticks: int = 12000, cue_range: float = 1.5) -> dict:
    """One robot, one bench whose bins are always full, home doubling as the sorting zone."""
    doc = {
        "arena": {
            "width": 7.0, "height": 7.0, "cell_size": 0.5,
            "obstacles": [[3.0, 2.6, 4.0, 3.4]],
            "home": [0.3, 0.3, 1.7, 1.7], "sorting": [0.3, 0.3, 1.7, 1.7],
            "landmarks": [{"id": 1, "x": 0.1, "y": 6.9}, {"id": 2, "x": 6.9, "y": 0.1},
                          {"id": 3, "x": 3.5, "y": 6.9}, {"id": 4, "x": 6.9, "y": 3.5}],
            "benches": [{"id": "b0", "x": 5.6, "y": 5.6, "marker": 10}],
        },
        "sensors": {"cue_range": cue_range},
        "bins": {"capacity": 4, "replacement_fill": 4, "reach": 0.5},
        "mobile": [{"id": "r0", "x": 1.0, "y": 1.0, "heading": 0.0, "max_speed": 0.2, "max_turn": 0.8}],
        "dac": {"mobile": {"gamma": 0.95}},
        "plant": {"central": False},
        "run": {"ticks": ticks},
    }
    return parse_config(doc)


def navigation(ticks: int = 1500, central: bool = True, fill_period: int = 4, n_robots: int = 3) -> dict:
    """Robots share a strip-shaped home/sorting zone; three self-filling benches, the middle one closest."""
    spots = [(1.5, 6.8), (5.0, 5.0), (8.5, 6.8)]
    benches = [{"id": f"b{k}", "x": x, "y": y, "marker": 10 + k, "slot": [x, y + 0.6], "gripper_base": [x + 1.0, y + 0.6],
                "materials": ["Plastic", "Metal"], "fill_period": fill_period} for k, (x, y) in enumerate(spots)]
    starts = [3.0, 5.0, 7.0, 4.0, 6.0]
    doc = {
        "arena": {
            "width": 10.0, "height": 8.0, "cell_size": 0.5,
            "home": [0.2, 0.2, 9.8, 1.6], "sorting": [0.2, 0.2, 9.8, 1.6],
            "landmarks": [{"id": 1, "x": 0.1, "y": 7.9}, {"id": 2, "x": 9.9, "y": 7.9},
                          {"id": 3, "x": 0.1, "y": 4.0}, {"id": 4, "x": 9.9, "y": 4.0}],
            "benches": benches,
        },
        "bins": {"capacity": 3, "replacement_fill": 0, "reach": 0.5},
        "mobile": [{"id": f"r{k}", "x": starts[k], "y": 0.9, "heading": 1.5708, "max_speed": 0.2,
                    "max_turn": 0.8} for k in range(n_robots)],
        "dac": {"mobile": {"gamma": 0.95}},
        "plant": {"central": central},
        "run": {"ticks": ticks},
    }
    return parse_config(doc)


def generalization(ticks: int = 2400, swap_tick: int = 1200, central: bool = True,
                   trusts: tuple[float, float] = (0.9, 0.1)) -> dict:
    """Two grippers with two workers of different trust; the workers swap benches mid-run."""
    doc = {
        "arena": {
            "width": 6.0, "height": 4.0, "cell_size": 0.5,
            "benches": [
                {"id": "b0", "x": 1.5, "y": 2.0, "marker": 10, "slot": [1.5, 2.6], "gripper_base": [2.5, 2.6],
                 "worker": "w0"},
                {"id": "b1", "x": 4.5, "y": 2.0, "marker": 11, "slot": [4.5, 2.6], "gripper_base": [5.5, 2.6],
                 "worker": "w1"},
            ],
        },
        "grippers": [{"id": "g0", "bench": "b0", "standoff": 0.8}, {"id": "g1", "bench": "b1", "standoff": 0.8}],
        "workers": [{"id": "w0", "cue": 100, "trust": trusts[0]}, {"id": "w1", "cue": 101, "trust": trusts[1]}],
        "swaps": [{"tick": swap_tick, "workers": ["w0", "w1"]}],
        "plant": {"central": central},
        "run": {"ticks": ticks},
    }
    return parse_config(doc)


def disassembly(n_models: int = 3, period: int = 30, ticks: int = 6000) -> dict:
    """One gripper at one bench receiving a stream of devices from several models."""
    doc = {
        "arena": {
            "width": 4.0, "height": 4.0, "cell_size": 0.5,
            "benches": [{"id": "b0", "x": 2.0, "y": 2.0, "marker": 10, "slot": [2.0, 2.6],
                         "gripper_base": [3.0, 2.6], "worker": "w0"}],
        },
        "bins": {"capacity": 1000},
        "devices": {"n_models": n_models, "period": period, "queue_max": 1, "step_duration": 2,
                    "fail_duration": 1},
        "grippers": [{"id": "g0", "bench": "b0", "standoff": 0.8}],
        "workers": [{"id": "w0", "cue": 100, "trust": 0.5}],
        "plant": {"central": False},
        "run": {"ticks": ticks},
    }
    return parse_config(doc)


def with_central(cfg: dict, central: bool) -> dict:
    c = copy.deepcopy(cfg)
    c["plant"]["central"] = bool(central)
    return c

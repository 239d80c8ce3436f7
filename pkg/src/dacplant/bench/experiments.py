"""Experiment harness: foraging phases and the central-control ablations, with output files."""

from __future__ import annotations

import copy
import csv
import json
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .. import config as cfgmod
from ..dac.adaptive import AssociationMatrix
from ..dac.memory import LTM
from ..simulation import Simulation
from .metrics import RunMetrics, compute_metrics
from .stats import SignTest, sign_test

NAIVE_SEED_OFFSET = 10000
PRETRAIN_CAP = 600  # ticks allowed per tutored trip


class ExperimentError(ValueError):
    pass


@dataclass
class ConditionComparison:
    metric: str
    seeds: list[int]
    a: list[float]  # first condition (central on / late phase)
    b: list[float]  # second condition (central off / early phase)
    higher_is_better: bool
    test: SignTest
    labels: tuple[str, str] = ("on", "off")

    @classmethod
    def build(cls, metric: str, seeds, a, b, higher_is_better: bool, labels=("on", "off")) -> "ConditionComparison":
        return cls(metric, list(seeds), list(a), list(b), higher_is_better,
                   sign_test(a, b, higher_is_better), tuple(labels))

    @property
    def win_fraction(self) -> float:
        return self.test.win_fraction

    @property
    def p_value(self) -> float:
        return self.test.p_value

    def to_dict(self) -> dict:
        t = self.test
        return {"metric": self.metric, "labels": list(self.labels), "seeds": self.seeds,
                self.labels[0]: self.a, self.labels[1]: self.b, "higher_is_better": self.higher_is_better,
                "wins": t.wins, "losses": t.losses, "ties": t.ties, "win_fraction": t.win_fraction,
                "at_least_fraction": t.at_least_fraction, "p_value": t.p_value, "n_effective": t.n_effective,
                "flagged": t.flagged}


@dataclass
class ExperimentResult:
    name: str
    seeds: list[int]
    runs: dict[str, list[RunMetrics]]  # condition -> metrics sorted by seed
    comparisons: dict[str, ConditionComparison]
    extra: dict = field(default_factory=dict)
    trajectories: list[dict] = field(default_factory=list)

    def rows(self) -> list[dict]:
        out = []
        for cond in sorted(self.runs):
            for seed, m in zip(self.seeds, self.runs[cond]):
                out.append({"experiment": self.name, "condition": cond, "seed": seed, **m.row()})
        return out

    def summary(self) -> dict:
        return {"experiment": self.name, "seeds": self.seeds,
                "comparisons": {k: c.to_dict() for k, c in sorted(self.comparisons.items())}, **self.extra}


def _map(fn, jobs_args: list[tuple], jobs: int = 1) -> list:
    """Run independent seeds, in worker processes when jobs > 1; results keep input order."""
    if jobs <= 1 or len(jobs_args) <= 1:
        return [fn(*a) for a in jobs_args]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, *zip(*jobs_args)))


def trajectory_rows(records: list[dict], condition: str, seed: int, every: int = 1) -> list[dict]:
    rows = []
    for r in records:
        if r.get("type") == "state" and r["t"] % every == 0:
            for rid in sorted(r["mobile"]):
                x, y = r["mobile"][rid][0], r["mobile"][rid][1]
                rows.append({"condition": condition, "seed": seed, "t": r["t"], "robot": rid, "x": x, "y": y})
    return rows


# -- foraging ------------------------------------------------------------------------------

def run_foraging_phases(cfg: dict, seed: int, episodes: int = 60, max_ticks: int | None = None) -> RunMetrics:
    """Run a single-robot scenario until `episodes` deliveries (or the tick budget); metrics with phase slices."""
    if len(cfg["mobile"]) != 1:
        raise ExperimentError(f"foraging needs exactly one mobile robot, got {len(cfg['mobile'])}")
    sim = Simulation(cfg, seed, central=False)
    limit = cfg["run"]["ticks"] if max_ticks is None else max_ticks
    done = 0
    while sim.tick < limit and done < episodes:
        done += sum(1 for e in sim.step() if e["kind"] == "delivery")
    sim.log.close(sim.tick)
    return compute_metrics(sim.log.records)


def foraging_phase_comparisons(seeds: list[int], metrics: list[RunMetrics]) -> dict[str, ConditionComparison]:
    """Late vs early phase per seed; degenerate runs (fewer than three episodes) are excluded."""
    ok = [(s, m) for s, m in zip(seeds, metrics) if len(m.phases) == 3]
    ss = [s for s, _ in ok]
    late = [m.phases[-1] for _, m in ok]
    early = [m.phases[0] for _, m in ok]
    out = {}
    for key, hib in (("occupancy", False), ("trajectory", False), ("rate", True)):
        out[key] = ConditionComparison.build(key, ss, [p[key] for p in late], [p[key] for p in early], hib,
                                             ("late", "early"))
    return out


def run_foraging_experiment(cfg: dict, seeds: list[int], episodes: int = 60, jobs: int = 1) -> ExperimentResult:
    seeds = sorted(seeds)
    ms = _map(run_foraging_phases, [(cfg, s, episodes) for s in seeds], jobs)
    comps = foraging_phase_comparisons(seeds, ms)
    medians = {}
    for key in ("occupancy", "trajectory", "rate"):
        c = comps[key]
        medians[key] = {"early": _median(c.b), "late": _median(c.a)}
    degenerate = [s for s, m in zip(seeds, ms) if len(m.phases) < 3]
    return ExperimentResult("foraging", seeds, {"learning": ms}, comps,
                            {"medians": medians, "degenerate_seeds": degenerate, "episodes": episodes})


def _median(v: list[float]) -> float:
    if not v:
        return 0.0
    s = sorted(v)
    n = len(s)
    return s[n // 2] if n % 2 else 0.5 * (s[n // 2 - 1] + s[n // 2])


# -- paired ablations ------------------------------------------------------------------------

def paired_configs(cfg: dict) -> tuple[dict, dict]:
    on, off = copy.deepcopy(cfg), copy.deepcopy(cfg)
    on["plant"]["central"], off["plant"]["central"] = True, False
    ex = ("plant.central",)
    assert cfgmod.checksum(on, ex) == cfgmod.checksum(off, ex)
    return on, off


def _run_metrics(cfg: dict, seed: int, snapshot: dict | None = None, traj_every: int = 0):
    sim = Simulation(cfg, seed, snapshot_in=snapshot)
    res = sim.run()
    m = compute_metrics(res.log.records)
    cond = "on" if cfg["plant"]["central"] else "off"
    traj = trajectory_rows(res.log.records, cond, seed, traj_every) if traj_every else []
    return m, traj


def run_condition(cfg: dict, seeds: list[int], central: bool, snapshot: dict | None = None, jobs: int = 1,
                  traj_every: int = 0) -> tuple[list[RunMetrics], list[dict]]:
    """One condition over a seed set (metrics sorted by seed)."""
    c = copy.deepcopy(cfg)
    c["plant"]["central"] = bool(central)
    out = _map(_run_metrics, [(c, s, snapshot, traj_every) for s in sorted(seeds)], jobs)
    return [m for m, _ in out], [r for _, t in out for r in t]


def pretrain_navigation(cfg: dict, seed: int = 0) -> dict:
    """Tutored training of one robot: from every configured start to every bench and back.

    The routes are stored as a per-kind snapshot so every robot of the experiment starts
    from the same prior training, with or without central control.
    """
    c = copy.deepcopy(cfg)
    starts = [(m["x"], m["y"], m["heading"]) for m in c["mobile"]]
    c["mobile"] = c["mobile"][:1]
    c["plant"]["central"] = False
    cap = c["bins"]["capacity"]
    c["bins"]["replacement_fill"] = cap
    for b in c["arena"]["benches"]:
        b["fill_period"] = 0
    sim = Simulation(c, seed)
    rid = c["mobile"][0]["id"]
    robot, body = sim.mobiles[rid], sim.world.bodies[rid]
    for x, y, th in starts:
        for b in c["arena"]["benches"]:
            sim.world.place(rid, x, y, th)
            robot.relocate((x, y, th))
            robot.tutor = (f"fetch:{b['id']}", b["x"], b["y"])
            t0 = sim.tick
            while sim.tick - t0 < PRETRAIN_CAP and (robot.tutor is not None or body.load is not None or robot.loaded):
                sim.step()
            robot.tutor = None
    doc = sim.save_snapshot()
    return {"format": doc["format"], "version": doc["version"], "agents": {}, "kinds": {"mobile": doc["agents"][rid]}}


def run_navigation_experiment(cfg: dict, seeds: list[int], snapshot: dict | None = None, pretrain: bool = True,
                              jobs: int = 1, traj_every: int = 0) -> ExperimentResult:
    """Paired central on/off runs on identical seeds; near-miss, service entropy, rate and overlap compared."""
    if len(cfg["mobile"]) < 2:
        raise ExperimentError(f"navigation experiment requires at least 2 mobile robots, got {len(cfg['mobile'])}")
    if len(cfg["arena"]["benches"]) < 2:
        raise ExperimentError("navigation experiment requires at least 2 benches")
    seeds = sorted(seeds)
    if snapshot is None and pretrain:
        snapshot = pretrain_navigation(cfg)
    on_cfg, off_cfg = paired_configs(cfg)
    on, t_on = run_condition(on_cfg, seeds, True, snapshot, jobs, traj_every)
    off, t_off = run_condition(off_cfg, seeds, False, snapshot, jobs, traj_every)
    comps = {}
    for key, hib in (("near_miss", False), ("entropy", True), ("rate", True), ("overlap", False)):
        comps[key] = ConditionComparison.build(key, seeds, [getattr(m, key) for m in on],
                                               [getattr(m, key) for m in off], hib)
    return ExperimentResult("navigation", seeds, {"on": on, "off": off}, comps,
                            {"pretrained": snapshot is not None}, t_on + t_off)


def recovery_ticks(m: RunMetrics, cfg: dict) -> int:
    """Recovery time; a run that never recovers is censored at the remaining run length."""
    if m.recovery is not None:
        return m.recovery
    swap = min((s["tick"] for s in cfg["swaps"]), default=0)
    return max(0, m.ticks - swap)


def run_naive(cfg: dict, seed: int) -> RunMetrics:
    """Central off, and every gripper forgets all it learned just before the first swap."""
    c = copy.deepcopy(cfg)
    c["plant"]["central"] = False
    sim = Simulation(c, seed)
    swap = min((s["tick"] for s in c["swaps"]), default=None)
    for _ in range(c["run"]["ticks"]):
        if sim.tick == swap:
            for g in sim.grippers.values():
                g.ltm = LTM(g.ltm.p, g.layout.dim)
                g.am = AssociationMatrix.zeros(g.am.W.shape[0], g.am.W.shape[1], eta=g.am.eta, rho=g.am.rho,
                                               theta=g.am.theta, labels=list(g.am.labels))
                g.comfort_known.clear()
        sim.step()
    sim.log.close(sim.tick)
    return compute_metrics(sim.log.records)


def run_generalization_experiment(cfg: dict, seeds: list[int], jobs: int = 1,
                                  ratio: float = 0.2) -> ExperimentResult:
    """Worker swap with central on/off, plus a naive-gripper baseline on independent seeds."""
    if len(cfg["grippers"]) < 2 or len(cfg["workers"]) < 2:
        raise ExperimentError("generalization experiment requires 2 grippers and 2 workers")
    if not cfg["swaps"]:
        raise ExperimentError("generalization experiment requires a swap event")
    seeds = sorted(seeds)
    on_cfg, off_cfg = paired_configs(cfg)
    on, _ = run_condition(on_cfg, seeds, True, None, jobs)
    off, _ = run_condition(off_cfg, seeds, False, None, jobs)
    naive = _map(run_naive, [(cfg, s + NAIVE_SEED_OFFSET) for s in seeds], jobs)
    r_on = [recovery_ticks(m, cfg) for m in on]
    r_off = [recovery_ticks(m, cfg) for m in off]
    r_naive = [recovery_ticks(m, cfg) for m in naive]
    comps = {
        "recovery": ConditionComparison.build("recovery", seeds, r_on, r_off, False),
        "adapt_error_post": ConditionComparison.build("adapt_error_post", seeds, [m.adapt_error_post for m in on],
                                                      [m.adapt_error_post for m in off], False),
        "recovery_naive": ConditionComparison.build("recovery_naive", seeds, r_off, r_naive, False,
                                                    ("off", "naive")),
    }
    hits = sum(1 for a, b in zip(r_on, r_off) if a <= ratio * b)
    extra = {"ratio": ratio, "ratio_fraction": hits / len(seeds) if seeds else 0.0,
             "naive_seed_offset": NAIVE_SEED_OFFSET}
    return ExperimentResult("generalization", seeds, {"on": on, "off": off, "naive": naive}, comps, extra)


# -- output ------------------------------------------------------------------------------------

def _atomic_write(path: Path, write) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: Path, rows: list[dict]) -> None:
    cols: list[str] = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)

    def w(fh):
        wr = csv.DictWriter(fh, fieldnames=cols)
        wr.writeheader()
        wr.writerows(rows)
    _atomic_write(path, w)


def write_outputs(result: ExperimentResult, out_dir: str | Path) -> list[Path]:
    """metrics.csv (one row per run), summary.json, and trajectories.csv when collected."""
    out = Path(out_dir)
    paths = [out / "metrics.csv", out / "summary.json"]
    _write_csv(paths[0], result.rows())
    _atomic_write(paths[1], lambda fh: fh.write(json.dumps(result.summary(), indent=2, sort_keys=True) + "\n"))
    if result.trajectories:
        paths.append(out / "trajectories.csv")
        _write_csv(paths[2], result.trajectories)
    return paths

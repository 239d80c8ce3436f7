"""Command line: run a scenario, run a benchmark over seeds, or replay a log.

Exit codes: 0 success, 2 configuration/input error, 3 invariant violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from ..bench import experiments as ex
from ..bench import scenarios
from ..bench.metrics import compute_metrics
from ..config import ConfigError, parse_config
from ..dac import snapshot as snap
from ..eventlog import LogError, VersionError, read
from ..simulation import InvariantViolation, Simulation

OUT_ENV = "DACPLANT_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 2, 3

BENCHES = {
    "foraging": scenarios.foraging,
    "navigation": scenarios.navigation,
    "generalization": scenarios.generalization,
}


def default_out() -> str:
    return os.environ.get(OUT_ENV, "out")


def load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as e:
        raise ConfigError([f"cannot read config {path}: {e.strerror}"]) from None
    except json.JSONDecodeError as e:
        raise ConfigError([f"{path}: not valid JSON ({e.msg} at line {e.lineno})"]) from None
    return parse_config(doc)


def _central(v: str | None) -> bool | None:
    return None if v is None else v == "on"


def cmd_run(a) -> int:
    cfg = load_config(a.config)
    if a.ticks is not None:
        cfg["run"]["ticks"] = a.ticks
    snap_in = a.snapshot_in or cfg["run"]["snapshot_in"]
    snap_out = a.snapshot_out or cfg["run"]["snapshot_out"]
    doc = None
    if snap_in:
        try:
            doc = snap.load(snap_in)
        except (OSError, ValueError) as e:
            raise ConfigError([f"snapshot {snap_in}: {e}"]) from None
    out = Path(a.out or default_out())
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "log.jsonl"
    sim = Simulation(cfg, a.seed, central=_central(a.central), log_path=str(log_path), snapshot_in=doc,
                     check_invariants=True)
    res = sim.run()
    m = compute_metrics(res.log.records)
    (out / "metrics.json").write_text(json.dumps(m.to_dict(), indent=2, sort_keys=True) + "\n")
    if snap_out:
        d = sim.save_snapshot()
        snap.save(snap_out, d["agents"], d["kinds"])
    print(f"run: seed {sim.seed}, {sim.tick} ticks, central {'on' if sim.cfg['plant']['central'] else 'off'}")
    print(f"log: {log_path}")
    print(json.dumps(m.row(), sort_keys=True))
    return EXIT_OK


def cmd_bench(a) -> int:
    make = BENCHES[a.experiment]
    cfg = load_config(a.config) if a.config else make()
    if a.ticks is not None:
        cfg["run"]["ticks"] = a.ticks
    n = a.seeds if a.seeds is not None else cfg["bench"]["seeds"]
    seeds = [a.seed + k for k in range(n)]
    every = a.trajectories
    if a.experiment == "foraging":
        res = ex.run_foraging_experiment(cfg, seeds, a.episodes, jobs=a.jobs)
    elif a.experiment == "navigation":
        sn = None
        if a.snapshot_in:
            sn = snap.load(a.snapshot_in)
        res = ex.run_navigation_experiment(cfg, seeds, snapshot=sn, pretrain=not a.no_pretrain, jobs=a.jobs,
                                           traj_every=every)
    else:
        res = ex.run_generalization_experiment(cfg, seeds, jobs=a.jobs)
    paths = ex.write_outputs(res, a.out or default_out())
    for k, c in sorted(res.comparisons.items()):
        print(f"{k:18s} {c.labels[0]} vs {c.labels[1]}: win fraction {c.win_fraction:.2f}, p = {c.p_value:.4g}"
              + (" (flagged: too few untied pairs)" if c.test.flagged else ""))
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


def cmd_replay(a) -> int:
    try:
        recs = read(a.log)
    except VersionError as e:
        print(f"replay refused: log version {e.found}, this build reads version {e.expected}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, LogError) as e:
        print(f"replay failed: {e}", file=sys.stderr)
        return EXIT_CONFIG
    m = compute_metrics(recs)
    print(json.dumps(m.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dacplant", description="Multi-agent DAC plant simulator and benchmarks")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario and write its event log and metrics")
    r.add_argument("--config", required=True, help="scenario document (JSON)")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--ticks", type=int, default=None)
    r.add_argument("--central", choices=("on", "off"), default=None)
    r.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./out)")
    r.add_argument("--snapshot-in", default=None)
    r.add_argument("--snapshot-out", default=None)
    r.set_defaults(fn=cmd_run)

    b = sub.add_parser("bench", help="run a benchmark over seeds and write metrics.csv and summary.json")
    b.add_argument("experiment", choices=sorted(BENCHES))
    b.add_argument("--config", default=None, help="scenario document (default: built-in scenario)")
    b.add_argument("--seeds", type=int, default=None, help="number of seeds")
    b.add_argument("--seed", type=int, default=0, help="first seed")
    b.add_argument("--ticks", type=int, default=None)
    b.add_argument("--out", default=None)
    b.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    b.add_argument("--episodes", type=int, default=60, help="foraging: deliveries per run")
    b.add_argument("--snapshot-in", default=None, help="navigation: pretrained memory instead of tutoring")
    b.add_argument("--no-pretrain", action="store_true", help="navigation: start with empty memories")
    b.add_argument("--trajectories", type=int, default=0, metavar="EVERY",
                   help="navigation: also write trajectories.csv, one sample every EVERY ticks")
    b.set_defaults(fn=cmd_bench)

    rp = sub.add_parser("replay", help="recompute metrics from an event log")
    rp.add_argument("log")
    rp.set_defaults(fn=cmd_replay)
    return p


def main(argv: list[str] | None = None) -> int:
    a = build_parser().parse_args(argv)
    if getattr(a, "ticks", None) is not None and a.ticks < 0:
        print("config error: --ticks must be >= 0", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return a.fn(a)
    except ConfigError as e:
        print(f"config error:\n  " + "\n  ".join(e.errors), file=sys.stderr)
        return EXIT_CONFIG
    except snap.SnapshotError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ex.ExperimentError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as e:
        print(f"invariant violation at tick {e.tick}: {e}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())

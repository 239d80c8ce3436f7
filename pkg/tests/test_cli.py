import hashlib
import json

import numpy as np
import pytest

from dacplant.bench import scenarios
from dacplant.cli.main import OUT_ENV, main
from dacplant.config import ConfigError, checksum, parse_config
from dacplant.dac import snapshot as snap
from dacplant.eventlog import LOG_VERSION, dumps, read
from dacplant.simulation import Simulation

MINIMAL = {"arena": {"width": 4.0, "height": 4.0}}


def write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


# -- parse_config ---------------------------------------------------------------------------------

def test_minimal_document_gets_defaults():
    c = parse_config(MINIMAL)
    assert c["dac"]["eta"] == 0.05 and c["dac"]["cap"] == 0.3 and c["dac"]["stm"] == 50
    assert c["plant"]["latency"] == 1 and c["plant"]["exchange_period"] == 200
    assert c["bench"]["d_near"] == 0.8 and c["bench"]["eps_adapt"] == 0.1
    assert c["agents"]["d_min"] == 0.4 and c["agents"]["d_max"] == 1.2


def test_trust_out_of_range_names_field():
    with pytest.raises(ConfigError) as e:
        parse_config({**MINIMAL, "workers": [{"id": "w0", "cue": 100, "trust": 1.5}]})
    assert any("workers/0/trust" in m for m in e.value.errors)


def test_missing_worker_reference():
    doc = {"arena": {"width": 4.0, "height": 4.0,
                     "benches": [{"id": "b0", "x": 2.0, "y": 2.0, "marker": 10, "worker": "ghost"}]}}
    with pytest.raises(ConfigError) as e:
        parse_config(doc)
    assert any("ghost" in m for m in e.value.errors)


def test_all_violations_reported():
    doc = {**MINIMAL, "workers": [{"id": "w0", "cue": 100, "trust": 1.5, "pace": -1}], "plant": {"drop": 1.0}}
    with pytest.raises(ConfigError) as e:
        parse_config(doc)
    assert len(e.value.errors) == 3


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="bogus"):
        parse_config({**MINIMAL, "bogus": 1})


def test_checksum_excludes_field():
    a = parse_config(MINIMAL)
    b = parse_config({**MINIMAL, "plant": {"central": False}})
    assert checksum(a) != checksum(b)
    assert checksum(a, ("plant.central",)) == checksum(b, ("plant.central",))


# -- run ----------------------------------------------------------------------------------------------

def run_cli(tmp_path, cfg_path, out, *extra):
    return main(["run", "--config", cfg_path, "--out", str(out), *extra])


def test_same_seed_same_checksum(tmp_path):
    cfg = write_cfg(tmp_path, scenarios.navigation(ticks=100))
    assert run_cli(tmp_path, cfg, tmp_path / "a", "--seed", "3") == 0
    assert run_cli(tmp_path, cfg, tmp_path / "b", "--seed", "3") == 0
    h = [hashlib.sha256((tmp_path / d / "log.jsonl").read_bytes()).hexdigest() for d in ("a", "b")]
    assert h[0] == h[1]


def test_ticks_zero_header_only(tmp_path):
    cfg = write_cfg(tmp_path, scenarios.foraging())
    assert run_cli(tmp_path, cfg, tmp_path / "o", "--ticks", "0") == 0
    recs = read(tmp_path / "o" / "log.jsonl")
    assert [r["type"] for r in recs] == ["header", "end"]
    m = json.loads((tmp_path / "o" / "metrics.json").read_text())
    assert m["deliveries"] == 0 and m["occupancy"] == 0 and m["rate"] == 0


def test_snapshot_round_trip(tmp_path):
    cfg = scenarios.generalization(ticks=600, swap_tick=400)
    p = write_cfg(tmp_path, cfg)
    sfile = tmp_path / "snap.json"
    assert run_cli(tmp_path, p, tmp_path / "a", "--snapshot-out", str(sfile)) == 0
    a = Simulation(cfg, 0, keep_log=False)
    a.run()
    b = Simulation(cfg, 0, keep_log=False, snapshot_in=snap.load(sfile))
    for gid in a.grippers:
        assert snap.ltm_to_dict(b.grippers[gid].ltm) == snap.ltm_to_dict(a.grippers[gid].ltm)
        assert np.array_equal(b.grippers[gid].am.W, a.grippers[gid].am.W)
    assert any(len(g.ltm) for g in b.grippers.values())


def test_bad_config_exit_two(tmp_path, capsys):
    p = write_cfg(tmp_path, {**MINIMAL, "workers": [{"id": "w0", "cue": 100, "trust": 1.5}]})
    assert run_cli(tmp_path, p, tmp_path / "o") == 2
    assert "workers/0/trust" in capsys.readouterr().err


def test_unreadable_config_exit_two(tmp_path):
    assert run_cli(tmp_path, str(tmp_path / "nope.json"), tmp_path / "o") == 2
    (tmp_path / "bad.json").write_text("{")
    assert run_cli(tmp_path, str(tmp_path / "bad.json"), tmp_path / "o") == 2


def test_negative_ticks_exit_two(tmp_path):
    cfg = write_cfg(tmp_path, scenarios.foraging())
    assert run_cli(tmp_path, cfg, tmp_path / "o", "--ticks", "-1") == 2


def test_invariant_violation_exit_three(tmp_path, monkeypatch, capsys):
    from dacplant import simulation

    def boom(self, aid, agent, act, t):
        raise simulation.InvariantViolation(t, "forced")

    monkeypatch.setattr(simulation.Simulation, "_check_safety", boom)
    cfg = write_cfg(tmp_path, scenarios.foraging(ticks=5))
    assert run_cli(tmp_path, cfg, tmp_path / "o") == 3
    assert "tick 0" in capsys.readouterr().err


def test_env_default_out(tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "envout"))
    cfg = write_cfg(tmp_path, scenarios.foraging(ticks=5))
    assert main(["run", "--config", cfg]) == 0
    assert (tmp_path / "envout" / "log.jsonl").exists()


def test_central_flag_override(tmp_path):
    cfg = write_cfg(tmp_path, scenarios.navigation(ticks=30))
    assert run_cli(tmp_path, cfg, tmp_path / "o", "--central", "off") == 0
    recs = read(tmp_path / "o" / "log.jsonl")
    assert recs[0]["config"]["plant"]["central"] is False


# -- replay ------------------------------------------------------------------------------------------

def test_replay_matches_live(tmp_path, capsys):
    cfg = write_cfg(tmp_path, scenarios.navigation(ticks=150))
    run_cli(tmp_path, cfg, tmp_path / "o")
    live = json.loads((tmp_path / "o" / "metrics.json").read_text())
    capsys.readouterr()
    assert main(["replay", str(tmp_path / "o" / "log.jsonl")]) == 0
    assert json.loads(capsys.readouterr().out) == live


def test_replay_empty_run_zero_metrics(tmp_path, capsys):
    cfg = write_cfg(tmp_path, scenarios.navigation())
    run_cli(tmp_path, cfg, tmp_path / "o", "--ticks", "0")
    capsys.readouterr()
    assert main(["replay", str(tmp_path / "o" / "log.jsonl")]) == 0
    m = json.loads(capsys.readouterr().out)
    assert m["deliveries"] == 0 and m["near_miss"] == 0 and m["entropy_defined"] is False


def test_replay_version_mismatch(tmp_path, capsys):
    cfg = write_cfg(tmp_path, scenarios.foraging(ticks=3))
    run_cli(tmp_path, cfg, tmp_path / "o")
    lines = (tmp_path / "o" / "log.jsonl").read_text().splitlines()
    head = json.loads(lines[0])
    head["version"] = LOG_VERSION + 1
    lines[0] = dumps(head)
    (tmp_path / "old.jsonl").write_text("\n".join(lines) + "\n")
    capsys.readouterr()
    assert main(["replay", str(tmp_path / "old.jsonl")]) == 2
    err = capsys.readouterr().err
    assert str(LOG_VERSION + 1) in err and str(LOG_VERSION) in err


def test_replay_truncated(tmp_path, capsys):
    cfg = write_cfg(tmp_path, scenarios.foraging(ticks=3))
    run_cli(tmp_path, cfg, tmp_path / "o")
    lines = (tmp_path / "o" / "log.jsonl").read_text().splitlines()[:-1]
    (tmp_path / "cut.jsonl").write_text("\n".join(lines) + "\n")
    assert main(["replay", str(tmp_path / "cut.jsonl")]) == 2
    assert "last valid tick 2" in capsys.readouterr().err


# -- bench ---------------------------------------------------------------------------------------------

def test_bench_generalization_writes_outputs(tmp_path, capsys):
    out = tmp_path / "b"
    assert main(["bench", "generalization", "--seeds", "2", "--ticks", "400", "--out", str(out)]) == 0
    assert (out / "metrics.csv").exists() and (out / "summary.json").exists()
    assert "recovery" in capsys.readouterr().out


def test_bench_navigation_single_robot_rejected(tmp_path):
    cfg = write_cfg(tmp_path, scenarios.navigation(n_robots=1))
    assert main(["bench", "navigation", "--config", cfg, "--seeds", "1", "--out", str(tmp_path / "o")]) == 2

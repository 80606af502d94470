import json
import os

import numpy as np
import pytest

from sloc.cli import main
from sloc.config import (
    ConfigError,
    ExperimentConfig,
    parse_config,
    run_seeds,
    validate_config,
)

BASE = """
[experiment]
kind = simulate
seed = 7

[density]
name = gaussian
n = 1

[schedule]
dt = 0.01
t_max = 0.2
stride = 5

[runs]
count = 3
strategy = closed-form
"""


def write(tmp_path, text, name="cfg.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


# --- config parsing ---------------------------------------------------------


def test_parse_config_fields():
    cfg = parse_config(BASE)
    assert cfg.kind == "simulate"
    assert cfg.density == "gaussian"
    assert (cfg.n, cfg.dt, cfg.t_max, cfg.stride) == (1, 0.01, 0.2, 5)
    assert cfg.runs == 3 and cfg.seed == 7
    assert cfg.strategy == "closed-form"


def test_config_hash_ignores_output_path():
    a = parse_config(BASE)
    b = parse_config(BASE)
    b.out = "elsewhere"
    assert a.config_hash() == b.config_hash()
    b.dt = 0.02
    assert a.config_hash() != b.config_hash()


def test_parse_config_reports_all_violations():
    bad = BASE.replace("dt = 0.01", "dt = fast\nwarp = 9").replace(
        "name = gaussian", "name = cauchy"
    )
    with pytest.raises(ConfigError) as err:
        parse_config(bad)
    fields = [f for f, _ in err.value.violations]
    assert "schedule.dt" in fields
    assert "density.name" in fields
    assert "schedule.warp" in fields


def test_parse_config_requires_kind_and_seed():
    with pytest.raises(ConfigError) as err:
        parse_config("[density]\nname = gaussian\n")
    assert any(f == "experiment.kind" for f, _ in err.value.violations)
    with pytest.raises(ConfigError) as err:
        parse_config("[experiment]\nkind = simulate\n")
    assert any(f == "experiment.seed" for f, _ in err.value.violations)


def test_validate_config_constraints():
    cfg = ExperimentConfig(kind="simulate", seed=1, dt=-1.0)
    assert any(f == "schedule.dt" for f, _ in validate_config(cfg))
    cfg = ExperimentConfig(
        kind="simulate", seed=1, strategy="cloud", particles=10
    )
    assert any(f == "runs.particles" for f, _ in validate_config(cfg))


def test_run_seeds_deterministic():
    assert run_seeds(7, 3) == run_seeds(7, 3)
    assert len(set(run_seeds(7, 64))) == 64


# --- end-to-end subcommands -------------------------------------------------


def test_simulate_writes_outputs_and_manifest(tmp_path):
    cfg_path = write(tmp_path, BASE)
    out = tmp_path / "out"
    rc = main(["simulate", "--config", cfg_path, "--out", str(out)])
    assert rc == 0
    names = sorted(os.listdir(out))
    assert "manifest.json" in names and "summary.json" in names
    assert "trajectory_000.csv" in names and "trajectory_002.csv" in names
    man = json.loads((out / "manifest.json").read_text())
    assert man["seeds"] == run_seeds(7, 3)
    assert man["checks_failed"] == 0
    assert "summary.json" in man["files"]
    first = (out / "trajectory_000.csv").read_text().splitlines()
    assert first[0] == "# sloc-csv v1"


def test_simulate_byte_deterministic(tmp_path):
    cfg_path = write(tmp_path, BASE)
    blobs = []
    for sub in ("o1", "o2"):
        out = tmp_path / sub
        assert main(["simulate", "--config", cfg_path, "--out", str(out)]) == 0
        blobs.append(
            (
                (out / "trajectory_000.csv").read_bytes(),
                (out / "summary.json").read_bytes(),
            )
        )
    assert blobs[0] == blobs[1]


def test_cli_seed_override_changes_output(tmp_path):
    cfg_path = write(tmp_path, BASE)
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    main(["simulate", "--config", cfg_path, "--out", str(out1)])
    main(["simulate", "--config", cfg_path, "--seed", "8", "--out", str(out2)])
    assert (out1 / "trajectory_000.csv").read_bytes() != (
        out2 / "trajectory_000.csv"
    ).read_bytes()


def test_bad_config_exits_two(tmp_path, capsys):
    cfg_path = write(tmp_path, BASE.replace("dt = 0.01", "dt = -1"))
    assert main(["simulate", "--config", cfg_path]) == 2
    assert "schedule.dt" in capsys.readouterr().err


def test_gaussian_check_pass_and_fail(tmp_path):
    text = BASE.replace("kind = simulate", "kind = gaussian-check")
    cfg_path = write(tmp_path, text)
    assert main(["gaussian-check", "--config", cfg_path, "--out", str(tmp_path / "g")]) == 0
    strict = text + "\n[tolerances]\ngaussian_rel = 1e-15\n"
    cfg_path2 = write(tmp_path, strict, name="strict.ini")
    rc = main(["gaussian-check", "--config", cfg_path2, "--out", str(tmp_path / "gs")])
    assert rc == 1
    summary = json.loads((tmp_path / "gs" / "summary.json").read_text())
    assert summary["covariance-exponential-decay"]["status"] == "fail"


def test_constants_subcommand(tmp_path):
    text = BASE.replace("kind = simulate", "kind = constants").replace("n = 1", "n = 2")
    cfg_path = write(tmp_path, text)
    out = tmp_path / "c"
    assert main(["constants", "--config", cfg_path, "--out", str(out)]) == 0
    rep = json.loads((out / "constants_exponential.json").read_text())
    assert rep["k_stat"] == pytest.approx(2.0, rel=0.03)
    summary = json.loads((out / "summary.json").read_text())
    assert all(v["status"] == "pass" for v in summary.values())


def test_isoperimetry_subcommand(tmp_path):
    text = (
        BASE.replace("kind = simulate", "kind = isoperimetry")
        .replace("n = 1", "n = 2")
        .replace("count = 3", "count = 40")
        .replace("t_max = 0.2", "t_max = 0.15")
    )
    cfg_path = write(tmp_path, text)
    out = tmp_path / "iso"
    assert main(["isoperimetry", "--config", cfg_path, "--out", str(out)]) == 0
    lines = (out / "mass_process.csv").read_text().splitlines()
    assert lines[0] == "# sloc-csv v1"
    assert lines[1] == "t,mean_g,var_g,qv_rate,band_frequency"


def test_couple_subcommand(tmp_path):
    text = (
        BASE.replace("kind = simulate", "kind = couple")
        .replace("n = 1", "n = 2")
        .replace("count = 3", "count = 30")
        .replace("dt = 0.01", "dt = 0.02")
        .replace("t_max = 0.2", "t_max = 0.4")
        .replace("strategy = closed-form", "strategy = cloud\nparticles = 2000")
    )
    cfg_path = write(tmp_path, text)
    out = tmp_path / "cp"
    assert main(["couple", "--config", cfg_path, "--out", str(out)]) == 0
    lines = (out / "coupled_000.csv").read_text().splitlines()
    assert lines[0] == "# sloc-csv v1"
    assert lines[1] == "t,S,gap_sq,d_hs_sq,trA,trC"
    summary = json.loads((out / "summary.json").read_text())
    assert summary["trace-inequality-per-record"]["status"] == "pass"


def test_report_merges_summaries(tmp_path):
    cfg_path = write(tmp_path, BASE)
    parent = tmp_path / "all"
    main(["simulate", "--config", cfg_path, "--out", str(parent / "sim")])
    text = BASE.replace("kind = simulate", "kind = gaussian-check")
    cfg2 = write(tmp_path, text, name="g.ini")
    main(["gaussian-check", "--config", cfg2, "--out", str(parent / "gc")])
    assert main(["report", "--out", str(parent)]) == 0
    rep = json.loads((parent / "report.json").read_text())
    assert "sim/companion-trace-mean" in rep
    assert "gc/covariance-exponential-decay" in rep

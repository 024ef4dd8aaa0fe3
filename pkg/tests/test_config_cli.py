import json
import zlib

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from obstaclewave import cli, pipeline
from obstaclewave.config import RunConfig, load_config, parse_config, stream
from obstaclewave.errors import ConfigError
from obstaclewave.report import SCHEMA_ID, SectionResult, Table


def test_shipped_configs_parse(configs_dir):
    for p in sorted(configs_dir.glob("*.ini")):
        cfg = load_config(p)
        assert isinstance(cfg, RunConfig)


def test_echo_roundtrip(configs_dir):
    for p in sorted(configs_dir.glob("*.ini")):
        cfg = load_config(p)
        again = parse_config(cfg.to_ini())
        assert again == cfg and again.config_hash() == cfg.config_hash()


def test_hash_ignores_output_directory(baseline_cfg):
    a = parse_config(baseline_cfg.to_ini())
    b = parse_config(baseline_cfg.to_ini())
    b.out = "elsewhere"
    assert a.config_hash() == b.config_hash()
    b.seed += 1
    assert a.config_hash() != b.config_hash()


@pytest.mark.parametrize("text,match", [
    ("[mesh]\nnr = 10\n", "unknown key 'nr'"),
    ("[solver]\nx = 1\n", "unknown section"),
    ("[run]\nseed = -1\n", "unsigned 64-bit"),
    ("[run]\nseed = 18446744073709551616\n", "unsigned 64-bit"),
    ("[metric]\nname = bump\nwidth = 2\n", "unknown key 'width' for 'bump'"),
    ("[metric]\nname = sphere\n", "unknown name 'sphere'"),
    ("[time]\nn_t = many\n", "cannot parse"),
    ("[mesh]\nn_r = 3\nn_r = 4\n", "n_r"),
    ("no section header\n", "no section"),
])
def test_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_factory_parameters_reach_the_config():
    cfg = parse_config("[metric]\nname = conformal_trig\namp = 0.05\n[weight]\nname = quadratic\nr0 = 1.0\n")
    assert cfg.metric == "conformal_trig" and cfg.metric_params == {"amp": 0.05}


@given(seed=st.integers(0, 2 ** 64 - 1))
def test_named_streams_are_reproducible_and_distinct(seed):
    a = stream(seed, "family").random(4)
    assert np.array_equal(a, stream(seed, "family").random(4))
    assert not np.array_equal(a, stream(seed, "noise").random(4))
    ss = np.random.SeedSequence([seed, zlib.crc32(b"family")])
    assert np.array_equal(a, np.random.default_rng(ss).random(4))


# -- command line -------------------------------------------------------------

def test_cli_config_error_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.ini"
    p.write_text("[mesh]\nbogus = 1\n")
    assert cli.main(["check-weight", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "bogus" in capsys.readouterr().err
    assert cli.main(["check-weight", "--config", str(tmp_path / "missing.ini")]) == 2
    assert cli.main(["check-weight", "--config", str(p), "--seed", "abc"]) == 2


def test_cli_infeasible_time_names_threshold(tmp_path, capsys, configs_dir):
    text = (configs_dir / "quick.ini").read_text().replace("T = 2.0", "T = 1.4")
    p = tmp_path / "short.ini"
    p.write_text(text)
    assert cli.main(["solve-forward", "--config", str(p), "--out", str(tmp_path / "o")]) == 3
    err = capsys.readouterr().err
    assert "InfeasibleError" in err and "T* = 1.5" in err
    assert not (tmp_path / "o").exists()


def test_cli_rejects_cfl_violation_before_solving(tmp_path, capsys, configs_dir):
    text = (configs_dir / "quick.ini").read_text().replace("n_t = 50", "n_t = 20")
    p = tmp_path / "cfl.ini"
    p.write_text(text)
    assert cli.main(["solve-forward", "--config", str(p), "--out", str(tmp_path / "o")]) == 3
    assert "CFLError" in capsys.readouterr().err


def test_cli_bundle_contents(tmp_path, configs_dir, capsys):
    out = tmp_path / "run"
    code = cli.main(["solve-forward", "--config", str(configs_dir / "quick.ini"), "--out", str(out), "--seed", "7"])
    assert code == 0
    assert "PASS  solve-forward" in capsys.readouterr().out
    doc = json.loads((out / "report_solve-forward.json").read_text())
    assert doc["schema"] == SCHEMA_ID and doc["passed"] and doc["seed"] == 7
    assert set(doc["timings"]) == {"solve_forward", "total"}
    cfg = load_config(configs_dir / "quick.ini")
    cfg.seed = 7
    assert doc["config_hash"] == cfg.config_hash()
    for name in doc["files"]:
        assert (out / name).exists()
    assert any(n.endswith(".png") for n in doc["files"]) and any(n.endswith(".csv") for n in doc["files"])
    assert parse_config((out / "config_echo.ini").read_text()).config_hash() == doc["config_hash"]


def test_cli_failed_invariant_exit_code(tmp_path, configs_dir, capsys, monkeypatch):
    def failing(ctx):
        return SectionResult("check_weight", {}, {"t": Table(["k"], [[1]])}, [], {"forced": False})
    monkeypatch.setitem(pipeline.STAGES, "check-weight", failing)
    code = cli.main(["check-weight", "--config", str(configs_dir / "quick.ini"), "--out", str(tmp_path / "o")])
    assert code == 1
    assert "FAIL  check_weight.forced" in capsys.readouterr().out
    doc = json.loads((tmp_path / "o" / "report_check-weight.json").read_text())
    assert doc["passed"] is False


def test_cli_unknown_command():
    with pytest.raises(SystemExit):
        cli.main(["explode", "--config", "x.ini"])

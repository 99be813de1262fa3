import json

import pytest

from anderson_levels.harness import cli
from anderson_levels.harness.config import ConfigError, config_from_dict, parse_config
from anderson_levels.harness.runner import run_experiment, to_jsonable
from anderson_levels.harness.selftest import outputs_identical
from anderson_levels.parallel import RealizationError, map_realizations
from anderson_levels.spectral_stats import HypothesisError


def test_minimal_config_valid_and_defaults_echoed():
    cfg = parse_config('{"experiment":"dirichlet-oracle","n_max":200}')
    assert cfg.n_max == 200
    echo = cfg.echo()
    assert echo["seed"] == 12345 and echo["disorder"]["law"] == "uniform" and echo["gap_n_max"] == 10000
    assert "seed" in cfg.filled_defaults and "n_max" not in cfg.filled_defaults


@pytest.mark.parametrize(
    "raw,path",
    [
        ({"experiment": "decorrelation", "alpha": 1.5}, "alpha"),
        ({"experiment": "wegner", "typo_key": 1}, "typo_key"),
        ({"experiment": "wegner", "J": [2.0, 1.0]}, "J"),
        ({"experiment": "minami", "J": [1.0, 2.0], "K": [1.5, 3.0]}, "K"),
        ({"experiment": "wegner", "disorder": {"law": "cauchy"}}, "disorder.law"),
        ({"experiment": "wegner", "disorder": {"width": 2}}, "disorder.width"),
        ({"experiment": "poisson", "windows": [[-1, 1], [0, 2]]}, "windows"),
        ({"experiment": "box-matching", "L": 50, "ell": [50]}, "ell"),
        ({"experiment": "dos", "realizations": 0}, "realizations"),
        ({"experiment": "nope"}, "experiment"),
        ({"n_max": 3}, "experiment"),
        ({"experiment": "wegner", "seed": -1}, "seed"),
        ({"experiment": "wegner", "L": True}, "L"),
    ],
)
def test_invalid_configs_name_the_key(raw, path):
    with pytest.raises(ConfigError) as err:
        config_from_dict(raw)
    assert err.value.path == path
    assert str(err.value).startswith(path)


def test_non_object_and_bad_json():
    with pytest.raises(ConfigError):
        parse_config("[1, 2]")
    with pytest.raises(ConfigError, match="invalid JSON"):
        parse_config("{")


def test_dirichlet_run_outputs(tmp_path):
    status, summary = run_experiment(parse_config('{"experiment":"dirichlet-oracle","n_max":200,"gap_n_max":500}'), out_dir=tmp_path)
    assert status == 0
    assert summary["estimates"]["max_eigenvalue_deviation"] < 1e-10
    on_disk = json.loads((tmp_path / "summary.json").read_text())
    assert on_disk == summary and "wall_time_s" not in json.dumps(on_disk)
    run = json.loads((tmp_path / "run.json").read_text())
    assert run["wall_time_s"] >= 0 and run["workers"] == 1
    raw = (tmp_path / "samples.csv").read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == "n,max_eigenvalue_deviation,max_eigenvector_deviation,n2_min_gap"
    assert len(lines) == 200
    n, ev, vec, gap = lines[1].split(",")
    assert n == "2" and float(gap) == pytest.approx(8.0, rel=1e-15)
    assert repr(float(ev)) == ev


def test_json_sanitizer():
    assert to_jsonable({"a": float("nan"), "b": [float("inf"), 1.5], "c": (1, 2)}) == {"a": None, "b": [None, 1.5], "c": [1, 2]}


@pytest.mark.parametrize(
    "raw",
    [
        {"experiment": "wegner", "L": 40, "realizations": 300},
        {"experiment": "decorrelation", "L": [60, 120], "realizations": 300},
        {"experiment": "poisson", "L": 200, "realizations": 40, "dos_realizations": 20},
        {"experiment": "localization", "L": 40, "realizations": 3},
    ],
)
def test_worker_count_independence(raw):
    assert outputs_identical(raw, (1, 3))


def test_poisson_refused_outside_spectrum(tmp_path):
    cfg = config_from_dict({"experiment": "poisson", "L": 100, "E": -2.5, "realizations": 5, "dos_realizations": 10})
    with pytest.raises(HypothesisError, match=r"nu\(E\) > 0"):
        run_experiment(cfg, out_dir=tmp_path)


def _boom(r):
    if r == 3:
        raise FloatingPointError("bad")
    return r


def test_realization_failure_carries_seed_and_index():
    with pytest.raises(RealizationError, match=r"realization 3 \(seed=77\)") as err:
        map_realizations(_boom, range(5), workers=1, seed=77)
    assert err.value.realization_index == 3 and err.value.seed == 77
    with pytest.raises(RealizationError, match=r"realization 3"):
        map_realizations(_boom, range(5), workers=2, seed=77)


def test_cli_run_seed_override_and_env_workers(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"experiment":"wegner","L":30,"realizations":50}')
    monkeypatch.setenv("ANDERSON_LEVELS_WORKERS", "2")
    assert cli.main(["run", "--config", str(cfg), "--seed", "9", "--out", str(tmp_path / "o")]) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["config"]["seed"] == 9
    assert json.loads((tmp_path / "o" / "run.json").read_text())["workers"] == 2
    assert "PASS ratio_below_density_max" in capsys.readouterr().out


def test_cli_reports_config_errors(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"experiment":"wegner","typo_key":1}')
    assert cli.main(["run", "--config", str(cfg)]) == cli.EXIT_ERROR
    assert "typo_key" in capsys.readouterr().err


def test_cli_selftest(capsys):
    assert cli.main(["selftest", "--workers", "1", "2"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "determinism[wegner]" in out

import json

import pytest

from orbitsched.cli import main
from orbitsched.config import ConfigError, RunConfig


def test_defaults_valid_and_hash_stable():
    a, b = RunConfig().validate(), RunConfig.from_dict({})
    assert a.config_hash() == b.config_hash()
    assert a.replace(seed=1).config_hash() != a.config_hash()


@pytest.mark.parametrize("d, field", [
    ({"hours": -1}, "hours"),
    ({"hours": "six"}, "hours"),
    ({"scenario": "mars"}, "scenario"),
    ({"bogus": 1}, "bogus"),
    ({"power": {"foo": 1}}, "power.foo"),
    ({"power": {"solar_w": "x"}}, "power.solar_w"),
    ({"static_alpha": 0.0}, "static_alpha"),
    ({"accuracy": 0.4}, "accuracy"),
    ({"variant": "baseline", "filter_ordering": False}, "variant"),
])
def test_config_errors_name_the_field(d, field):
    with pytest.raises(ConfigError) as e:
        RunConfig.from_dict(d).validate()
    assert field in str(e.value)


def test_round_trip():
    cfg = RunConfig.from_dict({"power": {"solar_w": 4.0}, "accuracy": 0.9})
    assert RunConfig.from_dict(cfg.to_dict()) == cfg


def _outputs(path):
    return sorted(p.name for p in path.iterdir())


def test_cli_run_writes_reproducible_outputs(tmp_path, capsys):
    args = ["run", "--hours", "0.25", "--seed", "2", "--trace"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    names = _outputs(tmp_path / "a")
    assert names == _outputs(tmp_path / "b")
    exts = {n.split(".", 1)[1] for n in names}
    assert exts == {"summary.json", "summary.txt", "cdf.txt", "metrics.jsonl", "forecasts.jsonl", "alpha.txt",
                    "trace.jsonl"}
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
    summary = json.loads((tmp_path / "a" / [n for n in names if n.endswith("summary.json")][0]).read_text())
    assert summary["seed"] == 2 and summary["config"]["hours"] == 0.25
    assert "config hash" in capsys.readouterr().out


def test_cli_config_file_overrides_flags(tmp_path):
    conf = tmp_path / "c.yaml"
    conf.write_text("hours: 0.1\npower:\n  solar_w: 5.0\n")
    out = tmp_path / "o"
    assert main(["run", "--hours", "3", "--config", str(conf), "--out", str(out)]) == 0
    f = next(p for p in out.iterdir() if p.name.endswith("summary.json"))
    cfg = json.loads(f.read_text())["config"]
    assert cfg["hours"] == 0.1 and cfg["power"]["solar_w"] == 5.0


def test_cli_invalid_config_exits_nonzero(tmp_path, capsys):
    assert main(["run", "--hours", "-1", "--out", str(tmp_path)]) == 2
    assert "hours" in capsys.readouterr().err
    conf = tmp_path / "bad.json"
    conf.write_text(json.dumps({"power": {"battery": 3}}))
    assert main(["run", "--config", str(conf), "--out", str(tmp_path)]) == 2
    assert "power.battery" in capsys.readouterr().err


def test_cli_bench_small(tmp_path, capsys):
    assert main(["bench-sbfe", "--count", "20", "--max-filters", "6", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "greedy" in out and "oracle" in out
    rep = json.loads((tmp_path / "sbfe-seed0-n20.json").read_text())
    assert rep["n_formulas"] + rep["skipped"] == 20
    assert main(["bench-sbfe", "--beta", "0.5", "--alpha", "0.2"]) == 2

import csv
import json

import pytest

from polyrenewal.cli import main, run
from polyrenewal.config import ExperimentConfig, apply_model_preset
from polyrenewal.errors import ConfigInvalid, SubcommandUnknown


def _summary(out):
    with open(out / "summary.json") as fh:
        return json.load(fh)


def test_unknown_keys_and_bad_values_rejected():
    with pytest.raises(ConfigInvalid):
        ExperimentConfig.from_dict({"engine": {"nope": 1}})
    with pytest.raises(ConfigInvalid):
        ExperimentConfig.from_dict({"extra": {}})
    with pytest.raises(ConfigInvalid):
        ExperimentConfig.from_dict({"engine": {"n": "ten"}})
    with pytest.raises(ConfigInvalid):
        apply_model_preset(ExperimentConfig(), "missing")


def test_load_round_trip_and_env_overrides(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"model": {"h": [1.0, 0.5]}, "engine": {"n": 6}}))
    cfg = ExperimentConfig.load(str(path))
    assert cfg.model.h == [1.0, 0.5] and cfg.engine.n == 6
    cfg.apply_env({"POLYRENEWAL_SEED": "17", "POLYRENEWAL_SEEDS": "5", "OTHER": "x"})
    assert cfg.run.seed == 17 and cfg.run.seeds == 5
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigInvalid):
        ExperimentConfig.load(str(bad))


def test_digest_ignores_execution_settings():
    a, b = ExperimentConfig(), ExperimentConfig()
    b.run.threads, b.run.out = 8, "elsewhere"
    assert a.digest() == b.digest()
    b.run.seed = 1
    assert a.digest() != b.digest()


def test_annealed_exact_traps_half(tmp_path, capsys):
    out = tmp_path / "a"
    rc = main(["annealed", "--exact", "--n", "3", "--preset", "traps-half", "--out", str(out)])
    assert rc == 0
    doc = _summary(out)
    assert abs(doc["summary"]["z"] - 0.1875) <= 1e-15
    assert doc["config_hash"] == ExperimentConfig.from_dict(doc["config"]).digest()
    assert "Z_3" in capsys.readouterr().out


def test_renewal_csv(tmp_path):
    out = tmp_path / "r"
    assert main(["renewal", "--kernel", "srw1d", "--n", "200", "--out", str(out)]) == 0
    with open(out / "renewal.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 201 and rows[0]["n"] == "0"


def test_exit_codes(tmp_path):
    assert main(["bogus"]) == 2
    assert main(["annealed", "--n", "x"]) == 2
    assert main(["annealed", "--set", "engine.nope=1", "--out", str(tmp_path)]) == 2
    assert main(["annealed", "--set", "model.steps=hexagon", "--out", str(tmp_path)]) == 2
    with pytest.raises(SubcommandUnknown):
        run("bogus")


def test_run_with_config_file(tmp_path):
    path = tmp_path / "c.json"
    out = tmp_path / "o"
    path.write_text(json.dumps({"model": {"steps": "srw1d", "law": "traps-half", "h": [0.0]},
                                "engine": {"n": 2}, "run": {"out": str(out)}}))
    assert run("annealed", str(path), extra=["--exact"]) == 0
    assert abs(_summary(out)["summary"]["z"] - 0.25) <= 1e-15


def test_selftest_passes(tmp_path, capsys):
    assert main(["selftest", "--out", str(tmp_path)]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_quenched_outputs_independent_of_workers(tmp_path):
    args = ["quenched", "--preset", "weak-2d", "--n", "5", "--seeds", "12", "--seed", "3"]
    assert main(args + ["--threads", "1", "--out", str(tmp_path / "one")]) == 0
    assert main(args + ["--threads", "4", "--out", str(tmp_path / "four")]) == 0
    for name in ("summary.json", "quenched.csv"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "four" / name).read_bytes()

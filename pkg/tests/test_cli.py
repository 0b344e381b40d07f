import csv
import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from fsens import cli
from fsens import config as cfgmod
from fsens.report import CSV_COLUMNS, read_csv

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
PI = 3.141592653589793


def _write(tmp_path, raw, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return str(path)


def _ishigami(L=4000, **extra):
    raw = {
        "model": {"builtin": "ishigami"},
        "inputs": [{"kind": "uniform", "lower": -PI, "upper": PI}] * 3,
        "estimate": {"method": "kde_mc", "subsets": [[1], [2], [3]], "divergences": ["tv", "rkl"],
                     "L": L, "seed": 7},
        "output": {"dir": "out"},
    }
    raw.update(extra)
    return raw


def test_run_writes_report(tmp_path, capsys):
    assert cli.main(["run", _write(tmp_path, _ishigami())]) == 0
    out = capsys.readouterr().out
    assert "tv: X2 >" in out
    rows = read_csv(tmp_path / "out" / "report.csv")
    assert list(rows[0]) == list(CSV_COLUMNS)
    assert len(rows) == 6
    assert {r["model_evals"] for r in rows} == {"4000"}
    assert {r["seconds"] for r in rows} == {""}
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    prov = report["provenance"]
    assert prov["config_hash"] == cfgmod.config_hash(_ishigami())
    assert prov["eval_counts"]["model_calls"] == 4000
    assert report["rankings"]["tv"][0] == [2]


def test_run_is_byte_identical(tmp_path):
    path = _write(tmp_path, _ishigami(output={"dir": "out", "cache": False}))
    assert cli.main(["run", path, "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["run", path, "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "report.csv").read_bytes() == (tmp_path / "b" / "report.csv").read_bytes()


def test_cached_rerun_matches(tmp_path):
    path = _write(tmp_path, _ishigami())
    assert cli.main(["run", path]) == 0
    first = (tmp_path / "out" / "report.csv").read_bytes()
    assert list((tmp_path / "out" / "cache").glob("*.npz"))
    assert cli.main(["run", path]) == 0
    assert (tmp_path / "out" / "report.csv").read_bytes() == first
    prov = json.loads((tmp_path / "out" / "report.json").read_text())["provenance"]
    assert prov["eval_counts"] == {"model_calls": 0, "cache_hits": 1, "cache_misses": 0}


def test_csv_values_round_trip(tmp_path):
    from fsens import runner
    cfg = cfgmod.parse(_ishigami(L=2000), tmp_path)
    report = runner.run(cfg)
    rows = read_csv(tmp_path / "out" / "report.csv")
    for row, parsed in zip(report.rows, rows):
        assert float(parsed["value"]) == pytest.approx(row.estimate.value, rel=1e-12)
        assert float(parsed["value"]) == row.estimate.value


def test_config_hash_ignores_key_order():
    raw = _ishigami()
    shuffled = json.loads(json.dumps(dict(reversed(list(raw.items())))))
    shuffled["estimate"] = dict(reversed(list(raw["estimate"].items())))
    assert cfgmod.config_hash(raw) == cfgmod.config_hash(shuffled)
    changed = _ishigami(L=4001)
    assert cfgmod.config_hash(raw) != cfgmod.config_hash(changed)


@pytest.mark.parametrize("mutate, path", [
    (lambda r: r["estimate"].update(divergences=["tv", "bogus"]), "estimate.divergences[1]"),
    (lambda r: r["estimate"].update(extra=1), ""),
    (lambda r: r["estimate"].update(subsets=[[1], [4]]), "estimate.subsets[1]"),
    (lambda r: r["estimate"].update(subsets=[[1, 2, 3]]), "estimate.subsets[0]"),
    (lambda r: r["estimate"].update(L=1000.5), "estimate.L"),
    (lambda r: r["estimate"].update(method="mc"), "estimate.method"),
    (lambda r: r.update(inputs=[{"kind": "uniform", "lower": 0, "upper": 1}] * 2), "inputs"),
    (lambda r: r["inputs"][0].update(kind="cauchy"), "inputs"),
    (lambda r: r.update(kde={"bandwidth": {"fixed": [0.1, 0.1]}}), "kde.bandwidth.fixed"),
    (lambda r: r["estimate"].update(method="pdd_kde_mc"), "pdd"),
])
def test_validate_reports_offending_key(tmp_path, capsys, mutate, path):
    raw = json.loads(json.dumps(_ishigami()))
    mutate(raw)
    assert cli.main(["validate", _write(tmp_path, raw)]) == 2
    err = capsys.readouterr().err
    assert err.startswith("config error: ")
    with pytest.raises(cfgmod.ConfigError) as info:
        cfgmod.parse(raw)
    assert info.value.path.startswith(path)


def test_validate_accepts_shipped_configs(capsys):
    for path in sorted(CONFIGS.glob("*.json")):
        assert cli.main(["validate", str(path)]) == 0
    assert capsys.readouterr().out.count(": ok") == len(list(CONFIGS.glob("*.json")))


def test_unreadable_config_exits_2(tmp_path):
    assert cli.main(["validate", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["run", str(bad)]) == 2


def test_model_failure_exits_3(tmp_path, capsys):
    raw = _ishigami(model={"external": {"cmd": "exit 1", "dim": 3}})
    assert cli.main(["run", _write(tmp_path, raw)]) == 3
    assert "numeric failure" in capsys.readouterr().err


def test_missing_sample_size_exits_2(tmp_path):
    raw = _ishigami()
    del raw["estimate"]["L"]
    assert cli.main(["run", _write(tmp_path, raw)]) == 2


def test_oracle_run(tmp_path):
    shutil.copy(CONFIGS / "linear6_oracle.json", tmp_path / "o.json")
    assert cli.main(["run", str(tmp_path / "o.json")]) == 0
    rows = read_csv(tmp_path / "out" / "linear6_oracle" / "report.csv")
    tv = {r["subset"]: float(r["value"]) for r in rows if r["divergence"] == "tv"}
    assert tv["1"] == pytest.approx(0.278, abs=0.005)
    assert tv["6"] == pytest.approx(0.411, abs=0.005)
    assert all(r["model_evals"] == "" for r in rows)
    assert {r["scaled_value"] for r in rows if r["divergence"] == "neyman"} == {""}


def test_sweep_outputs(tmp_path):
    raw = json.loads((CONFIGS / "linear6_sweep.json").read_text())
    path = _write(tmp_path, raw)
    assert cli.main(["sweep", path, "--L", "1e3,4e3", "--replicates", "2", "--out", str(tmp_path / "sw")]) == 0
    with open(tmp_path / "sw" / "sweep.csv") as fh:
        detail = list(csv.DictReader(fh))
    assert len(detail) == 2 * 2 * 2 * 2
    assert {r["replicate"] for r in detail} == {"0", "1"}
    summary = read_csv(tmp_path / "sw" / "summary.csv")
    assert len(summary) == 8 and all(r["replicates"] == "2" for r in summary)
    plot = read_csv(tmp_path / "sw" / "plot_data.csv")
    assert list(plot[0]) == ["curve", "x", "y"]
    assert cli.main(["sweep", path, "--replicates", "0"]) == 2


def test_sweep_needs_reference_for_other_models(tmp_path):
    raw = _ishigami(L=1000)
    assert cli.main(["sweep", _write(tmp_path, raw)]) == 2
    raw["sweep"] = {"reference": {"tv": {"1": 0.3, "2": 0.8, "3": 0.3}, "rkl": {"1": 0.37, "2": 0.5, "3": 0.22}}}
    assert cli.main(["sweep", _write(tmp_path, raw), "--L", "500"]) == 0


def test_surrogate_round_trip(tmp_path, capsys):
    raw = _ishigami(L=3000)
    raw["estimate"]["method"] = "pdd_kde_mc"
    raw["estimate"]["divergences"] = ["tv"]
    raw["pdd"] = {"S": 2, "m": 4}
    path = _write(tmp_path, raw)
    assert cli.main(["surrogate", path, "--out", str(tmp_path / "s" / "pdd.json")]) == 0
    assert "model evaluations" in capsys.readouterr().out
    assert cli.main(["run", path, "--out", str(tmp_path / "a")]) == 0
    raw["pdd"] = {"surrogate": "s/pdd.json"}
    assert cli.main(["run", _write(tmp_path, raw, "b.json"), "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "report.csv").read_bytes() == (tmp_path / "b" / "report.csv").read_bytes()


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "fsens.cli", "validate", str(CONFIGS / "iman.json")],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "ok" in proc.stdout

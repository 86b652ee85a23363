import csv
import json
from pathlib import Path

import numpy as np
import pytest

from sinrperc import cli
from sinrperc.components import component_report
from sinrperc.graph import SinrGraph
from sinrperc.model import ModelError
from sinrperc.sampling import Configuration, Region

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture(autouse=True)
def output_root(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ROOT_ENV, str(tmp_path / "out"))
    return tmp_path / "out"


def read_rows(path):
    lines = Path(path).read_text().splitlines()
    assert lines[0].startswith("# {") and lines[1].startswith("# columns: ")
    return json.loads(lines[0][2:]), list(csv.DictReader(lines[2:]))


def test_bounds_table(output_root):
    assert cli.main(["run", str(CONFIGS / "bounds_binary.ini")]) == 0
    prov, rows = read_rows(output_root / "bounds_binary" / "bounds_table.csv")
    assert [float(r["b"]) for r in rows] == [1, 2, 3, 4, 5]
    assert float(rows[0]["lower"]) == pytest.approx(0.769800, abs=1e-6)
    assert float(rows[1]["coefficient"]) == pytest.approx(0.5885070, abs=1e-6)
    assert all(float(r["lower"]) < float(r["upper"]) for r in rows)
    assert prov["kind"] == "bounds" and prov["version"]


def test_snapshot_dense_binary(output_root):
    assert cli.main(["run", str(CONFIGS / "snapshot_binary_dense.ini")]) == 0
    _, rows = read_rows(output_root / "snapshot_binary_dense" / "snapshot_summary.csv")
    assert len(rows) == 20
    assert sum(float(r["largest_strong"]) > 0.5 for r in rows) > 10


def test_snapshot_interference_subcritical(output_root):
    assert cli.main(["run", str(CONFIGS / "snapshot_interference.ini")]) == 0
    _, rows = read_rows(output_root / "snapshot_interference" / "snapshot_summary.csv")
    assert sum(float(r["largest_strong"]) < 0.1 for r in rows) > 10


def test_snapshot_labels_rederivable(output_root):
    assert cli.main(["run", str(CONFIGS / "snapshot_binary_dense.ini"), "--set", "run.n=300",
                     "--set", "run.seeds=4"]) == 0
    path = output_root / "snapshot_binary_dense" / "snapshot_seed4.csv"
    prov, rows = read_rows(path)
    from sinrperc.graph import build_directed
    from sinrperc.model import SinrParams
    conf = Configuration(np.array([[float(r["x"]), float(r["y"])] for r in rows]), None,
                         Region(1.0, 1.0), 0.75, 4, radii=np.array([float(r["radius"]) for r in rows]))
    g = build_directed(conf, SinrParams(0.25, 0.1))
    rep = component_report(g, prov["root"])
    labels = [r["label"] for r in rows]
    assert labels[prov["root"]] == "root"
    assert {i for i, lab in enumerate(labels) if lab in ("strong", "root")} == set(rep.strong_set.tolist())
    assert {i for i, lab in enumerate(labels) if lab != "unrelated"} == set(rep.weak_set.tolist())


def _toy_config(n):
    return Configuration(np.zeros((n, 2)), np.ones(n), Region(1.0, 1.0), 1.0, 0)


def test_emit_snapshot_isolated():
    snap = cli.emit_snapshot(SinrGraph.from_edges(5, []), _toy_config(5), 2)
    assert snap.labels == ("unrelated", "unrelated", "root", "unrelated", "unrelated")


def test_emit_snapshot_complete():
    n = 6
    g = SinrGraph.from_edges(n, [(i, j) for i in range(n) for j in range(n) if i != j])
    snap = cli.emit_snapshot(g, _toy_config(n), "random", seed=3)
    assert all(lab in ("strong", "root") for lab in snap.labels)
    assert snap.labels.count("root") == 1


@pytest.mark.parametrize("root", [-1, 7, "first"])
def test_emit_snapshot_bad_root(root):
    with pytest.raises(ModelError):
        cli.emit_snapshot(SinrGraph.from_edges(5, []), _toy_config(5), root)


def test_empty_grid_exit_2(capsys):
    code = cli.main(["run", str(CONFIGS / "sweep_binary.ini"), "--set", "run.grid="])
    assert code == cli.EXIT_PARSE
    assert "run.grid" in capsys.readouterr().err


def test_unknown_kind_exit_2(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[experiment]\nkind = nope\n")
    assert cli.main(["run", str(p)]) == cli.EXIT_PARSE


def test_missing_file_exit_2(tmp_path):
    assert cli.main(["run", str(tmp_path / "absent.ini")]) == cli.EXIT_PARSE


def test_validation_failure_exit_3(capsys):
    code = cli.main(["run", str(CONFIGS / "critical_gamma.ini"), "--set", "model.p_min=0.01"])
    assert code == cli.EXIT_INVALID
    assert "p_min_margin" in capsys.readouterr().err


def test_validate_command():
    assert cli.main(["validate", str(CONFIGS / "critical_gamma.ini")]) == 0


def test_budget_exit_4():
    code = cli.main(["run", str(CONFIGS / "critical_gamma.ini"), "--set", "run.max_seconds=0"])
    assert code == cli.EXIT_BUDGET


def test_sweep_deterministic_across_workers(output_root, tmp_path, monkeypatch):
    args = ["run", str(CONFIGS / "sweep_binary.ini"), "--set", "run.n=300", "--set", "run.replications=3"]
    assert cli.main(args + ["--set", "run.workers=1"]) == 0
    first = (output_root / "sweep_binary" / "sweep.csv").read_bytes()
    monkeypatch.setenv(cli.OUTPUT_ROOT_ENV, str(tmp_path / "other"))
    assert cli.main(args + ["--set", "run.workers=2"]) == 0
    second = (tmp_path / "other" / "sweep_binary" / "sweep.csv").read_bytes()
    assert first == second


def test_replay_identical(output_root):
    args = ["run", str(CONFIGS / "critical_binary.ini"), "--set", "run.n=300", "--set", "run.replications=8",
            "--set", "run.resolution=0.05"]
    assert cli.main(args) == 0
    out = output_root / "critical_binary" / "critical.json"
    payload = json.loads(out.read_text())
    assert payload["provenance"]["config_sha256"]
    assert payload["result"]["kind"] == "strong"
    assert cli.main(["replay", str(out)]) == 0


def test_replay_detects_tampering(output_root):
    assert cli.main(["run", str(CONFIGS / "bounds_binary.ini")]) == 0
    path = output_root / "bounds_binary" / "bounds_table.csv"
    path.write_text(path.read_text().replace("0.7698", "0.7699"))
    assert cli.main(["replay", str(path)]) == cli.EXIT_MISMATCH


def test_gamma_bounds_pipeline(output_root):
    assert cli.main(["run", str(CONFIGS / "gamma_bounds.ini")]) == 0
    _, rows = read_rows(output_root / "gamma_bounds" / "gamma_bounds.csv")
    g = [float(r["gamma_upper"]) for r in rows]
    assert g == sorted(g, reverse=True)


def test_coincidence_pipeline(output_root):
    args = ["run", str(CONFIGS / "coincidence_binary.ini"), "--set", "run.n=300",
            "--set", "run.replications=6", "--set", "run.resolution=0.1"]
    assert cli.main(args) == 0
    payload = json.loads((output_root / "coincidence_binary" / "coincidence.json").read_text())
    assert set(payload["result"]["estimates"]) == {"in", "out", "weak", "strong"}


def test_all_shipped_configs_parse():
    for path in sorted(CONFIGS.glob("*.ini")):
        cfg = cli.load_config(path)
        *_, report = cli.validate(cfg)
        assert report.ok, path.name

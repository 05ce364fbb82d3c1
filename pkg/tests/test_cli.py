from __future__ import annotations

import csv
import io
import json
import subprocess
import sys

import pytest

from fairhms.cli import main
from fairhms.dataset import load_csv
from fairhms.harness import RunConfig, parse_axis, run, sweep
from fairhms.report import RunReport, emit, load_reports, pivot, sig9


def cli(capsys, *argv):
    code = main(list(argv))
    out, errtext = capsys.readouterr()
    return code, out, errtext


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_gen_and_skyline(tmp_path, capsys):
    data = tmp_path / "a.csv"
    code, _, _ = cli(capsys, "gen", "--n", "300", "--d", "3", "--C", "2", "--seed", "4", "--out", str(data))
    assert code == 0
    ds = load_csv(data, group_column="group")
    assert ds.n == 300 and ds.d == 3 and ds.group_names == ("g0", "g1")
    sky = tmp_path / "sky.csv"
    code, _, errtext = cli(capsys, "skyline", "--data", str(data), "--group", "group", "--out", str(sky))
    assert code == 0 and errtext.startswith("skyline: ")
    kept = load_csv(sky, group_column="group")
    assert kept.n == int(errtext.split()[1]) < 300
    assert kept.coords.min() >= 0 and kept.coords.max() <= 1


def test_run_example_table(table1_path, capsys):
    code, out, _ = cli(capsys, "run", "--data", str(table1_path), "--group", "gender", "--alg", "intcov",
                       "--k", "2", "--bounds", "exact:1,1", "--normalize", "max", "--no-timing")
    assert code == 0
    report = json.loads(out)
    assert report["schema"] == "fairhms.run/1"
    assert sorted(report["solution"]["ids"]) == ["a5", "a8"]
    assert report["metrics"]["eval_method"] == "exact-2d" and report["metrics"]["err"] == 0
    assert "wall_ms" not in report["metrics"]
    assert report["metrics"]["mhr"] == pytest.approx(0.9834, abs=1e-3)


@pytest.mark.parametrize("alg", ["intcov", "bigreedy", "bigreedy+", "fgreedy", "g-greedy", "greedy"])
def test_run_every_algorithm_is_deterministic(alg, capsys):
    argv = ["run", "--gen", "anticor:n=400,d=2,C=2", "--alg", alg, "--k", "4", "--seed", "3", "--no-timing"]
    code, first, _ = cli(capsys, *argv)
    assert code == 0
    _, second, _ = cli(capsys, *argv)
    assert first == second
    report = json.loads(first)
    assert report["metrics"]["size"] == 4 and report["dataset"]["source"] == "anticor:n=400,d=2,C=2,seed=3"
    if alg != "greedy":
        assert report["metrics"]["err"] == 0


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv("FAIRHMS_SEED", "11")
    assert RunConfig().seed == 11


def test_run_csv_and_report_round_trip(tmp_path, capsys):
    out = tmp_path / "r.json"
    code, _, _ = cli(capsys, "run", "--gen", "anticor:n=300,d=3,C=3", "--k", "6", "--m", "60",
                     "--eval-m", "500", "--out", str(out))
    assert code == 0
    [report] = load_reports(out)
    assert report.metrics.eval_method == "validation-net:m=500,seed=0/15485863"
    assert RunReport.from_json(report.to_json()) == report
    assert report.to_dict() == json.loads(out.read_text())
    code, text, _ = cli(capsys, "emit", str(out))
    [row] = rows(text)
    assert row["algorithm"] == "bigreedy" and row["k"] == "6" and row["m"] == "60"
    assert float(row["mhr"]) == report.metrics.mhr


def test_report_values_are_quantized():
    assert sig9(0.1234567891234) == 0.123456789
    rep = run(RunConfig(alg="greedy", k=3, gen="anticor:n=200,d=2,C=2", seed=1))
    assert rep.metrics.mhr == sig9(rep.metrics.mhr)
    assert emit(rep, "csv").splitlines()[0].startswith("algorithm,source,n,d,C,k,bounds")


def test_sweep_one_axis_with_pivot(capsys):
    code, text, _ = cli(capsys, "sweep", "--gen", "anticor:n=300,d=2,C=2", "--alg", "intcov,g-greedy",
                        "--sweep", "k=2..6..2", "--pivot", "mhr")
    assert code == 0
    table = rows(text)
    assert [r["k"] for r in table] == ["2", "4", "6"]
    assert set(table[0]) == {"k", "intcov_mhr", "g-greedy_mhr"}
    for r in table:
        assert float(r["intcov_mhr"]) >= float(r["g-greedy_mhr"]) - 1e-9


def test_sweep_two_axes_with_price_of_fairness(capsys):
    code, text, _ = cli(capsys, "sweep", "--gen", "anticor:n=200,d=2,C=2", "--alg", "intcov",
                        "--sweep", "k=3,4", "--sweep", "C=2,3", "--pof", "--no-timing")
    assert code == 0
    table = rows(text)
    assert len(table) == 4 and "wall_ms" not in table[0]
    for r in table:
        assert r["error"] == ""
        assert float(r["price_of_fairness"]) >= -1e-9
        assert float(r["mhr_unconstrained"]) == pytest.approx(float(r["mhr"]) + float(r["price_of_fairness"]))


def test_pivot_keeps_axes_an_algorithm_ignores(capsys):
    code, text, _ = cli(capsys, "sweep", "--gen", "anticor:n=300,d=3,C=2", "--alg", "bigreedy,fgreedy",
                        "--k", "4", "--m", "30", "--sweep", "epsilon=0.05,0.1", "--pivot", "mhr")
    assert code == 0
    table = rows(text)
    assert [r["epsilon"] for r in table] == ["0.05", "0.1"]
    assert all(r["bigreedy_mhr"] and r["fgreedy_mhr"] for r in table)


def test_sweep_records_failures_per_row():
    got = sweep(RunConfig(alg="intcov", gen="anticor:n=100,d=3,C=2"), {"k": [2]}, ["intcov", "greedy"])
    assert got[0]["error"].startswith("ValueError") and got[1]["error"] == ""


def test_parse_axis():
    assert parse_axis("k=10..50..10") == ("k", [10, 20, 30, 40, 50])
    assert parse_axis("epsilon=0.01,0.05") == ("epsilon", [0.01, 0.05])
    with pytest.raises(ValueError):
        parse_axis("tau=1,2")


def test_emit_pivot(tmp_path, capsys):
    paths = []
    for alg in ("greedy", "g-greedy"):
        for k in (2, 3):
            p = tmp_path / f"{alg}{k}.json"
            run_report = run(RunConfig(alg=alg, k=k, gen="anticor:n=200,d=2,C=2"))
            emit(run_report, "json", p)
            paths.append(str(p))
    code, text, _ = cli(capsys, "emit", *paths, "--pivot", "k:err")
    assert code == 0
    table = rows(text)
    assert [r["k"] for r in table] == ["2", "3"] and "greedy_err" in table[0]
    assert pivot([{"k": 1, "algorithm": "a", "mhr": 0.5}], "k") == [{"k": 1, "a_mhr": 0.5}]


@pytest.mark.parametrize("argv, kind", [
    (["run", "--data", "missing.csv"], "DataError"),
    (["run", "--gen", "anticor:n=100,d=2,C=2", "--alg", "dmm"], "NotImplementedError"),
    (["run", "--gen", "anticor:n=100,d=2,C=2", "--alg", "magic"], "ValueError"),
    (["run", "--gen", "anticor:n=100,d=2,C=2", "--bounds", "exact:3,3", "--k", "2"], "InfeasibleSpecError"),
    (["run", "--gen", "anticor:n=100,d=3,C=2", "--alg", "intcov"], "ValueError"),
    (["run", "--gen", "bogus"], "ValueError"),
])
def test_errors_exit_nonzero_with_one_line(argv, kind, capsys):
    code, out, errtext = cli(capsys, *argv)
    assert code == 2 and out == ""
    assert errtext.count("\n") == 1 and errtext.startswith(f"error: {kind}: ")


def test_too_many_sweep_axes(capsys):
    with pytest.raises(SystemExit):
        main(["sweep", "--gen", "anticor:n=100,d=2,C=2", "--sweep", "k=2", "--sweep", "C=2",
              "--sweep", "n=100"])


def test_module_entry_point():
    done = subprocess.run([sys.executable, "-m", "fairhms", "--help"], capture_output=True, text=True)
    assert done.returncode == 0 and "sweep" in done.stdout

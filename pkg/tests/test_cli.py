from __future__ import annotations

import csv
import io
import json
import subprocess
import sys

import pytest

from afdlab.benchgen import GenParams, gen_fd, load_corpus
from afdlab.cli import main
from afdlab.relation import load_csv


@pytest.fixture
def r0_csv(tmp_path):
    p = tmp_path / "R0.csv"
    p.write_text("X,Y\na,1\na,1\na,2\nb,1\n")
    return p


def run(capsys, *argv) -> tuple[int, str, str]:
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_score_cardinality(capsys, r0_csv):
    code, out, _ = run(capsys, "score", r0_csv, "--measures", "g3,mu_plus")
    assert code == 0
    assert len(json.loads(out)["records"]) == 4
    code, out, _ = run(capsys, "score", r0_csv, "--measures", "all")
    records = json.loads(out)["records"]
    assert len(records) == 28
    assert sum(r["lhs"] == ["X"] for r in records) == 14


def test_score_csv_and_determinism(capsys, r0_csv):
    _, a, _ = run(capsys, "score", r0_csv, "--format", "csv")
    _, b, _ = run(capsys, "score", r0_csv, "--format", "csv", "--jobs", "2")
    assert a == b
    rows = list(csv.DictReader(io.StringIO(a)))
    assert rows[0]["measure"] == "rho" and rows[0]["lhs"] == "X"


def test_score_usage_errors(capsys, r0_csv, tmp_path):
    assert run(capsys, "score", r0_csv, "--measures", "g4")[0] == 2
    assert run(capsys, "score", tmp_path / "missing.csv")[0] == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("A,B\n1\n")
    code, _, err = run(capsys, "score", bad)
    assert code == 2 and "bad.csv:2" in err
    with pytest.raises(SystemExit) as exc:
        main(["score"])
    assert exc.value.code == 2


def test_score_partial_exit_code(capsys, tmp_path):
    p = tmp_path / "wide.csv"
    p.write_text("X,Y\n" + "".join(f"x{i % 500},y{i % 301}\n" for i in range(3000)))
    code, out, _ = run(capsys, "score", p, "--measures", "rfi_plus,g3", "--time-budget", "0")
    assert code == 1
    errors = [r for r in json.loads(out)["records"] if r["error"]]
    assert errors and all(r["measure"] == "rfi_plus" for r in errors)


def test_discover(capsys, r0_csv):
    _, out, _ = run(capsys, "discover", r0_csv, "--measures", "g3", "--epsilon", "0.9")
    assert json.loads(out)["discovered"] == []
    _, out, _ = run(capsys, "discover", r0_csv, "--measures", "g3", "--epsilon", "0.7")
    data = json.loads(out)
    assert data["epsilon"] == 0.7
    assert {(tuple(r["lhs"]), tuple(r["rhs"])) for r in data["discovered"]} == {(("X",), ("Y",)), (("Y",), ("X",))}
    assert run(capsys, "discover", r0_csv, "--measures", "g3", "--epsilon", "1.0")[0] == 2


def test_null_token_flag(capsys, tmp_path):
    p = tmp_path / "n.csv"
    p.write_text("X;Y\na;1\na;NA\nb;2\n")
    _, out, _ = run(capsys, "score", p, "--delimiter", ";", "--null-token", "NA", "--measures", "g3")
    assert json.loads(out)["records"][0]["n_effective"] == 2


def test_synth_and_reload(capsys, tmp_path):
    code, out, _ = run(capsys, "synth", "--kind", "error", "--steps", "5", "--per-step", "2",
                       "--n-max", "300", "--outdir", tmp_path / "c1")
    assert code == 0
    summary = json.loads(out)
    assert (summary["relations"], summary["fd"], summary["nonfd"]) == (20, 10, 10)
    assert len(load_corpus(tmp_path / "c1" / "manifest.json")) == 20
    run(capsys, "synth", "--kind", "error", "--steps", "5", "--per-step", "2",
        "--n-max", "300", "--outdir", tmp_path / "c2")
    for f in sorted((tmp_path / "c1").iterdir()):
        assert f.read_bytes() == (tmp_path / "c2" / f.name).read_bytes()


def test_synth_bad_range(capsys, tmp_path):
    assert run(capsys, "synth", "--kind", "lhs", "--steps", "2", "--per-step", "1",
               "--n-min", "500", "--n-max", "100", "--outdir", tmp_path)[0] == 2


@pytest.fixture
def fd_case(tmp_path):
    lr = gen_fd(GenParams(500, 100, 10, 1.0, 1.0, 1.0, 2.0, 0.0, 5), "base")
    csv_path, truth_path = tmp_path / "base.csv", tmp_path / "base.json"
    lr.relation.to_csv(csv_path)
    truth_path.write_text(json.dumps(lr.ground_truth.to_json()))
    return csv_path, truth_path


def test_inject_channels(capsys, tmp_path, fd_case):
    csv_path, truth_path = fd_case
    base = load_csv(csv_path)
    for channel in ("copy", "bogus"):
        out_csv, out_truth = tmp_path / f"{channel}.csv", tmp_path / f"{channel}.json"
        code, out, _ = run(capsys, "inject", csv_path, "--truth", truth_path, "--channel", channel,
                           "--eta", "0.01", "--out-csv", out_csv, "--out-truth", out_truth)
        assert code == 0
        new = load_csv(out_csv)
        before, after = base.column("Y"), new.column("Y")
        changed = sum(a != b for a, b in zip(before, after))
        assert 0 < changed <= 0.01 * len(base)
        truth = json.loads(out_truth.read_text())
        assert truth["approximate"] == [[["X"], ["Y"]]] and truth["perfect"] == []
        if channel == "bogus":
            assert len(set(after) - set(before)) == changed
        else:
            assert set(after) <= set(before)


def test_inject_eta_zero_and_violated_input(capsys, tmp_path, fd_case):
    csv_path, truth_path = fd_case
    out_csv, out_truth = tmp_path / "z.csv", tmp_path / "z.json"
    run(capsys, "inject", csv_path, "--truth", truth_path, "--channel", "typo", "--eta", "0",
        "--out-csv", out_csv, "--out-truth", out_truth)
    assert out_csv.read_bytes() == csv_path.read_bytes()
    truth = json.loads(out_truth.read_text())
    assert truth["perfect"] == json.loads(truth_path.read_text())["perfect"]
    run(capsys, "inject", csv_path, "--truth", truth_path, "--channel", "copy", "--eta", "0.05",
        "--out-csv", out_csv, "--out-truth", out_truth)
    code, _, err = run(capsys, "inject", out_csv, "--truth", truth_path, "--channel", "copy",
                       "--eta", "0.05", "--out-csv", tmp_path / "q.csv", "--out-truth", tmp_path / "q.json")
    assert code == 2 and "X->Y" in err


def test_eval_report(capsys, tmp_path, fd_case):
    csv_path, truth_path = fd_case
    pairs = []
    for channel in ("copy", "typo"):
        oc, ot = tmp_path / f"{channel}.csv", tmp_path / f"{channel}.json"
        run(capsys, "inject", csv_path, "--truth", truth_path, "--channel", channel, "--eta", "0.02",
            "--out-csv", oc, "--out-truth", ot)
        pairs += ["--pair", oc, ot]
    code, out, _ = run(capsys, "eval", *pairs[:3], "--measures", "mu_plus,g3")
    data = json.loads(out)
    assert code == 0
    assert data["auc"]["mu_plus"]["pooled"] == 1.0
    assert "winning_numbers" not in data
    assert all(set(v) == {"mu_plus", "g3"} for v in data["rank_at_max_recall"].values())
    _, out, _ = run(capsys, "eval", *pairs, "--measures", "mu_plus,g3")
    assert set(json.loads(out)["winning_numbers"]) == {"copy", "typo"}
    assert run(capsys, "eval", "--measures", "g3")[0] == 2


def test_sensitivity_output(capsys):
    code, out, _ = run(capsys, "sensitivity", "--kind", "error", "--steps", "3", "--per-step", "3",
                       "--n-max", "400", "--measures", "g1,g1_prime,mu_plus")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 9
    for r in rows:
        assert float(r["separation"]) == pytest.approx(float(r["mean_fd_score"]) - float(r["mean_nonfd_score"]), abs=1e-15)
    g1 = [float(r["separation"]) for r in rows if r["measure"] == "g1"]
    g1p = [float(r["separation"]) for r in rows if r["measure"] == "g1_prime"]
    assert g1 == pytest.approx(g1p, abs=0.01)


def test_module_entry_point(r0_csv):
    res = subprocess.run([sys.executable, "-m", "afdlab", "score", str(r0_csv), "--measures", "g3"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and json.loads(res.stdout)["records"][0]["score"] == 0.75

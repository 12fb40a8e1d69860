import csv
import json
import subprocess
import sys

import pytest

from riemreg.analysis import CheckReport, Row
from riemreg.cli import (
    COLUMNS,
    DEFAULT_SEED,
    UsageError,
    csv_records,
    emit_series,
    main,
    parse_config,
    read_config_file,
)


def _read(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


# --- parsing ---------------------------------------------------------------------
def test_parse_eval_job():
    cfg = parse_config(["eval", "--manifold", "hyperbolic", "--field", "dist2", "--lambda", "1",
                        "--point-d", "1"], environ={})
    assert cfg.subcommand == "eval" and cfg.manifold == "hyperbolic"
    assert cfg.values["lambda"] == 1.0 and cfg.point_d == [1.0] and cfg.seed == DEFAULT_SEED


def test_parse_suite_job():
    cfg = parse_config(["verify", "convexity-lemma", "--q", "2", "--K0", "1", "--samples", "10000"],
                       environ={})
    assert (cfg.target, cfg.q, cfg.K0, cfg.samples) == ("convexity-lemma", 2.0, 1.0, 10000)
    assert cfg.name == "verify-convexity-lemma"


def test_mu_above_limit_is_rejected():
    with pytest.raises(UsageError):
        parse_config(["eval", "--mu", "0.6", "--lambda", "1", "--q", "2"], environ={})
    assert main(["eval", "--mu", "0.6", "--lambda", "1", "--q", "2"]) == 2


@pytest.mark.parametrize("argv", [["eval", "--q", "1"], ["eval", "--lambda", "0"],
                                  ["verify", "unknown"], ["eval", "--format", "xml"],
                                  ["eval", "--samples", "0"], ["eval", "--seed", "-1"]])
def test_invalid_flags_are_usage_errors(argv):
    with pytest.raises(UsageError):
        parse_config(argv, environ={})


def test_config_file_precedence(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# sample\nlambda = 0.5\nmu = 0.1\npoint-d = 0.5, 1\nseed = 7\n", encoding="utf-8")
    cfg = parse_config(["eval", "--config", str(conf), "--mu", "0.05"], environ={"RENV_SEED": "9"})
    assert cfg.values["lambda"] == 0.5 and cfg.mu == 0.05 and cfg.point_d == [0.5, 1.0]
    assert cfg.seed == 7


def test_seed_precedence(tmp_path):
    conf = tmp_path / "seed.conf"
    conf.write_text("seed = 11\n", encoding="utf-8")
    env = {"RENV_SEED": "13"}
    assert parse_config(["eval", "--seed", "5", "--config", str(conf)], env).seed == 5
    assert parse_config(["eval", "--config", str(conf)], env).seed == 11
    assert parse_config(["eval"], env).seed == 13
    assert parse_config(["eval"], {}).seed == DEFAULT_SEED
    with pytest.raises(UsageError):
        parse_config(["eval"], {"RENV_SEED": "abc"})


def test_config_file_errors(tmp_path):
    with pytest.raises(UsageError):
        read_config_file(tmp_path / "missing.conf")
    bad = tmp_path / "bad.conf"
    for text in ("nonsense\n", "colour = red\n", "lambda = x\n", "format = xml\n"):
        bad.write_text(text, encoding="utf-8")
        with pytest.raises(UsageError):
            read_config_file(bad)


# --- output plumbing ----------------------------------------------------------------
def test_emit_series_writes_header_once(tmp_path):
    path = tmp_path / "series.csv"
    row = {"suite": "s", "point_id": "p", "value_numeric": 0.1, "status": "pass"}
    emit_series(path, [row])
    emit_series(path, [row])
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode("utf-8").splitlines()
    assert lines[0] == ",".join(COLUMNS) and len(lines) == 3
    assert lines[1].split(",")[COLUMNS.index("value_numeric")] == "0.10000000000000001"


def test_emit_series_empty_rows_is_header_only(tmp_path):
    path = emit_series(tmp_path / "empty.csv", [])
    assert path.read_text(encoding="utf-8") == ",".join(COLUMNS) + "\n"


def test_csv_records_add_summary_and_errors():
    rep = CheckReport("demo", rows=[Row("a", 1.5, 1.0, "fail")], passed=False)
    recs = csv_records(rep, 1, lam=0.5)
    assert [r["point_id"] for r in recs] == ["a", "summary"]
    assert recs[0]["abs_err"] == 0.5 and recs[0]["rel_err"] == 0.5 and recs[0]["lambda"] == 0.5
    assert recs[-1]["status"] == "fail"


# --- runs ------------------------------------------------------------------------------
def test_eval_of_constant_field_has_zero_error(tmp_path):
    out = tmp_path / "const.csv"
    assert main(["eval", "--field", "const", "--lambda", "0.5", "--point-d", "0.3,1",
                 "--out", str(out)]) == 0
    rows = [r for r in _read(out) if r["point_id"] != "summary"]
    assert len(rows) == 2 and all(float(r["abs_err"]) == 0.0 for r in rows)


def test_eval_hyperbolic_double_envelope(tmp_path):
    out = tmp_path / "ll.csv"
    code = main(["eval", "--manifold", "hyperbolic", "--field", "dist2", "--lambda", "1", "--mu",
                 "0.25", "--point-d", "1", "--out", str(out)])
    assert code == 0
    row = _read(out)[0]
    assert float(row["value_reference"]) == pytest.approx(0.4) and row["status"] == "pass"


def test_counterexample_hyperbolic_exit_codes(tmp_path):
    out = tmp_path / "hyp.csv"
    assert main(["counterexample", "hyperbolic", "--variant", "exact", "--distances", "1",
                 "--out", str(out)]) == 0
    assert main(["counterexample", "hyperbolic", "--variant", "stated", "--distances", "1",
                 "--out", str(out)]) == 1
    rows = {r["point_id"]: r for r in _read(out)}
    row = rows["stated:double:d=1"]
    assert float(row["value_reference"]) == pytest.approx(6 / 13, rel=1e-15)
    assert float(row["value_numeric"]) == pytest.approx(0.4, rel=1e-6) and row["status"] == "fail"


def test_evaluation_error_exits_3(tmp_path):
    # a bounded field on a tiny sphere pushes the localization ball past the cut locus
    out = tmp_path / "x.csv"
    code = main(["eval", "--manifold", "sphere", "--curvature", "400", "--field", "const",
                 "--lambda", "1", "--out", str(out)])
    assert code == 3 and not out.exists()


def test_unwritable_output_exits_3(tmp_path):
    out = tmp_path / "missing-dir" / "x.csv"
    assert main(["sweep", "admissible-R", "--out", str(out)]) == 3


def test_default_output_goes_to_working_directory(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["sweep", "admissible-R"]) == 0
    assert (tmp_path / "sweep-admissible-R.csv").exists()


def test_sweep_gap_slopes(tmp_path):
    out = tmp_path / "gap.csv"
    assert main(["sweep", "gap", "--manifold", "hyperbolic", "--out", str(out)]) == 0
    slopes = [float(r["value_numeric"]) for r in _read(out) if r["point_id"].endswith("slope")]
    assert len(slopes) == 2 and all(1.9 <= s <= 2.1 for s in slopes)


def test_verify_regularization_json_has_four_subchecks(tmp_path):
    out = tmp_path / "reg.json"
    code = main(["verify", "regularization", "--field", "const", "--lambda-grid", "0.04,0.02",
                 "--samples", "8", "--format", "json", "--out", str(out)])
    assert code == 0
    data = json.loads(out.read_text(encoding="utf-8"))
    assert [c["suite"] for c in data["children"]] == [
        "a:semiconcavity-f_lam", "b:semiconvexity-semiconcavity",
        "c:gradient-lipschitz", "d:uniform-convergence"]
    assert data["config"]["lambda_grid"] == [0.04, 0.02] and data["all_passed"]


@pytest.mark.parametrize("argv", [
    ["verify", "convexity-lemma", "--samples", "500"],
    ["verify", "exp-comparison", "--manifold", "hyperbolic", "--samples", "200"],
    ["verify", "c11", "--samples", "8"],
    ["converge", "--manifold", "sphere", "--field", "bump", "--radius", "0.3", "--spacing", "0.15"],
])
def test_reruns_are_byte_identical(tmp_path, argv):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(argv + ["--out", str(a)]) == 0
    assert main(argv + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_module_entry_point(tmp_path):
    out = tmp_path / "m.csv"
    proc = subprocess.run([sys.executable, "-m", "riemreg", "eval", "--field", "const", "--out", str(out)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and out.exists()

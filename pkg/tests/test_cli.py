import csv
import json

import pytest

from fairdecomp.cli import main
from fairdecomp.oracle import oracle_effects, preset_scm

from test_hmda import _base_cohort_rows, lar_csv


def run(argv):
    return main([str(a) for a in argv])


def test_simulate_writes_dataset_and_truth(tmp_path):
    out = tmp_path / "sim"
    code = run(["simulate", "--preset", "monotone-small", "--n", 500, "--seed", 3,
                "--out-dir", out])
    assert code == 0
    truth = json.loads((out / "truth.json").read_text())
    eff = oracle_effects(preset_scm("monotone-small"))
    assert truth["oracle"]["ide"] == pytest.approx(eff.ide, abs=1e-12)
    assert (out / "dataset.csv").exists() and (out / "schema.json").exists()


def test_simulate_rejects_zero_n(tmp_path):
    assert run(["simulate", "--preset", "monotone-small", "--n", 0,
                "--out-dir", tmp_path / "x"]) == 2


def test_simulate_deterministic_bytes(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run(["simulate", "--preset", "monotone-small", "--n", 400, "--seed", 9, "--out-dir", a])
    run(["simulate", "--preset", "monotone-small", "--n", 400, "--seed", 9, "--out-dir", b])
    for name in ("dataset.csv", "schema.json", "truth.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert run(["simulate", "--preset", "monotone-small", "--n", 6000, "--seed", 5,
                "--out-dir", out]) == 0
    return out


def test_estimate_end_to_end_matches_oracle_within_ci(tmp_path, simulated):
    out = tmp_path / "est"
    code = run(["estimate", "--dataset", simulated / "dataset.csv",
                "--schema", simulated / "schema.json", "--seed", 1,
                "--assert-monotone", "--out-dir", out])
    assert code == 0
    audit = json.loads((out / "audit.json").read_text())
    truth = json.loads((simulated / "truth.json").read_text())["oracle"]
    lo, hi = audit["estimates"]["ci_ide"]
    assert lo <= truth["ide"] <= hi
    assert audit["estimates"]["total_contrast"] == pytest.approx(
        audit["estimates"]["ide"] + audit["estimates"]["iie"], abs=1e-15
    )
    assert "NDE >= IDE" in audit["bounds_statement"]
    assert audit["assumptions"] is not None
    rows = list(csv.reader((out / "decomposition.csv").open()))
    components = [r[0] for r in rows[1:]]
    assert components[:4] == ["total_raw_gap", "total_contrast", "ide", "iie"]
    assert any(c.startswith("iie_via_") for c in components)


def test_estimate_reruns_byte_identical(tmp_path, simulated):
    out1, out2 = tmp_path / "e1", tmp_path / "e2"
    args = ["estimate", "--dataset", simulated / "dataset.csv",
            "--schema", simulated / "schema.json", "--seed", 2]
    assert run(args + ["--out-dir", out1]) == 0
    assert run(args + ["--out-dir", out2]) == 0
    assert (out1 / "audit.json").read_bytes() == (out2 / "audit.json").read_bytes()
    assert (out1 / "decomposition.csv").read_bytes() == (out2 / "decomposition.csv").read_bytes()


def test_estimate_rerun_from_echoed_config(tmp_path, simulated):
    out1 = tmp_path / "e1"
    assert run(["estimate", "--dataset", simulated / "dataset.csv",
                "--schema", simulated / "schema.json", "--seed", 4,
                "--folds", 4, "--out-dir", out1]) == 0
    audit = json.loads((out1 / "audit.json").read_text())
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(audit["config"]))
    out2 = tmp_path / "e2"
    assert run(["estimate", "--dataset", simulated / "dataset.csv",
                "--schema", simulated / "schema.json", "--config", config_path,
                "--out-dir", out2]) == 0
    assert (out1 / "audit.json").read_bytes() == (out2 / "audit.json").read_bytes()


def test_estimate_bad_schema_exit_code(tmp_path, simulated):
    (tmp_path / "schema.json").write_text('{"columns": {"w1": "covariate"}}')
    code = run(["estimate", "--dataset", simulated / "dataset.csv",
                "--schema", tmp_path / "schema.json", "--out-dir", tmp_path / "o"])
    assert code == 2


def test_sensitivity_curve_diagonal_matches_evalue(tmp_path):
    audit = {
        "estimates": {"ide": 0.019, "ci_ide": [0.001, 0.037], "iie": 0.06},
        "sensitivity": {"baseline_risk": 0.095},
    }
    path = tmp_path / "audit.json"
    path.write_text(json.dumps(audit))
    out = tmp_path / "curve.csv"
    assert run(["sensitivity", "--audit", path, "--out", out,
                "--grid-points", 600]) == 0
    rows = list(csv.reader(out.open()))
    pts = [(float(x), float(y)) for series, x, y in rows[1:] if series == "point_estimate"]
    x_star, y_star = min(pts, key=lambda p: abs(p[0] - p[1]))
    assert x_star == pytest.approx(1.69, abs=0.02)
    assert y_star == pytest.approx(x_star, abs=0.02)
    assert {series for series, *_ in rows[1:]} == {"point_estimate", "ci_bound"}


def test_sensitivity_null_effect_degenerate(tmp_path):
    audit = {
        "estimates": {"ide": 0.0, "ci_ide": [-0.01, 0.01], "iie": 0.0},
        "sensitivity": {"baseline_risk": 0.10},
    }
    path = tmp_path / "audit.json"
    path.write_text(json.dumps(audit))
    out = tmp_path / "curve.csv"
    assert run(["sensitivity", "--audit", path, "--out", out]) == 0
    assert not out.exists()


def test_sensitivity_grid_below_rr_rejected(tmp_path):
    audit = {
        "estimates": {"ide": 0.019, "ci_ide": [0.001, 0.037], "iie": 0.06},
        "sensitivity": {"baseline_risk": 0.095},
    }
    path = tmp_path / "audit.json"
    path.write_text(json.dumps(audit))
    assert run(["sensitivity", "--audit", path, "--out", tmp_path / "c.csv",
                "--grid-max", 1.1]) == 2


def test_paths_command(tmp_path, simulated):
    est_dir = tmp_path / "est"
    assert run(["estimate", "--dataset", simulated / "dataset.csv",
                "--schema", simulated / "schema.json", "--out-dir", est_dir]) == 0
    out = tmp_path / "paths.csv"
    assert run(["paths", "--dataset", simulated / "dataset.csv",
                "--schema", simulated / "schema.json",
                "--audit", est_dir / "audit.json", "--out", out]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["mediator", "alpha", "beta", "product", "allocated"]
    assert len(rows) == 3  # two mediators
    audit = json.loads((est_dir / "audit.json").read_text())
    allocated = sum(float(r[4]) for r in rows[1:])
    assert allocated == pytest.approx(audit["estimates"]["iie"], abs=1e-9)


def test_ingest_happy_path(tmp_path):
    lar = tmp_path / "lar.csv"
    lar.write_text(lar_csv(_base_cohort_rows(40, 15)))
    out = tmp_path / "cohort"
    assert run(["ingest", "--lar", lar, "--out-dir", out]) == 0
    attrition = json.loads((out / "attrition.json").read_text())
    assert attrition["n_cohort"] == 56
    assert (out / "dataset.csv").exists() and (out / "schema.json").exists()
    schema = json.loads((out / "schema.json").read_text())
    assert schema["columns"]["race"] == "treatment"


def test_ingest_missing_column_exit_2(tmp_path):
    from test_hmda import HEADER

    header = [c for c in HEADER if c != "debt_to_income_ratio"]
    lar = tmp_path / "lar.csv"
    lar.write_text(lar_csv(_base_cohort_rows(10, 5), header=header))
    assert run(["ingest", "--lar", lar, "--out-dir", tmp_path / "o"]) == 2


def test_ingest_impossible_filter_exit_3(tmp_path):
    lar = tmp_path / "lar.csv"
    lar.write_text(lar_csv(_base_cohort_rows(10, 5)))
    config = tmp_path / "cohort.json"
    config.write_text(json.dumps({"state": "ZZ"}))
    assert run(["ingest", "--lar", lar, "--cohort-config", config,
                "--out-dir", tmp_path / "o"]) == 3


def test_console_entry_point_smoke():
    import subprocess
    import sys

    proc = subprocess.run(
        [sys.executable, "-m", "fairdecomp.cli", "--version"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "fairdecomp" in proc.stdout

import json

import numpy as np
import pandas as pd
import pytest

from drml_iv.cli import main
from drml_iv.output import read_csv_body
from drml_iv.synthetic import shipped_path

SCHEMA = str(shipped_path("synthetic_egs.yaml"))
FAST = ["--data", SCHEMA, "--learner", "glm", "--threads", "1"]


def run(tmp_path, name, *argv):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, out


def body(path):
    return pd.read_csv(path, comment="#")


def test_estimate_writes_three_methods(tmp_path):
    code, out = run(tmp_path, "est", "estimate", *FAST)
    assert code == 0
    doc = json.loads((out / "late.json").read_text())
    assert {"version", "seed", "config_hash", "subcommand"} <= set(doc["meta"])
    methods = {r["method"]: r for r in doc["result"]}
    assert set(methods) == {"unadjusted", "tsls", "drml"}
    assert np.isfinite(methods["drml"]["se"]) and methods["drml"]["se"] > 0
    assert len(body(out / "late.csv")) == 3
    assert (out / "late.csv").read_text().startswith("# version:")


def test_smaller_alpha_gives_wider_interval(tmp_path):
    _, a = run(tmp_path, "a05", "estimate", *FAST, "--alpha", "0.05")
    _, b = run(tmp_path, "a10", "estimate", *FAST, "--alpha", "0.1")
    wa = body(a / "late.csv").set_index("method")
    wb = body(b / "late.csv").set_index("method")
    assert (wb.ci_hi - wb.ci_lo < wa.ci_hi - wa.ci_lo).all()
    assert np.allclose(wa.chi_hat, wb.chi_hat)


def test_missing_dataset_is_input_error(tmp_path, capsys):
    code, out = run(tmp_path, "err", "estimate", "--data", str(tmp_path / "absent.yaml"))
    assert code == 2
    record = json.loads((out / "error.json").read_text())
    assert "file not found" in record["message"]
    assert json.loads(capsys.readouterr().err)["exit_code"] == 2


def test_sensitivity_grid_from_given_estimates(tmp_path):
    code, out = run(tmp_path, "sens", "sensitivity", "--chi-hat", "-0.04", "--delta-hat", "0.5")
    assert code == 0
    surf = body(out / "sensitivity_surface.csv")
    assert len(surf) == 101 * 161
    front = body(out / "sensitivity_frontier.csv")
    assert np.max(np.abs(-0.04 + front.delta1 * front.delta2 / 0.5)) < 1e-12


def test_simulate_small(tmp_path):
    code, out = run(tmp_path, "sim", "simulate", "--scenario", "2", "--n", "300", "--reps", "2",
                    "--estimators", "tsls", "drml_parametric", "unadjusted", "--threads", "1")
    assert code == 0
    rows = body(out / "simulation.csv")
    assert set(rows.estimator) == {"tsls", "drml_parametric", "unadjusted"}
    assert (rows.reps == 2).all()


def test_profile_discrete_partitions(tmp_path):
    code, out = run(tmp_path, "prof", "profile", *FAST, "--v-column", "female", "--strata",
                    "complier", "never_taker")
    assert code == 0
    for s in ("complier", "never_taker"):
        rows = body(out / f"profile_{s}.csv")
        assert rows.estimate.sum() == pytest.approx(1.0, abs=1e-12)
    doc = json.loads((out / "profile.json").read_text())["result"]
    assert sum(v["estimate"] for v in doc["shares"].values()) == pytest.approx(1.0, abs=1e-12)


def test_clate_discrete_modifier(tmp_path):
    code, out = run(tmp_path, "cl", "clate", *FAST, "--v-columns", "female", "--B", "20")
    assert code == 0
    rows = body(out / "clate.csv")
    assert list(rows.female) == [0.0, 1.0]
    assert (rows.lo <= rows.hi).all()


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text(f"dataset: {SCHEMA}\nseed: 5\nlearners: {{pi: glm, mu: glm, lambda: glm}}\n")
    code, out = run(tmp_path, "cfg", "estimate", "--config", str(cfg), "--seed", "6", "--threads", "1")
    assert code == 0
    assert json.loads((out / "late.json").read_text())["meta"]["seed"] == 6
    bad = tmp_path / "bad.yaml"
    bad.write_text("bogus: 1\n")
    code, _ = run(tmp_path, "bad", "estimate", "--config", str(bad))
    assert code == 2


def test_outputs_do_not_depend_on_threads(tmp_path):
    args = ["clate", *FAST[:4], "--v-columns", "female", "--B", "16", "--seed", "3"]
    _, one = run(tmp_path, "t1", *args, "--threads", "1")
    _, two = run(tmp_path, "t2", *args, "--threads", "2")
    assert read_csv_body(one / "clate.csv") == read_csv_body(two / "clate.csv")
    assert (one / "clate.json").read_bytes() == (two / "clate.json").read_bytes()

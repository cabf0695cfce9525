"""Command-line surface: flags, exit codes, file formats, determinism."""

import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from ksol import cli, phase


def run_cli(argv):
    return cli.main(argv)


def run_proc(argv, env_extra=None):
    env = dict(os.environ)
    if env_extra:
        env.update(env_extra)
    return subprocess.run(
        [sys.executable, "-m", "ksol.cli", *argv], capture_output=True, text=True, env=env
    )


class TestClassify:
    def test_expander_is_type_gamma(self, tmp_path):
        out = tmp_path / "r.json"
        code = run_cli(
            ["classify", "--n", "4", "--k", "1", "--rho", "-1", "--theta", "1",
             "--alpha", "1", "--out", str(out)]
        )
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["class"]["kind"] == "TypeGamma"
        assert doc["config"]["rho"] == -1.0
        assert doc["monitors"] == {
            "x_monotone_below_XB": 0,
            "z_lower_bound": 0,
            "log_z_identity": 0,
            "self_intersections": 0,
        }

    def test_subcritical_non_admissible(self, tmp_path):
        out = tmp_path / "r.json"
        code = run_cli(
            ["classify", "--n", "3", "--k", "2", "--rho", "1", "--theta", "1",
             "--alpha", "1", "--out", str(out)]
        )
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["class"]["kind"] == "NonAdmissible"
        assert doc["class"]["s_exit"] is not None

    def test_missing_theta_usage_error(self):
        proc = run_proc(["classify", "--n", "4", "--k", "1", "--rho", "1"])
        assert proc.returncode == 2

    def test_invalid_params_exit_2(self):
        proc = run_proc(
            ["classify", "--n", "4", "--k", "1", "--rho", "-3", "--theta", "1"]
        )
        assert proc.returncode == 2
        assert "2*theta + rho" in proc.stderr

    def test_stable_key_order(self, tmp_path):
        out = tmp_path / "r.json"
        run_cli(["classify", "--n", "4", "--k", "1", "--rho", "1", "--theta", "1",
                 "--out", str(out)])
        text = out.read_text()
        keys = [line.split('"')[1] for line in text.splitlines() if line.startswith('  "')]
        assert keys == sorted(keys)


class TestProfileCommand:
    def test_header_rows_and_positivity(self, tmp_path):
        out = tmp_path / "p.csv"
        code = run_cli(
            ["profile", "--n", "4", "--k", "1", "--rho", "1", "--theta", "1",
             "--alpha", "1", "--out", str(out)]
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "r,u,u_r,u_rr,lambda1,lambda2,sigma_k"
        assert len(lines) - 1 >= 100
        rows = list(csv.DictReader(out.open()))
        assert all(float(r["sigma_k"]) > 0.0 for r in rows)
        assert all(float(r["u"]) > 0.0 for r in rows)
        sidecar = json.loads((tmp_path / "p.csv.json").read_text())
        assert sidecar["elliptic_max_rel"] < 1e-6

    def test_lf_line_endings(self, tmp_path):
        out = tmp_path / "p.csv"
        run_cli(["profile", "--n", "4", "--k", "1", "--rho", "0", "--theta", "1",
                 "--out", str(out)])
        blob = out.read_bytes()
        assert b"\r" not in blob


class TestPortrait:
    def test_contents(self, tmp_path):
        out = tmp_path / "port.csv"
        code = run_cli(
            ["portrait", "--n", "4", "--k", "1", "--rho", "1", "--theta", "1",
             "--grid", "9", "--orbits", "1.0", "--out", str(out)]
        )
        assert code == 0
        rows = list(csv.DictReader(out.open()))
        kinds = {r["record"] for r in rows}
        assert {"field", "nullcline_X", "nullcline_Z", "critical", "orbit"} <= kinds
        # the Z_s = 0 nullcline is the vertical line X = X_B plus the axis
        p = phase.make_params(4, 1, 1.0, 1.0)
        vert = [r for r in rows if r["record"] == "nullcline_Z" and r["label"] == "X=X_B"]
        assert vert and all(float(r["X"]) == pytest.approx(p.X_B) for r in vert)
        crits = {r["label"].split(":")[0]: r for r in rows if r["record"] == "critical"}
        assert set(crits) == {"O", "A", "B"}
        assert float(crits["B"]["X"]) == pytest.approx(3.0)
        assert float(crits["B"]["Z"]) == pytest.approx(1.0)

    def test_no_interior_critical_point_for_expander(self, tmp_path):
        out = tmp_path / "port.csv"
        run_cli(["portrait", "--n", "4", "--k", "1", "--rho", "-1", "--theta", "1",
                 "--grid", "5", "--orbits", "1.0", "--out", str(out)])
        rows = list(csv.DictReader(out.open()))
        p = phase.make_params(4, 1, -1.0, 1.0)
        for r in rows:
            if r["record"] != "critical":
                continue
            X, Z = float(r["X"]), float(r["Z"])
            assert not phase.in_admissible_region((X, Z), p)


class TestVerify:
    def test_three_regimes_pass(self, tmp_path):
        for rho in ("-1", "0", "1"):
            out = tmp_path / f"v{rho}.json"
            code = run_cli(["verify", "--n", "4", "--k", "1", "--rho", rho,
                            "--theta", "1", "--out", str(out)])
            doc = json.loads(out.read_text())
            failed = {k: v for k, v in doc["checks"].items() if not v["pass"]}
            assert code == 0 and doc["all_pass"], failed

    def test_n_eq_2k_suite_passes(self, tmp_path):
        out = tmp_path / "v.json"
        code = run_cli(["verify", "--n", "4", "--k", "2", "--rho", "1",
                        "--theta", "1", "--out", str(out)])
        assert code == 0


class TestSweep:
    def test_regime_table_and_determinism(self, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        args = ["sweep", "--n", "4", "--k", "1", "--theta", "1",
                "--rhos=-1,0,1", "--alphas", "1.0"]
        assert run_cli(args + ["--out", str(a)]) == 0
        assert run_cli(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        rows = list(csv.DictReader(a.open()))
        classes = [r["class"] for r in rows]
        assert classes[0] == "TypeGamma" and classes[1] == "TypeGamma"
        assert classes[2] in ("TypeB", "GeneralizedB")

    def test_partial_failure_recorded(self, tmp_path):
        out = tmp_path / "s.csv"
        code = run_cli(["sweep", "--n", "4", "--k", "1", "--theta", "1",
                        "--rhos=-5,1", "--out", str(out)])
        assert code == 0
        rows = list(csv.DictReader(out.open()))
        assert rows[0]["status"] == "error" and "2*theta" in rows[0]["error"]
        assert rows[1]["status"] == "ok"

    def test_supercritical_rho_dichotomy_columns(self, tmp_path):
        # the rho > 2 theta table must be able to express both outcomes of
        # the shrinker dichotomy: the class column and X_inf where applicable
        out = tmp_path / "s.csv"
        code = run_cli(["sweep", "--n", "3", "--k", "2", "--theta", "1",
                        "--rhos", "5", "--alphas", "0.5,1.0", "--out", str(out)])
        assert code == 0
        rows = list(csv.DictReader(out.open()))
        assert {"class", "X_inf", "exponent"} <= set(rows[0].keys())
        assert all(r["class"] == "TypeA" and r["X_inf"] for r in rows)

    def test_jobs_env_default(self, tmp_path):
        out = tmp_path / "s.csv"
        proc = run_proc(
            ["sweep", "--n", "4", "--k", "1", "--theta", "1", "--rhos=0,1",
             "--out", str(out)],
            env_extra={"KSOL_JOBS": "2"},
        )
        assert proc.returncode == 0
        assert len(list(csv.DictReader(out.open()))) == 2


class TestConfigPrecedence:
    def test_file_then_flag(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("n=4\nk=1\nrho=1.0\ntheta=1.0\nalpha=2.0\n")
        out = tmp_path / "r.json"
        run_cli(["classify", "--config", str(cfg), "--out", str(out)])
        assert json.loads(out.read_text())["config"]["alpha"] == "2.0"
        # a flag overrides the file
        run_cli(["classify", "--config", str(cfg), "--alpha", "3.0", "--out", str(out)])
        assert json.loads(out.read_text())["config"]["alpha"] == 3.0

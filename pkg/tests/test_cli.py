"""End-to-end runs of the batch CLI: configs, CSV/JSON outputs, exit codes."""

import csv
import json
import math

import pytest

import remclock
from remclock.cli import CSV_COLUMNS, main
from remclock.hypercube_walk import transition_prob
from remclock.landscape import beta_critical
from remclock.limits import asl_cdf

MASTER = 1380272417
HEADER = ",".join(CSV_COLUMNS)


def _write_cfg(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=1))
    return str(path)


def _rem_cfg(**over):
    doc = {
        "schema_version": 1,
        "model": "rem",
        "n": 8,
        "beta": 2.0 * beta_critical(0.5),
        "epsilon": 0.5,
        "t_grid": [0.5, 1.0],
        "rho_grid": [1.0],
        "n_env": 3,
        "n_chain": 30,
        "master_seed": MASTER,
    }
    doc.update(over)
    return doc


def _read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestSimulate:
    def test_round_trip(self, tmp_path):
        cfg = _write_cfg(tmp_path, "rem.json", _rem_cfg())
        out = str(tmp_path / "res.csv")
        assert main(["simulate", "--config", cfg, "--out", out]) == 0
        first = open(out).readline().rstrip("\n")
        assert first == HEADER
        rows = _read_rows(out)
        assert len(rows) == 2
        for row in rows:
            assert row["model"] == "rem"
            assert row["scale_kind"] == "Intermediate"
            assert row["mode"] == "quenched" and row["init"] == "uniform"
            assert row["seed"] == str(MASTER)
            # full round-trip float formatting: repr(float(s)) == s
            for col in ("beta", "t", "p_hat", "ci95", "asl_target", "eps"):
                assert repr(float(row[col])) == row[col], col
            assert 0.0 <= float(row["p_hat"]) <= 1.0
        # alpha(eps) = 1/2 here, so the target column is the arcsine value
        assert float(rows[0]["asl_target"]) == pytest.approx(asl_cdf(0.5, 0.5))

    def test_rerun_identical_bytes(self, tmp_path):
        cfg = _write_cfg(tmp_path, "rem.json", _rem_cfg())
        a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        assert main(["simulate", "--config", cfg, "--out", a]) == 0
        assert main(["simulate", "--config", cfg, "--out", b]) == 0
        assert open(a, "rb").read() == open(b, "rb").read()

    def test_seed_flag_overrides_config(self, tmp_path):
        cfg = _write_cfg(tmp_path, "rem.json", _rem_cfg())
        out = str(tmp_path / "res.csv")
        assert main(["simulate", "--config", cfg, "--seed", "99", "--out", out]) == 0
        assert all(r["seed"] == "99" for r in _read_rows(out))

    def test_threads_env_var_matches_serial(self, tmp_path, monkeypatch):
        cfg = _write_cfg(tmp_path, "rem.json", _rem_cfg())
        a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        assert main(["simulate", "--config", cfg, "--threads", "1", "--out", a]) == 0
        monkeypatch.setenv("REMCLOCK_THREADS", "2")
        assert main(["simulate", "--config", cfg, "--out", b]) == 0
        assert open(a, "rb").read() == open(b, "rb").read()

    def test_trap_block(self, tmp_path):
        cfg = _write_cfg(tmp_path, "trap.json", {
            "schema_version": 1, "model": "trap", "n_states": 200,
            "alpha": 0.5, "a_n": 32.0, "t_grid": [1.0], "rho_grid": [1.0, 2.0],
            "n_env": 3, "n_chain": 50, "master_seed": MASTER,
        })
        out = str(tmp_path / "trap.csv")
        assert main(["simulate", "--config", cfg, "--out", out]) == 0
        rows = _read_rows(out)
        assert len(rows) == 2
        assert rows[0]["model"] == "trap"
        assert rows[0]["scale_kind"] == "trap"
        assert rows[0]["eps"] == ""

    def test_manifest_contents(self, tmp_path):
        cfg = _write_cfg(tmp_path, "rem.json", _rem_cfg())
        out = str(tmp_path / "res.csv")
        assert main(["simulate", "--config", cfg, "--out", out]) == 0
        doc = json.loads(open(out + ".manifest.json").read())
        assert doc["version"] == remclock.__version__
        assert doc["master_seed"] == MASTER
        assert doc["wall_time_s"] >= 0.0
        assert doc["config"]["model"] == "rem"
        assert doc["rows"] == 2
        assert doc["failed_envs"] == [] and doc["n_env_failed"] == 0

    def test_all_envs_failing_exits_3(self, tmp_path):
        cfg = _write_cfg(tmp_path, "rem.json", _rem_cfg(step_cap=10))
        out = str(tmp_path / "res.csv")
        assert main(["simulate", "--config", cfg, "--out", out]) == 3
        doc = json.loads(open(out + ".manifest.json").read())
        assert doc["failed"] is True
        assert doc["error"]

    def test_config_validation_exit_codes(self, tmp_path):
        bad = [
            _rem_cfg(bogus_key=1),                      # unknown key
            _rem_cfg(t_grid=[]),                        # empty time grid
            _rem_cfg(model="ising"),                    # unknown model
            {k: v for k, v in _rem_cfg().items() if k != "master_seed"},
        ]
        for i, doc in enumerate(bad):
            cfg = _write_cfg(tmp_path, f"bad{i}.json", doc)
            assert main(["simulate", "--config", cfg,
                         "--out", str(tmp_path / "x.csv")]) == 2, i

    def test_schema_version_checked(self, tmp_path):
        cfg = _write_cfg(tmp_path, "v9.json", _rem_cfg(schema_version=9))
        assert main(["simulate", "--config", cfg]) == 2
        missing = tmp_path / "gone.json"
        assert main(["simulate", "--config", str(missing)]) == 2
        notdict = tmp_path / "arr.json"
        notdict.write_text("[1,2]")
        assert main(["simulate", "--config", str(notdict)]) == 2
        assert main(["simulate"]) == 2   # --config required


class TestSummarize:
    def test_single_file_passthrough(self, tmp_path):
        cfg = _write_cfg(tmp_path, "rem.json", _rem_cfg())
        res = str(tmp_path / "res.csv")
        assert main(["simulate", "--config", cfg, "--out", res]) == 0
        pooled = str(tmp_path / "summary.csv")
        assert main(["summarize", res, "--out", pooled]) == 0
        orig = {r["t"]: r for r in _read_rows(res)}
        for row in _read_rows(pooled):
            src = orig[row["t"]]
            assert float(row["p_hat"]) == pytest.approx(float(src["p_hat"]))
            assert float(row["ci95"]) == pytest.approx(float(src["ci95"]))

    def _craft(self, tmp_path, name, p_hat, ci, n_env=10, target=""):
        row = {
            "model": "rem", "n": "8", "beta": "1.0", "eps": "0.5",
            "scale_kind": "Intermediate", "t": "1.0", "rho": "1.0",
            "mode": "quenched", "init": "uniform", "n_env": str(n_env),
            "n_chain": "100", "p_hat": repr(p_hat), "ci95": repr(ci),
            "asl_target": target, "seed": "7",
        }
        path = tmp_path / name
        path.write_text(HEADER + "\n" + ",".join(row[c] for c in CSV_COLUMNS) + "\n")
        return str(path)

    def test_disjoint_env_sets_pool_narrower(self, tmp_path):
        a = self._craft(tmp_path, "a.csv", 0.50, 0.04)
        b = self._craft(tmp_path, "b.csv", 0.52, 0.04)
        pooled = str(tmp_path / "pool.csv")
        assert main(["summarize", a, b, "--out", pooled]) == 0
        rows = _read_rows(pooled)
        assert len(rows) == 1
        assert float(rows[0]["ci95"]) < 0.04
        assert rows[0]["n_env"] == "20"
        assert float(rows[0]["p_hat"]) == pytest.approx(0.51)

    def test_failing_target_exits_1(self, tmp_path):
        bad = self._craft(tmp_path, "bad.csv", 0.50, 0.002, target="0.9")
        assert main(["summarize", bad, "--out", str(tmp_path / "p.csv")]) == 1

    def test_passing_target_exits_0(self, tmp_path):
        good = self._craft(tmp_path, "good.csv", 0.51, 0.02, target="0.5")
        assert main(["summarize", good, "--out", str(tmp_path / "p.csv")]) == 0

    def test_header_mismatch_exits_2(self, tmp_path):
        path = tmp_path / "weird.csv"
        path.write_text("model,n,p_hat\nrem,8,0.5\n")
        assert main(["summarize", str(path), "--out", str(tmp_path / "p.csv")]) == 2

    def test_no_matching_files_exits_2(self, tmp_path):
        assert main(["summarize", str(tmp_path / "nothing_*.csv"),
                     "--out", str(tmp_path / "p.csv")]) == 2


class TestConditionsCommand:
    def test_report_files(self, tmp_path):
        cfg = _write_cfg(tmp_path, "cond.json", {
            "schema_version": 1, "model": "rem", "n": 8,
            "beta": 2.0 * beta_critical(0.5), "epsilon": 0.5,
            "t": 1.0, "u_grid": [0.5, 1.0], "delta_grid": [0.1],
            "n_skeletons": 20, "master_seed": MASTER,
        })
        out = str(tmp_path / "cond.json.out")
        assert main(["conditions", "--config", cfg, "--out", out]) == 0
        reports = json.loads(open(out).read())
        assert isinstance(reports, list) and len(reports) == 1
        rep = reports[0]
        assert set(rep["flags"]) == {"A0'", "A1", "A2", "A3"}
        assert rep["n"] == 8 and len(rep["u_grid"]) == 2
        csv_path = out.rsplit(".", 1)[0] + ".csv"
        lines = open(csv_path).read().splitlines()
        assert lines[0].startswith("n,beta,eps,scale_kind,t,env,u,")
        assert len(lines) == 3
        manifest = json.loads(open(out + ".manifest.json").read())
        assert manifest["csv"] == csv_path
        assert isinstance(manifest["flags"], list)

    def test_trap_rejected(self, tmp_path):
        cfg = _write_cfg(tmp_path, "cond.json", {
            "schema_version": 1, "model": "trap", "n": 8, "beta": 1.0,
            "epsilon": 0.5, "t": 1.0, "u_grid": [1.0], "delta_grid": [0.1],
            "master_seed": 1,
        })
        assert main(["conditions", "--config", cfg]) == 2


class TestLimitsCommand:
    def test_asl_table(self, tmp_path):
        cfg = _write_cfg(tmp_path, "asl.json", {
            "schema_version": 1, "task": "asl-table", "alpha": 0.5,
            "u_grid": [0.0, 0.25, 1.0], "master_seed": 1,
        })
        out = str(tmp_path / "asl.csv")
        assert main(["limits", "--config", cfg, "--out", out]) == 0
        lines = open(out).read().splitlines()
        assert lines[0] == "u,asl"
        vals = [line.split(",") for line in lines[1:]]
        assert float(vals[0][1]) == 0.0
        assert float(vals[1][1]) == pytest.approx(asl_cdf(0.5, 0.25), rel=1e-15)
        assert float(vals[2][1]) == 1.0
        for u_str, a_str in vals:
            assert repr(float(a_str)) == a_str

    def test_overshoot(self, tmp_path):
        cfg = _write_cfg(tmp_path, "ov.json", {
            "schema_version": 1, "task": "overshoot", "alpha": 0.5,
            "kind": "stable", "t_grid": [1.0], "rho_grid": [1.0],
            "replicas": 2000, "master_seed": MASTER,
        })
        out = str(tmp_path / "ov.csv")
        assert main(["limits", "--config", cfg, "--out", out]) == 0
        rows = _read_rows(out)
        assert len(rows) == 1
        assert rows[0]["model"] == "stable"
        assert rows[0]["scale_kind"] == "subordinator"
        assert float(rows[0]["asl_target"]) == pytest.approx(0.5)
        assert abs(float(rows[0]["p_hat"]) - 0.5) <= 0.1

    def test_marks_export(self, tmp_path):
        cfg = _write_cfg(tmp_path, "marks.json", {
            "schema_version": 1, "task": "marks", "alpha": 0.5,
            "marks_count": 50, "master_seed": 3,
        })
        out = str(tmp_path / "marks.csv")
        assert main(["limits", "--config", cfg, "--out", out]) == 0
        assert len(open(out).read().splitlines()) == 51
        manifest = json.loads(open(out + ".manifest.json").read())
        assert manifest["count"] == 50

    def test_unknown_task(self, tmp_path):
        cfg = _write_cfg(tmp_path, "bad.json", {
            "schema_version": 1, "task": "teleport", "master_seed": 1,
        })
        assert main(["limits", "--config", cfg]) == 2


class TestCompareCommand:
    def test_matched_grids(self, tmp_path):
        cfg = _write_cfg(tmp_path, "cmp.json", {
            "schema_version": 1,
            "master_seed": MASTER,
            "rem": {
                "model": "rem", "n": 8, "beta": 2.0 * beta_critical(0.5),
                "epsilon": 0.5, "t_grid": [0.5], "rho_grid": [1.0],
                "n_env": 3, "n_chain": 30,
            },
            "trap": {
                "model": "trap", "n_states": 200, "alpha": 0.5, "a_n": 32.0,
                "t_grid": [0.5], "rho_grid": [1.0], "n_env": 3, "n_chain": 50,
            },
        })
        out = str(tmp_path / "cmp.json.out")
        assert main(["compare", "--config", cfg, "--out", out]) == 0
        doc = json.loads(open(out).read())
        assert doc["alpha_matched"] is True
        assert isinstance(doc["all_within"], bool)
        assert len(doc["cells"]) == 1
        rows = _read_rows(out.rsplit(".", 1)[0] + ".csv")
        assert {r["model"] for r in rows} == {"rem", "trap"}


class TestTabulateWalk:
    def test_exact_table(self, tmp_path):
        out = str(tmp_path / "walk.csv")
        assert main(["tabulate-walk", "--n", "6", "--l-max", "3",
                     "--out", out]) == 0
        lines = open(out).read().splitlines()
        assert lines[0] == "n,l,d,probability"
        assert len(lines) == 1 + 3 * 7
        table = {}
        for line in lines[1:]:
            n, l, d, p = line.split(",")
            table[(int(l), int(d))] = p
        assert table[(1, 1)] == repr(1.0 / 6.0)
        assert table[(1, 0)] == "0.0"
        assert table[(2, 0)] == repr(transition_prob(6, 0, 2))
        for (l, d), p_str in table.items():
            assert float(p_str) == transition_prob(6, d, l)

    def test_requires_n(self):
        assert main(["tabulate-walk"]) == 2

import json

import pytest

from sdebayes.cli import main
from sdebayes.market import synthetic_bundle_csv

SYNTH_KW = dict(
    mask=(True, False, True), xi=(2.0, 1.0, 1.0, 1.0), beta=(1.0, 0.4),
    diffusion=(0.25, 0.8), x0=2.0,
)

SIM_INI = """
[study]
kind = simulate
seed = 9

[data]
n_individuals = 3
n_steps = 120
"""

CASE1_INI = """
[study]
kind = case1
seed = 3

[data]
n_individuals = 4
n_steps = 150

[mc]
m_draws = 500
anneal_max_evals = 1000
"""


def write(tmp_path, name, text):
    file = tmp_path / name
    file.write_text(text)
    return str(file)


class TestSimulateCommand:
    def test_writes_artifacts(self, tmp_path):
        cfg = write(tmp_path, "sim.ini", SIM_INI)
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        assert sorted(p.name for p in out.glob("path_*.csv")) == [
            "path_0000.csv", "path_0001.csv", "path_0002.csv"
        ]
        assert (out / "panel.csv").read_text().splitlines()[0] == "t,z1,z2,z3"
        truth = json.loads((out / "truth.json").read_text())
        assert truth["mask"] == "(1,1,1)"
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["status"] == "ok"
        assert len(manifest["artifact_paths"]) == 5

    def test_single_individual(self, tmp_path):
        cfg = write(tmp_path, "sim.ini", SIM_INI.replace("n_individuals = 3", "n_individuals = 1"))
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        assert len(list(out.glob("path_*.csv"))) == 1

    def test_rerun_byte_identical(self, tmp_path):
        cfg = write(tmp_path, "sim.ini", SIM_INI)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        main(["simulate", "--config", cfg, "--out", str(out_a)])
        main(["simulate", "--config", cfg, "--out", str(out_b)])
        for name in ("path_0000.csv", "panel.csv", "truth.json"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_dry_run_manifest_only(self, tmp_path):
        cfg = write(tmp_path, "sim.ini", SIM_INI)
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg, "--out", str(out), "--dry-run"]) == 0
        assert [p.name for p in out.iterdir()] == ["manifest.json"]
        assert json.loads((out / "manifest.json").read_text())["status"] == "dry-run"


class TestSelectCommand:
    def test_case1_pass_exit_zero(self, tmp_path):
        cfg = write(tmp_path, "case1.ini", CASE1_INI)
        out = tmp_path / "out"
        code = main(["select", "--config", cfg, "--out", str(out)])
        report = json.loads((out / "report.json").read_text())
        assert (code == 0) == report["pass"]
        assert (out / "report.csv").read_text().startswith("mask,score,se")
        assert len(report["scores"]) == 7

    def test_rerun_byte_identical_reports(self, tmp_path):
        cfg = write(tmp_path, "case1.ini", CASE1_INI)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        main(["select", "--config", cfg, "--out", str(out_a)])
        main(["select", "--config", cfg, "--out", str(out_b)])
        assert (out_a / "report.json").read_bytes() == (out_b / "report.json").read_bytes()
        assert (out_a / "report.csv").read_bytes() == (out_b / "report.csv").read_bytes()

    def test_invalid_config_key_named(self, tmp_path, capsys):
        cfg = write(
            tmp_path, "bad.ini",
            "[study]\nkind = case1\nseed = 1\n\n[data]\nn_stepz = 5\n",
        )
        code = main(["select", "--config", cfg, "--out", str(tmp_path / "out")])
        assert code == 2
        assert "n_stepz" in capsys.readouterr().err

    def test_case2_eight_row_table_with_winner(self, tmp_path):
        cfg = write(tmp_path, "case2.ini", CASE1_INI.replace("case1", "case2"))
        out = tmp_path / "out"
        main(["select", "--config", cfg, "--out", str(out)])
        report = json.loads((out / "report.json").read_text())
        assert len(report["scores"]) == 8
        assert report["winner"] is not None
        assert len((out / "report.csv").read_text().strip().splitlines()) == 9

    def test_seed_flag_overrides(self, tmp_path):
        cfg = write(tmp_path, "case1.ini", CASE1_INI)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        main(["select", "--config", cfg, "--out", str(out_a), "--seed", "3"])
        main(["select", "--config", cfg, "--out", str(out_b), "--seed", "4"])
        assert (out_a / "report.json").read_bytes() != (out_b / "report.json").read_bytes()


class TestKlCommand:
    def test_delta_report_schema(self, tmp_path):
        cfg = write(
            tmp_path,
            "kl.ini",
            "[study]\nkind = kl\nseed = 2\n\n[data]\nsigma0 = 1.0\nn_steps = 200\n\n"
            "[model]\ndrift0 = constant\ntheta0 = 1.0 1.0\ndrift1 = constant\n\n"
            "[mc]\nn_paths = 200\ngrid_min = 1.0 0.0\ngrid_max = 1.0 3.0\ngrid_points = 1 7\n",
        )
        out = tmp_path / "out"
        assert main(["kl", "--config", cfg, "--out", str(out)]) == 0
        delta = json.loads((out / "delta.json").read_text())
        assert delta["delta"] == pytest.approx(0.0, abs=1e-12)
        assert "argmin" in delta and "grid" in delta and "se_at_argmin" in delta


class TestMarketCommand:
    def make_inputs(self, tmp_path):
        prices, covs = synthetic_bundle_csv(seed=4, n_observations=250, **SYNTH_KW)
        p_file = tmp_path / "acme.csv"
        p_file.write_text(prices)
        c_file = tmp_path / "covs.csv"
        c_file.write_text(covs)
        cfg = write(
            tmp_path,
            "market.ini",
            f"[study]\nkind = market\nseed = 4\n\n[data]\nprices = {p_file}\n"
            f"covariates = {c_file}\n\n[mc]\nm_draws = 500\nanneal_max_evals = 1000\n",
        )
        return cfg, p_file, c_file

    def test_pipeline_artifacts(self, tmp_path):
        cfg, _, _ = self.make_inputs(tmp_path)
        out = tmp_path / "out"
        assert main(["market", "--config", cfg, "--out", str(out)]) == 0
        table = (out / "table.csv").read_text()
        assert table.startswith("company,winner_mask,covariates")
        report = json.loads((out / "company_acme.json").read_text())
        assert report["best_family"] in ("vasicek", "cir", "gbm", "ckls")

    def test_missing_covariate_file_fails_fast(self, tmp_path, capsys):
        cfg, _, c_file = self.make_inputs(tmp_path)
        c_file.unlink()
        out = tmp_path / "out"
        code = main(["market", "--config", cfg, "--out", str(out)])
        assert code == 2
        assert "missing input files" in capsys.readouterr().err
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["status"] == "failed"
        assert not list(out.glob("company_*.json"))

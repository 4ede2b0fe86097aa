import csv
import io
import json
import subprocess
import sys

import pytest

from sparserec import cli
from sparserec.cli import _SUBCOMMANDS, fmt, main
from sparserec.experiments import CSV_HEADER
from sparserec.model import load_instance


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestFormat:
    def test_values(self):
        assert fmt(6000.0) == "6000"
        assert fmt(0.1) == "0.1"
        assert fmt(1 / 3) == repr(1 / 3)
        assert fmt(float("inf")) == "inf"
        assert fmt(None) == ""
        assert fmt(True) == "true"


class TestThresholds:
    def test_sparse_example(self, capsys):
        code, out, _ = run(capsys, "thresholds", "--kind", "n_inf_sp_sublinear", "--p", "1000000",
                           "--s", "1000", "--d", "10000")
        assert code == 0 and out == "6000\n"

    def test_zero_denominator_example(self, capsys):
        code, out, err = run(capsys, "thresholds", "--kind", "n_star_sublinear", "--p", "1000",
                             "--s", "10", "--d", "200", "--delta", "0.5", "--sigma", "0.70710678")
        assert code == 3 and out == ""
        assert "log(ds/p) + log(δ/2σ²) ≤ 0" in err

    def test_round_trip_decimal(self, capsys):
        code, out, _ = run(capsys, "thresholds", "--kind", "n_star_sublinear", "--p", "30",
                           "--s", "5", "--d", "18", "--delta", "0.4", "--sigma", "0.5")
        assert code == 0
        assert float(out) == pytest.approx(20.4662872902080, rel=1e-13)
        assert out.strip() == repr(float(out))

    def test_extra_kinds(self, capsys):
        assert run(capsys, "thresholds", "--kind", "price_of_sparsity", "--p", "1000000",
                   "--s", "1000", "--d", "10000")[1] == "3\n"
        assert run(capsys, "thresholds", "--kind", "power_law_gamma", "--alpha", "0.5",
                   "--beta", "0.75")[1] == "2\n"

    def test_json(self, capsys):
        code, out, _ = run(capsys, "thresholds", "--kind", "n_inf_dense", "--p", "1000000",
                           "--s", "1000", "--format", "json")
        data = json.loads(out)
        assert code == 0 and data["value"] == 2000
        assert data["config"]["kind"] == "n_inf_dense" and data["config"]["p"] == 1000000

    def test_unknown_kind(self, capsys):
        code, _, err = run(capsys, "thresholds", "--kind", "magic", "--p", "10")
        assert code == 2 and "magic" in err

    def test_missing_parameter(self, capsys):
        code, _, err = run(capsys, "thresholds", "--kind", "n_inf_dense", "--s", "10")
        assert code == 2 and "--p" in err

    def test_domain_error(self, capsys):
        code, _, err = run(capsys, "thresholds", "--kind", "n_inf_dense", "--p", "10", "--s", "20")
        assert code == 2 and "error" in err


class TestParsing:
    @pytest.mark.parametrize("sub", sorted(_SUBCOMMANDS))
    def test_help(self, sub, capsys):
        code, out, _ = run(capsys, sub, "--help")
        assert code == 0 and "--" in out

    def test_top_help(self, capsys):
        assert run(capsys, "--help")[0] == 0

    def test_unknown_flag(self, capsys):
        code, _, err = run(capsys, "thresholds", "--kind", "n_inf_dense", "--p", "10", "--s", "2",
                           "--bogus", "1")
        assert code == 2 and "--bogus" in err

    def test_no_abbreviations(self, capsys):
        assert run(capsys, "thresholds", "--kin", "n_inf_dense", "--p", "10", "--s", "2")[0] == 2

    def test_flag_not_in_subcommand(self, capsys):
        assert run(capsys, "thresholds", "--kind", "n_inf_dense", "--p", "10", "--s", "2",
                   "--seed", "1")[0] == 2

    def test_unknown_subcommand(self, capsys):
        assert run(capsys, "fly")[0] == 2

    def test_bad_format(self, capsys):
        assert run(capsys, "thresholds", "--kind", "n_inf_dense", "--p", "100", "--s", "10",
                   "--format", "xml")[0] == 2

    @pytest.mark.parametrize("argv", [
        ("sweep", "--p", "12", "--s", "3", "--d", "6", "--n-grid", "5", "--trials", "1"),
        ("simulate", "--p", "12", "--s", "3", "--d", "6", "--n", "5"),
        ("bounds", "--op", "mgf_minus_delta_mc", "--p", "60", "--s", "6", "--d", "30", "--M",
         "3", "--trials", "100"),
        ("oracle", "--check", "product", "--sigma1", "0.3", "--sigma2", "0.3", "--rho", "0"),
        ("probe-ui", "--p-grid", "100", "--T-grid", "1", "--eta", "0.5", "--alpha", "0.1",
         "--psi", "0.5", "--trials", "1000"),
    ])
    def test_seed_required(self, argv, capsys):
        code, _, err = run(capsys, *argv)
        assert code == 2 and "--seed" in err


class TestConfigFile:
    def test_flags_override_file(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# thresholds\nkind = n_inf_sp_sublinear\np = 1000000\ns = 1000\nd = 99\n")
        code, out, _ = run(capsys, "thresholds", "--config", str(cfg), "--d", "10000")
        assert code == 0 and out == "6000\n"

    def test_json_config(self, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"kind": "n_inf_dense", "p": 1000000, "s": 1000}))
        assert run(capsys, "thresholds", "--config", str(cfg))[1] == "2000\n"

    def test_list_values_in_json(self, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"p": 8, "s": 2, "d": 4, "n_grid": [3, 6], "trials": 2,
                                   "seed": 1}))
        code, out, _ = run(capsys, "sweep", "--config", str(cfg))
        assert code == 0 and len(out.splitlines()) == 3

    def test_unknown_key(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("kind = n_inf_dense\nwidth = 3\n")
        code, _, err = run(capsys, "thresholds", "--config", str(cfg))
        assert code == 2 and "line 2" in err and "width" in err

    def test_bad_value(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("p = many\n")
        code, _, err = run(capsys, "thresholds", "--kind", "n_inf_dense", "--config", str(cfg))
        assert code == 2 and "line 1" in err

    def test_bad_line(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("p 10\n")
        assert run(capsys, "thresholds", "--config", str(cfg))[0] == 2

    def test_missing_file(self, tmp_path, capsys):
        code, _, err = run(capsys, "thresholds", "--config", str(tmp_path / "nope.cfg"))
        assert code == 4 and "nope.cfg" in err


class TestSweep:
    ARGS = ("--p", "12", "--s", "3", "--d", "6", "--delta", "0.5", "--sigma", "0.5",
            "--n-grid", "3,6,12", "--trials", "6", "--seed", "7")

    def test_csv_to_file(self, tmp_path, capsys):
        out = tmp_path / "out.csv"
        code, stdout, _ = run(capsys, "sweep", *self.ARGS, "--out", str(out))
        assert code == 0 and stdout == ""
        rows = list(csv.reader(io.StringIO(out.read_text())))
        assert tuple(rows[0]) == CSV_HEADER
        assert len(rows) == 4
        assert [r[7] for r in rows[1:]] == ["3", "6", "12"]

    def test_threads_do_not_change_output(self, tmp_path, capsys, monkeypatch):
        texts = []
        for threads in ("1", "3"):
            run(capsys, "sweep", *self.ARGS, "--format", "json", "--threads", threads,
                "--out", str(tmp_path / ("t%s.json" % threads)))
            texts.append((tmp_path / ("t%s.json" % threads)).read_bytes())
        monkeypatch.setenv("SPARSEREC_THREADS", "2")
        run(capsys, "sweep", *self.ARGS, "--format", "json", "--out", str(tmp_path / "env.json"))
        texts.append((tmp_path / "env.json").read_bytes())
        assert texts[0] == texts[1] == texts[2]

    def test_json_echo(self, capsys):
        code, out, _ = run(capsys, "sweep", *self.ARGS, "--format", "json")
        data = json.loads(out)
        assert data["config"]["master_seed"] == 7 and data["config"]["n_grid"] == [3, 6, 12]
        assert [r["n"] for r in data["rows"]] == [3, 6, 12]

    def test_dense_setting(self, capsys):
        code, out, _ = run(capsys, "sweep", "--setting", "dense", "--p", "8", "--s", "2",
                           "--n-grid", "4", "--trials", "2", "--seed", "1")
        assert code == 0 and out.splitlines()[1].startswith("dense,8,2,8,")

    def test_rejects_sparsified_setting(self, capsys):
        assert run(capsys, "sweep", "--setting", "sparsified", *self.ARGS)[0] == 2

    def test_bad_grid(self, capsys):
        code, _, err = run(capsys, "sweep", "--p", "12", "--s", "3", "--d", "6",
                           "--n-grid", "6,3", "--trials", "2", "--seed", "1")
        assert code == 2 and "increasing" in err

    def test_budget_refusal(self, capsys):
        code, _, err = run(capsys, "sweep", "--p", "30", "--s", "5", "--d", "6", "--n-grid", "4",
                           "--trials", "1", "--seed", "1", "--budget", "100")
        assert code == 2 and "local search" in err

    def test_unwritable_out(self, tmp_path, capsys):
        code, _, err = run(capsys, "sweep", *self.ARGS, "--out",
                           str(tmp_path / "missing" / "x.csv"))
        assert code == 4 and "missing" in err

    def test_sparsify_sweep(self, capsys):
        code, out, _ = run(capsys, "sparsify-sweep", "--p", "10", "--alpha", "0.2", "--psi",
                           "0.5", "--sigma", "0.5", "--n-grid", "4,20", "--trials", "3",
                           "--seed", "2")
        rows = out.splitlines()
        assert code == 0 and len(rows) == 3 and rows[1].startswith("sparsified,10,2,5,")


class TestSimulate:
    def test_noiseless(self, capsys):
        code, out, _ = run(capsys, "simulate", "--p", "12", "--s", "3", "--d", "12",
                           "--sigma", "0", "--n", "12", "--seed", "4", "--format", "json")
        data = json.loads(out)
        assert code == 0 and data["symdiff"] == 0 and data["success"] is True
        assert data["success_criterion"] == "symdiff < 2*ceil(delta*s)"

    def test_dump_round_trip(self, tmp_path, capsys):
        path = tmp_path / "inst.bin"
        code, out, _ = run(capsys, "simulate", "--setting", "sparsified", "--p", "10",
                           "--alpha", "0.3", "--psi", "0.5", "--n", "9", "--seed", "3",
                           "--dump", str(path), "--format", "json")
        assert code == 0
        inst = load_instance(path)
        assert inst.design.shape == (9, 10) and inst.sparsified.d == 5
        assert len(inst.beta_support.indices) == 3

    def test_csv(self, capsys):
        code, out, _ = run(capsys, "simulate", "--p", "8", "--s", "2", "--d", "4", "--n", "6",
                           "--seed", "1")
        header, row = out.splitlines()
        assert code == 0 and header == "n,seed,symdiff,success,loss_star,loss_hat,support_hat"
        assert row.startswith("6,")


class TestBounds:
    def test_product(self, capsys):
        h = repr(2 ** -0.5)
        code, out, _ = run(capsys, "bounds", "--op", "gaussian_product_mgf", "--sigma1", h,
                           "--sigma2", h, "--rho", "-0.5")
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and float(rows[0]["value"]) == pytest.approx(0.87287, abs=5e-6)

    def test_product_zero_sigma_rejected(self, capsys):
        assert run(capsys, "bounds", "--op", "gaussian_product_mgf", "--sigma1", "0",
                   "--sigma2", "1", "--rho", "0")[0] == 2

    def test_product_infinite(self, capsys):
        code, out, _ = run(capsys, "bounds", "--op", "gaussian_product_mgf", "--sigma1", "1",
                           "--sigma2", "1", "--rho", "0.5")
        assert code == 0 and list(csv.DictReader(io.StringIO(out)))[0]["value"] == "inf"

    def test_proposition1_asymptotic(self, capsys):
        code, out, _ = run(capsys, "bounds", "--op", "proposition1_bound", "--n", "4", "--p",
                           "60", "--s", "6", "--d", "30", "--sigma", "0.5", "--mode",
                           "asymptotic", "--format", "json")
        row = json.loads(out)["rows"][0]
        assert code == 0 and row["value"] == pytest.approx((2 * 0.25 * 60 / 90) ** 2, rel=1e-14)

    def test_kernel(self, capsys):
        code, out, _ = run(capsys, "bounds", "--op", "chernoff_kernel", "--theta", "0.3", "--p",
                           "60", "--s", "10", "--d", "20", "--M", "4", "--sum-a", "0",
                           "--sum-b", "0", "--sum-c", "0")
        assert code == 0 and list(csv.DictReader(io.StringIO(out)))[0]["value"] == "1"

    def test_mc_reproducible(self, capsys):
        argv = ("bounds", "--op", "mgf_minus_delta_mc", "--p", "60", "--s", "6", "--d", "30",
                "--M", "3", "--trials", "2000", "--seed", "5")
        a = run(capsys, *argv)[1]
        b = run(capsys, *argv, "--threads", "2")[1]
        assert a == b and "stderr" in a.splitlines()[0]

    def test_unknown_op(self, capsys):
        assert run(capsys, "bounds", "--op", "magic")[0] == 2

    def test_clt_zero_variance(self, capsys):
        assert run(capsys, "bounds", "--op", "clt_statistic", "--count", "0", "--m", "10",
                   "--q", "0")[0] == 2


class TestOracle:
    def test_product(self, capsys):
        code, out, _ = run(capsys, "oracle", "--check", "product", "--sigma1", "0.4",
                           "--sigma2", "0.5", "--rho", "-0.3", "--trials", "200000", "--seed", "1")
        rows = {r["quantity"]: r for r in csv.DictReader(io.StringIO(out))}
        assert code == 0 and abs(float(rows["z_score"]["value"])) < 4

    def test_proposition1(self, capsys):
        code, out, _ = run(capsys, "oracle", "--check", "proposition1", "--n", "1", "--p", "60",
                           "--s", "6", "--d", "30", "--sigma", "0.5", "--trials", "20000",
                           "--seed", "1", "--format", "json")
        rows = {r["quantity"]: r for r in json.loads(out)["rows"]}
        assert code == 0
        assert rows["empirical"]["value"] <= rows["exact_base_bound"]["value"]

    def test_conditional(self, capsys):
        code, out, _ = run(capsys, "oracle", "--check", "conditional", "--p", "100", "--s", "20",
                           "--d", "10", "--M", "10", "--sigma", "0.5", "--trials", "20000",
                           "--seed", "3")
        rows = {r["quantity"]: r for r in csv.DictReader(io.StringIO(out))}
        assert code == 0 and abs(float(rows["z_score"]["value"])) < 4


def test_probe_ui(capsys):
    code, out, _ = run(capsys, "probe-ui", "--p-grid", "100,400", "--T-grid", "1,2", "--eta",
                       "0.5", "--alpha", "0.1", "--psi", "0.5", "--trials", "1000", "--seed", "9")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 4
    assert [(r["p"], r["T"]) for r in rows] == [("100", "1"), ("100", "2"), ("400", "1"),
                                                ("400", "2")]


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sparserec", "thresholds", "--kind",
                           "n_inf_dense", "--p", "1000000", "--s", "1000"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout == "2000\n"


def test_every_flag_documented():
    for _, flags in cli._SUBCOMMANDS.values():
        assert all(f in cli._FLAGS for f in flags)

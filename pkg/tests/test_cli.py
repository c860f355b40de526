import json
import subprocess
import sys

import numpy as np
import pytest

from subspace_perturb import __version__
from subspace_perturb.cli import DEFAULT_SEED, EXIT_ERROR, EXIT_HYPOTHESIS, EXIT_OK, main
from subspace_perturb.experiments import records_from_csv
from subspace_perturb.generators import InstanceSpec, build_instance
from subspace_perturb.matio import csv_to_matrix, read_matrix, write_matrix


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def low_rank_files(tmp_path):
    inst = build_instance(InstanceSpec("low-rank", 16, 0.01, 3))
    write_matrix(tmp_path / "a.csv", inst.a)
    write_matrix(tmp_path / "e.csv", inst.e)
    write_matrix(tmp_path / "z.csv", np.zeros((16, 16)))
    return tmp_path


class TestGen:
    def test_low_rank_closed_form(self, capsys):
        code, out, err = run(capsys, "gen", "low-rank", "--n", 4)
        assert code == EXIT_OK
        expected = (np.ones((4, 4)) + np.outer([1, 1, -1, -1], [1, 1, -1, -1])) / 4
        np.testing.assert_allclose(csv_to_matrix(out), expected, atol=1e-15)
        assert "low-rank" in err

    def test_default_seed(self, capsys):
        _, out, err = run(capsys, "gen", "coherent", "--n", 8, "--sigma", 0.1, "--matrix", "e")
        ref = build_instance(InstanceSpec("coherent", 8, 0.1, DEFAULT_SEED)).e
        assert np.array_equal(csv_to_matrix(out), ref)
        assert f"seed={DEFAULT_SEED}" in err

    def test_binary_output(self, tmp_path, capsys):
        path = tmp_path / "e.spb"
        run(capsys, "gen", "low-rank", "--n", 8, "--sigma", 0.2, "--seed", 5, "--matrix", "e", "--out", path)
        assert np.array_equal(read_matrix(path), build_instance(InstanceSpec("low-rank", 8, 0.2, 5)).e)

    def test_odd_n(self, capsys):
        code, _, err = run(capsys, "gen", "low-rank", "--n", 7)
        assert code == EXIT_ERROR and "error" in err

    def test_probe_needs_sep_family(self, capsys):
        assert run(capsys, "gen", "low-rank", "--n", 8, "--matrix", "probe")[0] == EXIT_ERROR

    def test_unknown_flag(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["gen", "low-rank", "--n", "8", "--bogus"])
        assert info.value.code == EXIT_ERROR


class TestBound:
    def test_zero_perturbation(self, low_rank_files, capsys):
        d = low_rank_files
        code, out, _ = run(capsys, "bound", d / "a.csv", d / "z.csv", "--r", 2)
        rep = json.loads(out)
        assert code == EXIT_OK and rep["total"] == 0 and rep["assumptions_ok"] is True

    def test_csv_format_and_file(self, low_rank_files, capsys):
        d = low_rank_files
        code, out, _ = run(capsys, "bound", d / "a.csv", d / "e.csv", "--r", 2, "--format", "csv",
                           "--out", d / "rep.csv")
        assert code == EXIT_OK and out == ""
        head, row = (d / "rep.csv").read_text().splitlines()
        assert head.startswith("term_quadratic,term_cross,term_submult,total,gap_used")
        assert len(row.split(",")) == len(head.split(","))

    def test_coherent_gap(self, tmp_path, capsys):
        inst = build_instance(InstanceSpec("coherent", 256, 1 / 256, 103))
        write_matrix(tmp_path / "a.spb", inst.a)
        write_matrix(tmp_path / "e.spb", inst.e)
        code, out, _ = run(capsys, "bound", tmp_path / "a.spb", tmp_path / "e.spb", "--r", 2)
        np.testing.assert_allclose(json.loads(out)["gap_used"], 2.0, atol=1e-12)
        assert code == EXIT_OK

    def test_assumptions_fail(self, low_rank_files, capsys):
        d = low_rank_files
        write_matrix(d / "big.csv", 0.3 * np.eye(16))
        code, out, err = run(capsys, "bound", d / "a.csv", d / "big.csv", "--r", 2)
        assert code == EXIT_HYPOTHESIS
        assert json.loads(out)["assumptions_ok"] is False and "assumptions fail" in err

    def test_malformed_input(self, tmp_path, capsys):
        (tmp_path / "bad.csv").write_text("2,2\n1,x\n3,4\n")
        code, out, err = run(capsys, "bound", tmp_path / "bad.csv", tmp_path / "bad.csv", "--r", 1)
        assert code == EXIT_ERROR and out == "" and "error" in err

    def test_missing_file(self, tmp_path, capsys):
        assert run(capsys, "bound", tmp_path / "no.csv", tmp_path / "no.csv", "--r", 1)[0] == EXIT_ERROR

    def test_shape_mismatch(self, low_rank_files, capsys):
        d = low_rank_files
        write_matrix(d / "small.csv", np.zeros((4, 4)))
        assert run(capsys, "bound", d / "a.csv", d / "small.csv", "--r", 2)[0] == EXIT_ERROR


class TestNewton:
    def test_zero_perturbation(self, low_rank_files, capsys):
        d = low_rank_files
        code, out, err = run(capsys, "newton", d / "a.csv", d / "z.csv", "--r", 2)
        assert code == EXIT_OK
        x = csv_to_matrix(out)
        assert x.shape == (14, 2) and np.all(x == 0)
        assert "iterations=0" in err

    def test_v1hat_output(self, low_rank_files, capsys):
        d = low_rank_files
        code, out, _ = run(capsys, "newton", d / "a.csv", d / "e.csv", "--r", 2, "--output", "v1hat")
        v = csv_to_matrix(out)
        np.testing.assert_allclose(v.T @ v, np.eye(2), atol=1e-12)

    def test_invalid_certificate(self, low_rank_files, capsys):
        d = low_rank_files
        write_matrix(d / "big.csv", 0.3 * np.eye(16))
        code, out, err = run(capsys, "newton", d / "a.csv", d / "big.csv", "--r", 2)
        assert code == EXIT_HYPOTHESIS and out == "" and "certificate" in err


class TestSep:
    @pytest.mark.parametrize("n", [4, 16, 64])
    def test_sep_example_with_probe(self, tmp_path, capsys, n):
        run(capsys, "gen", "sep-example", "--n", n, "--out", tmp_path / "a.csv")
        run(capsys, "gen", "sep-example", "--n", n, "--matrix", "probe", "--out", tmp_path / "q.csv")
        code, out, _ = run(capsys, "sep", tmp_path / "a.csv", "--r", 1, "--probe", tmp_path / "q.csv")
        d = json.loads(out)
        assert code == EXIT_OK
        # Both inequalities hold with equality in exact arithmetic (the probe
        # attains 3/sqrt(n) and sep_F is 1), so only rounding is allowed.
        assert d["sep2inf_upper"] <= 3 / np.sqrt(n) * (1 + 1e-12)
        assert d["sep2inf_lower"] >= 1 / np.sqrt(n + 1) * (1 - 1e-12)

    def test_probe_wrong_size(self, tmp_path, capsys):
        run(capsys, "gen", "sep-example", "--n", 8, "--out", tmp_path / "a.csv")
        write_matrix(tmp_path / "q.csv", np.ones((3, 1)))
        assert run(capsys, "sep", tmp_path / "a.csv", "--r", 1, "--probe", tmp_path / "q.csv")[0] == EXIT_ERROR


class TestSweep:
    def test_config_file_and_determinism(self, tmp_path, capsys):
        cfg = {"family": "low-rank", "n_values": [8, 16, 32], "trials": 2, "seed": 4,
               "sigma_rule": {"kind": "power", "value": 1.0, "scale": 1.0}}
        (tmp_path / "cfg.json").write_text(json.dumps(cfg))
        for prefix in ("one", "two"):
            code, _, err = run(capsys, "sweep", "--config", tmp_path / "cfg.json", "--out", tmp_path / prefix)
            assert code == EXIT_OK and "violations=0" in err
        a = (tmp_path / "one.csv").read_bytes()
        assert a == (tmp_path / "two.csv").read_bytes()
        assert (tmp_path / "one.json").read_bytes() == (tmp_path / "two.json").read_bytes()
        assert len(records_from_csv(a.decode())) == 6

    def test_preset_overrides(self, tmp_path, capsys):
        code, _, _ = run(capsys, "sweep", "--preset", "sep-example", "--trials", 2, "--n-list", "4,8,16",
                         "--seed", 9, "--format", "csv", "--out", tmp_path / "s")
        assert code == EXIT_OK
        assert sorted(p.name for p in tmp_path.iterdir()) == ["s.csv", "s.svg"]
        recs = records_from_csv((tmp_path / "s.csv").read_text())
        assert [r.n for r in recs] == [4, 4, 8, 8, 16, 16]

    def test_unknown_preset(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["sweep", "--preset", "fig9"])
        assert info.value.code == EXIT_ERROR

    def test_bad_config_leaves_no_files(self, tmp_path, capsys):
        (tmp_path / "cfg.json").write_text(json.dumps({"family": "low-rank", "n_values": [16, 8],
                                                       "sigma_rule": {"kind": "fixed", "value": 0}}))
        code, _, err = run(capsys, "sweep", "--config", tmp_path / "cfg.json", "--out", tmp_path / "x")
        assert code == EXIT_ERROR and "increasing" in err
        assert sorted(p.name for p in tmp_path.iterdir()) == ["cfg.json"]

    def test_needs_source(self, capsys):
        assert run(capsys, "sweep")[0] == EXIT_ERROR


class TestPlot:
    def test_plot_from_csv(self, tmp_path, capsys):
        run(capsys, "sweep", "--preset", "fig2a", "--trials", 2, "--n-list", "8,16,32",
            "--no-svg", "--out", tmp_path / "s")
        code, _, _ = run(capsys, "plot", tmp_path / "s.csv", "--columns", "err_2inf", "bound_total")
        svg = (tmp_path / "s.svg").read_text()
        assert code == EXIT_OK and svg.count("<polyline") == 2

    def test_unknown_column(self, tmp_path, capsys):
        run(capsys, "sweep", "--preset", "fig2a", "--trials", 1, "--n-list", "8,16,32",
            "--no-svg", "--out", tmp_path / "s")
        assert run(capsys, "plot", tmp_path / "s.csv", "--columns", "nope")[0] == EXIT_ERROR


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "subspace_perturb", "--version"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and __version__ in res.stdout

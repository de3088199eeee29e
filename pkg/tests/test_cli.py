"""Command-line interface: exit codes, report files, flag precedence."""

import json
import math
import os

import numpy as np
import pytest

from bellforge.cli import main
from bellforge.dataio import load_dataset, save_dataset

from conftest import dataset_from_model, random_pair_model


def _read(path):
    with open(path) as fh:
        return json.load(fh)


class TestSolve:
    def test_bell_pair_oracle_violation(self, tmp_path):
        out = tmp_path / "run"
        code = main(["solve", "--oracle", "bell_pair", "--out", str(out)])
        assert code == 10
        report = _read(out / "run_report.json")
        assert report["outcome"] == "SaturatedNonlocal"
        assert report["verdict"] == "violated"
        assert report["classical_bound"]["value"] == pytest.approx(2.0)
        assert report["quantum_value"]["value"] == pytest.approx(
            -2 * math.sqrt(2), abs=1e-9)
        # All four artifacts present.
        for name in ("dataset.json", "trace.json", "inequality.json",
                     "run_report.json"):
            assert (out / name).exists()

    def test_planted_local_dataset(self, tmp_path, rng):
        model = random_pair_model(rng, coupling_scale=0.5)
        data = dataset_from_model(model, uncertainty=1e-4)
        path = tmp_path / "data.json"
        save_dataset(data, path)
        assert main(["solve", "--data", str(path)]) == 0

    def test_theta_zero_is_local(self):
        assert main(["solve", "--oracle", "bell_pair", "--theta", "0.0"]) == 0

    def test_budget_exhaustion_inconclusive(self):
        code = main(["solve", "--oracle", "bell_pair", "--max-iters", "5"])
        assert code == 20

    def test_data_and_oracle_are_exclusive(self, tmp_path):
        path = tmp_path / "d.json"
        path.write_text("{}")
        assert main(["solve", "--data", str(path),
                     "--oracle", "bell_pair"]) >= 64

    def test_neither_source_is_usage_error(self):
        assert main(["solve"]) >= 64

    def test_missing_file(self, tmp_path):
        assert main(["solve", "--data", str(tmp_path / "nope.json")]) >= 64

    def test_corrupt_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert main(["solve", "--data", str(path)]) >= 64

    def test_config_file_supplies_defaults(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"oracle": "bell_pair", "theta": 0.0}))
        assert main(["solve", "--config", str(cfg)]) == 0

    def test_flag_overrides_config(self, tmp_path):
        # Config says the local angle; the flag forces the violating one.
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"oracle": "bell_pair", "theta": 0.0}))
        code = main(["solve", "--config", str(cfg),
                     "--theta", str(math.pi / 4)])
        assert code == 10

    def test_report_determinism(self, tmp_path):
        reports = []
        for tag in ("a", "b"):
            out = tmp_path / tag
            main(["solve", "--oracle", "bell_pair", "--seed", "7",
                  "--out", str(out)])
            r = _read(out / "run_report.json")
            del r["trace_summary"]["wall_time_s"]
            reports.append(r)
        assert reports[0] == reports[1]


class TestPbc:
    def test_report_values(self, capsys):
        assert main(["pbc", "--n-sites", "2", "--k", "4"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["classical_bound"] == pytest.approx(12.0)
        assert report["max_quantum_violation"] == pytest.approx(
            -8 * (1 + 1 / math.sqrt(2)))
        assert sorted(report["mprime_spectrum"]) == pytest.approx(
            [-math.sqrt(2), -math.sqrt(2), math.sqrt(2), math.sqrt(2)])

    def test_bruteforce_matches_formula(self, capsys):
        assert main(["pbc", "--n-sites", "2", "--k", "3",
                     "--bruteforce"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["bruteforce_minimum"] == pytest.approx(-8.0)

    def test_invalid_k(self):
        assert main(["pbc", "--n-sites", "2", "--k", "2"]) == 65


class TestWitness:
    def test_table_written(self, tmp_path):
        out = tmp_path / "curve.tsv"
        code = main(["witness", "--n-sites", "4", "--k", "4",
                     "--t-grid", "0.5:1.0:0.5", "--out", str(out)])
        assert code == 0
        lines = out.read_text().strip().split("\n")
        assert len(lines) == 3        # header + two temperatures
        assert lines[0].startswith("T\t")
        for line in lines[1:]:
            fields = line.split("\t")
            assert float(fields[1]) >= 0.0
            assert fields[4] in ("bell_nonlocal", "entangled_only", "none")

    def test_bad_grid(self):
        assert main(["witness", "--n-sites", "4", "--t-grid", "oops"]) == 64


class TestOracleCommand:
    def test_dataset_written_and_loadable(self, tmp_path):
        out = tmp_path / "dataset.json"
        code = main(["oracle", "--oracle", "bell_pair",
                     "--theta", str(math.pi / 4), "--out", str(out)])
        assert code == 0
        d = load_dataset(out)
        assert len(d.entries) == 4
        assert d.values == pytest.approx(
            [-1 / math.sqrt(2)] * 3 + [1 / math.sqrt(2)])

    def test_qhaf_needs_sites(self, tmp_path):
        assert main(["oracle", "--oracle", "qhaf",
                     "--out", str(tmp_path / "d.json")]) == 64


class TestBound:
    def test_recomputes_stored_inequality(self, tmp_path, capsys):
        # CHSH written in the dataset layout: values act as coefficients.
        code = main(["oracle", "--oracle", "bell_pair", "--theta",
                     str(math.pi / 4), "--out", str(tmp_path / "ineq.json")])
        assert code == 0
        capsys.readouterr()
        # Overwrite values with the distilled coefficients.
        obj = json.load(open(tmp_path / "ineq.json"))
        for entry, c in zip(obj["entries"], (1.0, 1.0, 1.0, -1.0)):
            entry["value"] = c
        json.dump(obj, open(tmp_path / "ineq.json", "w"))
        assert main(["bound", "--data", str(tmp_path / "ineq.json")]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["classical_bound"] == pytest.approx(2.0)
        assert report["certified"]


class TestUsage:
    def test_unknown_command(self):
        assert main(["frobnicate"]) >= 64

    def test_help_exits_zero(self):
        assert main(["--help"]) == 0

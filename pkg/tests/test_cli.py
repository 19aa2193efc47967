"""Tests for the command-line interface and its exit codes."""

import json

import numpy as np

from hdsplit.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main
from hdsplit.harness import write_group_csv
from hdsplit.model import StudyDesign, ar, sample


def _dataset_manifest(tmp_path, sizes=(8, 9), dims=(2, 2), seed=31):
    design = StudyDesign(dims=dims, sizes=sizes)
    covs = tuple(ar(d, 0.4) for d in dims)
    data = sample(design, None, covs, np.random.default_rng(seed))
    names = []
    for i, group in enumerate(data.groups):
        name = f"group{i + 1}.csv"
        write_group_csv(str(tmp_path / name), group)
        names.append(name)
    manifest = tmp_path / "manifest.txt"
    manifest.write_text("\n".join(names) + "\n", encoding="utf-8")
    return str(manifest)


def _simulation_config(tmp_path, output=None):
    lines = [
        'scenario = "B"',
        "replications = 12",
        "master_seed = 2024",
        "sizes = [[6, 7]]",
        "d_grid = [10]",
        'split = "semi"',
        "split_value = 5",
        'flavors = ["oracle"]',
    ]
    if output:
        lines.append(f'output = "{output}"')
    path = tmp_path / "exp.toml"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


class TestSimulate:
    def test_writes_csv_and_reports(self, tmp_path, capsys):
        out = tmp_path / "rates.csv"
        config = _simulation_config(tmp_path, output=str(out))
        assert main(["simulate", "--config", config, "--quiet"]) == EXIT_OK
        captured = capsys.readouterr()
        assert "wrote 3 rows" in captured.out
        assert captured.err == ""
        header = out.read_text(encoding="utf-8").splitlines()[0]
        assert header.startswith("scenario,D,d1,d2,n1,n2,flavor,rule,")

    def test_prints_rates_without_output_path(self, tmp_path, capsys):
        config = _simulation_config(tmp_path)
        assert main(["simulate", "--config", config, "--quiet"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "oracle/kf" in out

    def test_progress_goes_to_stderr(self, tmp_path, capsys):
        config = _simulation_config(tmp_path)
        assert main(["simulate", "--config", config]) == EXIT_OK
        assert "done in" in capsys.readouterr().err

    def test_bad_config_key_is_usage_error(self, tmp_path, capsys):
        path = tmp_path / "bad.toml"
        path.write_text(
            'scenario = "B"\nreplications = 5\nmaster_seed = 1\n'
            "sizes = [[6, 6]]\nd_grid = [10]\nsplit = \"semi\"\nbogus = 1\n",
            encoding="utf-8",
        )
        assert main(["simulate", "--config", str(path)]) == EXIT_USAGE
        assert "unknown" in capsys.readouterr().err


class TestTestCommand:
    def test_reports_decisions(self, tmp_path, capsys):
        manifest = _dataset_manifest(tmp_path)
        code = main(
            ["test", "--data", manifest, "--hypothesis", "B",
             "--flavor", "B", "--seed", "4"]
        )
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "statistic W" in out
        assert "rule    z" in out

    def test_json_record(self, tmp_path):
        manifest = _dataset_manifest(tmp_path)
        record_path = tmp_path / "report.json"
        code = main(
            ["test", "--data", manifest, "--hypothesis", "B",
             "--flavor", "B", "--seed", "4", "--json", str(record_path)]
        )
        assert code == EXIT_OK
        record = json.loads(record_path.read_text(encoding="utf-8"))
        assert record["flavor"] == "B"
        assert record["dims"] == [2, 2]
        assert set(record["decisions"]) <= {"z", "chi1", "kf"}

    def test_ragged_data_is_a_data_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("1.0,2.0\n3.0\n4.0,5.0\n", encoding="utf-8")
        manifest = tmp_path / "manifest.txt"
        manifest.write_text("bad.csv\n", encoding="utf-8")
        code = main(["test", "--data", str(manifest), "--hypothesis", "B"])
        assert code == EXIT_DATA
        assert "line 2" in capsys.readouterr().err

    def test_rejected_hypothesis_matrix_is_numeric_error(self, tmp_path, capsys):
        manifest = _dataset_manifest(tmp_path, dims=(1, 1))
        ones = tmp_path / "ones.csv"
        ones.write_text("1.0,1.0\n1.0,1.0\n", encoding="utf-8")
        code = main(["test", "--data", manifest, "--hypothesis", str(ones)])
        assert code == EXIT_NUMERIC
        assert "rejected" in capsys.readouterr().err


class TestValidateCommand:
    def test_projection_passes(self, tmp_path, capsys):
        path = tmp_path / "proj.csv"
        path.write_text("0.5,-0.5\n-0.5,0.5\n", encoding="utf-8")
        assert main(["validate", "--hypothesis", str(path)]) == EXIT_OK
        assert "pass" in capsys.readouterr().out

    def test_idempotence_failure(self, tmp_path, capsys):
        path = tmp_path / "ones.csv"
        path.write_text("1.0,1.0\n1.0,1.0\n", encoding="utf-8")
        assert main(["validate", "--hypothesis", str(path)]) == EXIT_NUMERIC
        assert "FAIL" in capsys.readouterr().out

    def test_non_square_matrix(self, tmp_path, capsys):
        path = tmp_path / "wide.csv"
        path.write_text("1.0,0.0,0.0\n0.0,1.0,0.0\n", encoding="utf-8")
        assert main(["validate", "--hypothesis", str(path)]) == EXIT_NUMERIC
        assert "not square" in capsys.readouterr().err

    def test_missing_file_is_usage_error(self, tmp_path):
        assert main(["validate", "--hypothesis", str(tmp_path / "nope.csv")]) == EXIT_USAGE

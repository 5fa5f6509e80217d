import csv
import json
import os

import pytest
from click.testing import CliRunner

from strataml.cli import main
from strataml.data import load_csv


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def data_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "blobs.csv"
    result = CliRunner().invoke(
        main,
        [
            "gen-data",
            "--kind", "blobs",
            "--n", "400",
            "--features", "5",
            "--classes", "2",
            "--cluster-std", "2.0",
            "--seed", "3",
            "--out", str(path),
        ],
    )
    assert result.exit_code == 0, result.output
    return str(path)


def test_gen_data_csv_loads(data_csv):
    ds = load_csv(data_csv, "label")
    assert ds.n == 400
    assert ds.n_features == 5
    assert ds.n_classes == 2


def test_gen_data_xor(runner, tmp_path):
    out = tmp_path / "xor.csv"
    result = runner.invoke(
        main,
        ["gen-data", "--kind", "xor", "--n", "200", "--features", "4",
         "--label-noise", "0.05", "--rotation", "0.5", "--seed", "1", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    ds = load_csv(str(out), "label")
    assert ds.n_classes == 2


def run_search(runner, data_csv, out_dir, *extra):
    args = [
        "run",
        "--data", data_csv,
        "--seed", "7",
        "--out", str(out_dir),
        "--layers", "4",
        "--g", "2",
        "--pop", "8",
        "--k", "4",
        "--budget-generations", "8",
    ]
    args.extend(extra)
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    return result


def test_run_writes_trace_and_summary(runner, data_csv, tmp_path):
    result = run_search(runner, data_csv, tmp_path)
    summary = json.loads(result.output.strip().splitlines()[0])
    for key in ("best_pipeline", "score", "auroc", "length", "total_evaluations", "wall_seconds"):
        assert key in summary
    trace_files = [f for f in os.listdir(tmp_path) if f.startswith("trace-")]
    assert len(trace_files) == 1
    lines = (tmp_path / trace_files[0]).read_text().strip().splitlines()
    meta = json.loads(lines[0])
    assert meta["type"] == "meta" and meta["method"] == "layered-g2"
    assert any(json.loads(line)["type"] == "eval" for line in lines[1:])


def test_run_layers_one_equals_baseline(runner, data_csv, tmp_path):
    dir_a = tmp_path / "a"
    dir_b = tmp_path / "b"
    args = ["--data", data_csv, "--seed", "5", "--pop", "6", "--budget-generations", "3"]
    res_a = runner.invoke(main, ["run", "--layers", "1", "--g", "2", "--out", str(dir_a)] + args)
    res_b = runner.invoke(main, ["baseline", "--out", str(dir_b)] + args)
    assert res_a.exit_code == 0, res_a.output
    assert res_b.exit_code == 0, res_b.output
    trace_a = next(f for f in os.listdir(dir_a) if f.startswith("trace-"))
    trace_b = next(f for f in os.listdir(dir_b) if f.startswith("trace-"))
    assert (dir_a / trace_a).read_bytes() == (dir_b / trace_b).read_bytes()


def test_random_command(runner, data_csv, tmp_path):
    result = runner.invoke(
        main,
        ["random", "--data", data_csv, "--seed", "2", "--pop", "10",
         "--budget-generations", "1", "--out", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    summary = json.loads(result.output.strip().splitlines()[0])
    assert summary["total_evaluations"] == 10


def test_conflicting_budgets_rejected(runner, data_csv, tmp_path):
    result = runner.invoke(
        main,
        ["run", "--data", data_csv, "--budget-generations", "8",
         "--budget-seconds", "9", "--out", str(tmp_path)],
    )
    assert result.exit_code != 0


def test_missing_dataset_rejected(runner, tmp_path):
    result = runner.invoke(main, ["run", "--data", str(tmp_path / "nope.csv")])
    assert result.exit_code != 0


def test_invalid_config_rejected(runner, data_csv, tmp_path):
    result = runner.invoke(
        main,
        ["run", "--data", data_csv, "--layers", "4", "--g", "4",
         "--budget-generations", "4", "--out", str(tmp_path)],
    )
    assert result.exit_code != 0
    assert "never be reached" in result.output


def test_config_file_with_flag_overrides(runner, data_csv, tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(
        json.dumps(
            {
                "sample_sizes": [50, 100, 200, 400],
                "g": 2,
                "population_size": 6,
                "transfer_count": 3,
                "folds": 3,
                "eval_timeout": None,
                "crossover_prob": 0.1,
                "mutation_prob": 0.9,
                "seed": 1,
                "budget_generations": 8,
                "budget_seconds": None,
                "workers": 1,
                "method": "from-config",
            }
        )
    )
    result = runner.invoke(
        main,
        ["run", "--data", data_csv, "--config", str(cfg_path),
         "--seed", "9", "--out", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    summary = json.loads(result.output.strip().splitlines()[0])
    assert summary["seed"] == 9  # explicit flag beats the config document
    assert summary["method"] == "from-config"


def test_rank_and_equivalence_commands(runner, data_csv, tmp_path):
    for seed in ("1", "2"):
        for cmd, extra in (
            ("run", ["--layers", "4", "--g", "2"]),
            ("baseline", []),
        ):
            result = runner.invoke(
                main,
                [cmd, "--data", data_csv, "--seed", seed, "--pop", "8", "--k", "4",
                 "--budget-generations", "8", "--out", str(tmp_path)] + extra,
            )
            assert result.exit_code == 0, result.output
    traces = sorted(str(tmp_path / f) for f in os.listdir(tmp_path) if f.startswith("trace-"))
    assert len(traces) == 4

    rank_out = tmp_path / "rank.csv"
    result = runner.invoke(
        main,
        ["rank", "--tie-threshold", "0.1", "--interval-secs", "60", "--out", str(rank_out)]
        + [arg for t in traces for arg in ("--traces", t)],
    )
    assert result.exit_code == 0, result.output
    with open(rank_out) as fh:
        rows = list(csv.DictReader(fh))
    assert rows
    by_time = {}
    for row in rows:
        by_time.setdefault(row["time_min"], []).append(float(row["avg_rank"]))
    for ranks in by_time.values():
        assert sum(ranks) == pytest.approx(len(ranks) * (len(ranks) + 1) / 2)

    eq_out = tmp_path / "equivalence.csv"
    result = runner.invoke(
        main,
        ["equivalence", "--out", str(eq_out)]
        + [arg for t in traces for arg in ("--traces", t)],
    )
    assert result.exit_code == 0, result.output
    with open(eq_out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2  # one row per (dataset, seed)
    assert set(rows[0]) == {"dataset", "seed", "winner", "t_min", "delta_t_min", "loser_auroc_at_t"}


def test_correlate_command(runner, data_csv, tmp_path):
    out = tmp_path / "correlation.csv"
    result = runner.invoke(
        main,
        ["correlate", "--data", data_csv, "--pipelines", "5", "--repeats", "2",
         "--folds", "3", "--fractions", "0.5,0.25", "--seed", "4", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    assert {row["fraction"] for row in rows} == {"0.5", "0.25"}

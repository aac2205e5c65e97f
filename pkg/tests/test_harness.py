import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

# Add parent directory to path for imports
sys.path.append(str(Path(__file__).parent.parent))

from config import CSV_SCHEMA_HEADER, EXIT_CONFIG_ERROR, EXIT_DIVERGED, EXIT_OK, METRICS_FILENAME, SUMMARY_FILENAME
from core.precision import NumericFormat
from core.structured import StructureKind
from langgraph_workflow import build_training_graph, run_training
from main import main
from models.problems import build_problem
from models.tasks import kronecker_quadratic_optimum
from optimizers.state import init_layer_state
from utils.config_utils import OptimizerConfig, RunConfig, StructureSpec, config_from_text
from utils.errors import ConfigError
from utils.file_utils import read_metrics_csv
from utils.memory_utils import ALL_OPTIMIZERS, layer_memory_items, memory_report, memory_totals, state_scalar_count
from utils.metrics_utils import RECORD_COLUMNS, evaluation_error
from utils.schedule_utils import get_schedule
from utils.verification_utils import STRUCTURE_SPECS

QUADRATIC_CONFIG = """
# small quadratic run
run.steps = 30
run.eval_interval = 10
run.seed = 3
task.kind = kronecker_quadratic
task.d_in = 4
task.d_out = 3
task.condition = 100
optimizer.name = singd
optimizer.beta1 = 0.1
optimizer.beta2 = 0.2
optimizer.lambda = 1e-4
optimizer.structure_K = tril
"""

BLOBS_CONFIG = """
run.steps = 25
run.batch_size = 16
run.eval_interval = 10
task.kind = gaussian_blobs_classification
task.n_samples = 120
model.hidden = 8
optimizer.name = {name}
"""


def _write(tmp_path, text, name="run.cfg") -> str:
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


# Configuration


def test_config_parses_sections_and_aliases():
    config = config_from_text(QUADRATIC_CONFIG + "model.hidden = 16, 8\nprecision.preset = bf16\n")
    assert config.steps == 30 and config.seed == 3
    assert config.optimizer.damping == 1e-4
    assert config.optimizer.structure_k.kind == StructureKind.TRIL
    assert config.optimizer.structure_c.kind == StructureKind.DENSE
    assert config.optimizer.precision.storage == NumericFormat.BF16
    assert config.model.hidden == (16, 8)


def test_structure_spec_parsing_and_clamping():
    spec = StructureSpec.model_validate("block_diagonal(k=4)")
    assert (spec.kind, spec.k) == (StructureKind.BLOCK_DIAGONAL, 4)
    assert spec.bind(3).k == 3
    hierarchical = StructureSpec.model_validate("hierarchical(d2=2, d3=1)").bind(6)
    assert (hierarchical.d2, hierarchical.d3) == (2, 1)
    assert StructureSpec.model_validate("rank_k_triu(k=2)").label() == "rank_k_triu(k=2)"


@pytest.mark.parametrize(
    "text, line, key",
    [
        ("run.steps = 5\njust some words\n", 2, None),
        ("run.steps = 5\nrun.steps = 6\n", 2, "run.steps"),
        ("network.width = 4\n", 1, "network.width"),
        ("steps = 4\n", 1, "steps"),
        ("run.steps = 5\n\noptimizer.beta1 = 2\n", 3, "optimizer.beta1"),
        ("optimizer.lambda = -1\n", 1, "optimizer.lambda"),
        ("optimizer.colour = blue\n", 1, "optimizer.colour"),
        ("precision.preset = fp8\n", 1, "precision.preset"),
        ("optimizer.structure_K = pentadiagonal\n", 1, "optimizer.structure_K"),
        ("task.kind = csv_classification\n", None, "task"),
    ],
)
def test_config_errors_carry_line_and_key(text, line, key):
    with pytest.raises(ConfigError) as excinfo:
        config_from_text(text)
    assert excinfo.value.line == line
    assert excinfo.value.key == key


def test_seed_override(monkeypatch):
    monkeypatch.setenv("SINGD_SEED", "42")
    assert config_from_text(QUADRATIC_CONFIG).seed == 42
    monkeypatch.setenv("SINGD_SEED", "forty-two")
    with pytest.raises(ConfigError) as excinfo:
        config_from_text(QUADRATIC_CONFIG)
    assert excinfo.value.key == "SINGD_SEED"


def test_schedules():
    constant = get_schedule(RunConfig(steps=10))
    assert constant(7) == 1.0
    cosine = get_schedule(RunConfig(steps=10, schedule="cosine"))
    assert cosine(0) == pytest.approx(1.0) and cosine(5) == pytest.approx(0.5)
    step = get_schedule(RunConfig(schedule="step", schedule_interval=4, schedule_factor=0.5))
    assert [step(t) for t in (0, 3, 4, 8)] == [1.0, 1.0, 0.5, 0.25]


# Memory accounting


@pytest.mark.parametrize("name", ALL_OPTIMIZERS)
@pytest.mark.parametrize("text", STRUCTURE_SPECS)
def test_memory_report_matches_initialized_state(name, text):
    spec = StructureSpec.model_validate(text)
    cfg = OptimizerConfig(name=name, structure_K=spec, structure_C=spec)
    for d_out, d_in in [(3, 4), (4, 3), (7, 7), (16, 7)]:
        expected = sum(count for _, count in layer_memory_items(name, cfg, d_out, d_in))
        assert expected == state_scalar_count(init_layer_state(name, cfg, d_out, d_in))


def test_memory_report_examples():
    cfg = OptimizerConfig(name="singd", structure_K="diagonal", structure_C="diagonal")
    totals = memory_totals(memory_report([(10, 10)], cfg, ["adamw", "singd"])).set_index("optimizer")
    assert totals.loc["adamw", "factor"] == 100
    assert totals.loc["adamw", "momentum"] == 100
    assert totals.loc["singd", "factor"] == 20
    assert totals.loc["singd", "momentum"] == 20 + 100

    wide = memory_totals(memory_report([(64, 64)], cfg)).set_index("optimizer")
    assert wide.loc["singd", "factor"] == 2 * 64


def test_memory_report_columns():
    report = memory_report([(3, 5), (2, 4)], OptimizerConfig(name="kfac"))
    assert list(report.columns) == ["optimizer", "layer", "d_out", "d_in", "item", "count"]
    assert report[report["item"] == "S_K"]["count"].tolist() == [25, 16]


# Training pipeline


def test_quadratic_run_writes_reproducible_outputs(tmp_path):
    config = config_from_text(QUADRATIC_CONFIG)
    first = run_training(config, output_dir=str(tmp_path / "first"))
    second = run_training(config, output_dir=str(tmp_path / "second"))
    assert first["status"] == second["status"] == "completed"

    first_csv = (tmp_path / "first" / METRICS_FILENAME).read_bytes()
    assert first_csv == (tmp_path / "second" / METRICS_FILENAME).read_bytes()
    assert first_csv.decode("utf-8").splitlines()[0] == CSV_SCHEMA_HEADER

    frame = read_metrics_csv(str(tmp_path / "first" / METRICS_FILENAME))
    assert list(frame.columns) == RECORD_COLUMNS
    assert frame["step"].tolist() == [0, 10, 20, 29]
    assert frame["train_loss"].iloc[-1] < frame["train_loss"].iloc[0]
    assert frame["nonfinite_flag"].sum() == 0

    summary = json.loads((tmp_path / "first" / SUMMARY_FILENAME).read_text(encoding="utf-8"))
    assert summary["status"] == "completed"
    assert summary["optimizer"]["name"] == "singd"
    assert summary["metadata"]["steps_run"] == 30


def test_timing_column_is_opt_in(tmp_path):
    config = config_from_text(QUADRATIC_CONFIG + "output.timing = true\n")
    run_training(config, output_dir=str(tmp_path))
    frame = read_metrics_csv(str(tmp_path / METRICS_FILENAME))
    assert list(frame.columns) == RECORD_COLUMNS + ["wall_ms"]


@pytest.mark.parametrize("name", ALL_OPTIMIZERS)
def test_every_optimizer_trains_an_mlp(tmp_path, name):
    config = config_from_text(BLOBS_CONFIG.format(name=name))
    result = run_training(config, output_dir=str(tmp_path))
    assert result["status"] == "completed"
    assert [r["step"] for r in result["records"]] == [0, 10, 20, 24]
    assert all(np.isfinite(r["train_loss"]) for r in result["records"])
    assert len(result["weights"]) == 2


def test_sgd_learns_the_blobs(tmp_path):
    config = config_from_text(BLOBS_CONFIG.format(name="sgd").replace("run.steps = 25", "run.steps = 150"))
    result = run_training(config, output_dir=str(tmp_path))
    assert result["records"][-1]["test_error"] < 0.5


def test_kfac_under_bf16_records_instability(tmp_path):
    config = config_from_text(
        "run.steps = 500\nrun.eval_interval = 50\n"
        "task.kind = kronecker_quadratic\ntask.condition = 1e6\n"
        "optimizer.name = kfac\noptimizer.beta1 = 0.1\noptimizer.lambda = 1e-6\n"
        "precision.preset = bf16\n"
    )
    result = run_training(config, output_dir=str(tmp_path))
    flagged = any(r["nonfinite_flag"] for r in result["records"])
    residual = result["metadata"]["max_preconditioner_residual"]
    assert flagged or result["errors"] or residual > 0.1


def test_missing_dataset_fails_before_training(tmp_path):
    config = config_from_text(f"task.kind = csv_classification\ntask.path = {tmp_path / 'missing.csv'}\n")
    result = run_training(config, output_dir=str(tmp_path / "out"))
    assert result["status"] == "failed"
    assert result["errors"]
    assert not (tmp_path / "out" / METRICS_FILENAME).exists()


def test_quadratic_optimum_is_computed_once(monkeypatch):
    problem = build_problem(config_from_text(QUADRATIC_CONFIG))
    assert np.allclose(problem.optimum, kronecker_quadratic_optimum(problem.quadratic))

    def fail(task):
        raise AssertionError("optimum recomputed")

    monkeypatch.setattr("models.tasks.kronecker_quadratic_optimum", fail)
    assert evaluation_error(problem, [problem.optimum]) == 0.0
    assert evaluation_error(problem, [2.0 * problem.optimum]) == pytest.approx(1.0)


def test_graph_compiles():
    graph = build_training_graph()
    assert graph is not None


# Command line


def test_cli_train_and_exit_codes(tmp_path):
    path = _write(tmp_path, QUADRATIC_CONFIG)
    assert main(["train", "--config", path, "--out", str(tmp_path / "run")]) == EXIT_OK
    assert (tmp_path / "run" / METRICS_FILENAME).exists()

    bad = _write(tmp_path, "optimizer.beta1 = nope\n", "bad.cfg")
    assert main(["train", "--config", bad]) == EXIT_CONFIG_ERROR

    diverging = _write(
        tmp_path,
        QUADRATIC_CONFIG.replace("optimizer.name = singd", "optimizer.name = sgd").replace(
            "optimizer.beta2 = 0.2", "optimizer.beta2 = 1e10"
        ),
        "diverging.cfg",
    )
    assert main(["train", "--config", diverging, "--out", str(tmp_path / "diverged")]) == EXIT_DIVERGED
    frame = read_metrics_csv(str(tmp_path / "diverged" / METRICS_FILENAME))
    assert frame["nonfinite_flag"].iloc[-1] == 1


def test_cli_verify_prints_report(capsys):
    assert main(["verify", "--suite", "projections"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "suite\tproperty\tmeasured\tbound\tpassed"
    assert all(line.endswith("True") for line in lines[1:])


def test_cli_bench(capsys):
    assert main(["bench", "--structure", "diagonal", "--dims", "8,16", "--repeats", "1"]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0].split("\t") == ["structure", "dim", "storage", "median_ms", "ratio"]
    assert len(out) == 3


def test_cli_report_memory(tmp_path, capsys):
    path = _write(tmp_path, QUADRATIC_CONFIG)
    assert main(["report-memory", "--config", path, "--all"]) == EXIT_OK
    out = capsys.readouterr().out
    for name in ALL_OPTIMIZERS:
        assert name in out

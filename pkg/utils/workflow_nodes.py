import logging
import time
from typing import Dict, Any, List

import numpy as np
from tqdm import tqdm

from config import METRICS_FILENAME, SUMMARY_FILENAME
from core.curvature import linear_layer_curvature
from models.datasets import iterate_minibatches
from models.mlp import forward_backward
from models.problems import build_problem
from models.tasks import kronecker_quadratic_eval
from optimizers.kfac import preconditioner_residual
from optimizers.state import init_layer_state
from optimizers.step import optimizer_step, precondition_due
from utils.errors import SingdKitError
from utils.file_utils import ensure_output_directory, save_json_data, write_metrics_csv
from utils.memory_utils import memory_report, memory_totals
from utils.metrics_utils import TrainRecord, combined_factor_norms, evaluation_error, grad_norm, records_to_frame
from utils.response_utils import create_run_summary
from utils.schedule_utils import get_schedule
from utils.state_utils import RunState, set_state_error, update_state_metadata

logger = logging.getLogger(__name__)


def prepare_run(state: RunState) -> Dict[str, Any]:
    """Build the problem, initial weights and optimizer states

    Args:
        state: Current pipeline state

    Returns:
        State update with the artifacts and layer metadata
    """
    cfg = state["config"]
    try:
        problem = build_problem(cfg)
    except (SingdKitError, OSError, ValueError) as e:
        return set_state_error(state, f"Could not build problem: {e}")

    policy = cfg.optimizer.precision
    if problem.quadratic is not None:
        rng = np.random.default_rng(cfg.seed + 3)
        weights = [rng.normal(size=problem.quadratic.shape)]
    else:
        weights = list(problem.model.weights)
    weights = [policy.store(w, "parameters") for w in weights]
    states = [
        init_layer_state(cfg.optimizer.name, cfg.optimizer, d_out, d_in)
        for d_out, d_in in problem.layer_shapes
    ]

    report = memory_report(problem.layer_shapes, cfg.optimizer)
    update = update_state_metadata(
        state,
        {
            "layer_shapes": [list(shape) for shape in problem.layer_shapes],
            "memory": memory_totals(report).to_dict(orient="records"),
        },
    )
    logger.info(
        f"Prepared {cfg.optimizer.name} run on {problem.kind} "
        f"with {len(states)} layer(s)"
    )
    update.update(
        {
            "artifacts": {"problem": problem, "weights": weights, "states": states},
            "status": "prepared",
        }
    )
    return update


def _one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros((labels.shape[0], n_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def train_model(state: RunState) -> Dict[str, Any]:
    """Run the training loop and collect one record per evaluation

    A run whose loss, gradients, weights or optimizer state turn non-finite
    stops early; a singular KFAC inversion is recorded and the run goes on.
    Either marks the run diverged.

    Args:
        state: Pipeline state carrying the prepared artifacts

    Returns:
        State update with records, events, status and metadata
    """
    cfg = state["config"]
    opt_cfg = cfg.optimizer
    problem = state["artifacts"]["problem"]
    weights = list(state["artifacts"]["weights"])
    states = list(state["artifacts"]["states"])
    schedule = get_schedule(cfg)

    events: List[str] = list(state.get("errors", []))
    records: List[Dict[str, Any]] = []
    diverged = False
    max_residual = 0.0
    batches = None
    if problem.quadratic is None:
        batches = iterate_minibatches(problem.train_x.shape[0], cfg.batch_size, seed=cfg.seed + 4)
        n_classes = problem.model.weights[-1].shape[0]

    start = time.perf_counter()
    progress = tqdm(
        range(cfg.steps),
        desc=f"{opt_cfg.name}",
        disable=not cfg.output.progress,
        leave=False,
    )
    for t in progress:
        if problem.quadratic is not None:
            evaluation = kronecker_quadratic_eval(problem.quadratic, np.asarray(weights[0], dtype=np.float64))
            loss, grads = evaluation.loss, [evaluation.grad]
            curvatures = [evaluation.curvature]
            nonfinite = not np.isfinite(loss) or not np.all(np.isfinite(evaluation.grad))
        else:
            index = next(batches)
            model = problem.model.with_weights([np.asarray(w, dtype=np.float64) for w in weights])
            targets = problem.train_y[index]
            if cfg.model.loss == "mse":
                targets = _one_hot(targets, n_classes)
            result = forward_backward(model, problem.train_x[index], targets, cfg.model.loss)
            loss, nonfinite = result.loss, result.nonfinite
            grads = [hooks.grad for hooks in result.layers]
            curvatures = [
                linear_layer_curvature(hooks.inputs, hooks.out_grads)
                if precondition_due(layer_state, opt_cfg)
                else None
                for hooks, layer_state in zip(result.layers, states)
            ]

        norm = grad_norm(grads)
        if not nonfinite:
            lr_scale = schedule(t)
            for i in range(len(states)):
                outcome = optimizer_step(states[i], grads[i], weights[i], curvatures[i], opt_cfg, lr_scale)
                states[i], weights[i] = outcome.state, outcome.weights
                events.extend(f"layer {i}: {event}" for event in outcome.events)
            if opt_cfg.name == "kfac":
                residual = max(preconditioner_residual(s, opt_cfg) for s in states)
                if np.isfinite(residual):
                    max_residual = max(max_residual, residual)
            nonfinite = any(not np.all(np.isfinite(w)) for w in weights)
        else:
            events.append(f"step {t}: non-finite loss or gradient")

        diverged = diverged or nonfinite or any(s.diverged for s in states)
        if nonfinite or t % cfg.eval_interval == 0 or t == cfg.steps - 1:
            norm_K, norm_C = combined_factor_norms(states)
            record = TrainRecord(
                step=t,
                train_loss=float(loss),
                test_error=float(evaluation_error(problem, weights)),
                grad_norm=float(norm),
                factor_norm_K=float(norm_K),
                factor_norm_C=float(norm_C),
                nonfinite_flag=int(nonfinite),
                wall_ms=round(1000.0 * (time.perf_counter() - start), 3),
            )
            records.append(record.as_row())
            progress.set_postfix(loss=f"{loss:.4g}")
        if nonfinite:
            logger.warning(f"Stopping at step {t}: non-finite values")
            break
    progress.close()

    wall_seconds = time.perf_counter() - start
    status = "diverged" if diverged else "completed"
    logger.info(f"Training finished with status {status} after {len(records)} record(s)")
    update = update_state_metadata(
        state,
        {
            "steps_run": t + 1,
            "wall_seconds": round(wall_seconds, 6),
            "max_preconditioner_residual": max_residual if opt_cfg.name == "kfac" else None,
        },
    )
    update.update(
        {
            "artifacts": {"problem": problem, "weights": weights, "states": states},
            "records": records,
            "errors": events,
            "status": status,
        }
    )
    return update


def write_outputs(state: RunState) -> Dict[str, Any]:
    """Write metrics.csv and summary.json into the run directory

    Args:
        state: Pipeline state after training

    Returns:
        State update with the written paths in metadata
    """
    cfg = state["config"]
    try:
        directory = ensure_output_directory(state["output_dir"])
        frame = records_to_frame(state["records"], timing=cfg.output.timing)
        metrics_path = write_metrics_csv(frame, directory, METRICS_FILENAME)
        summary = create_run_summary(state)
        summary_path = save_json_data(summary, directory, SUMMARY_FILENAME)
    except OSError as e:
        return set_state_error(state, f"Could not write outputs: {e}")
    return update_state_metadata(
        state, {"metrics_file": metrics_path, "summary_file": summary_path}
    )

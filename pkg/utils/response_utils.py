import logging
from typing import Dict, Any, List

from utils.file_utils import get_timestamp

logger = logging.getLogger(__name__)


def create_run_summary(state) -> Dict[str, Any]:
    """Create the summary written next to the metrics of a run

    Args:
        state: Pipeline state after training

    Returns:
        Summary dictionary: status, events, final metrics and metadata
    """
    cfg = state["config"]
    records: List[Dict[str, Any]] = state.get("records", [])
    metadata = state.get("metadata", {})
    final = dict(records[-1]) if records else {}
    if not cfg.output.timing:
        final.pop("wall_ms", None)

    summary = {
        "status": state.get("status", "unknown"),
        "optimizer": cfg.optimizer.model_dump(mode="json"),
        "task": cfg.task.model_dump(mode="json"),
        "model": cfg.model.model_dump(mode="json"),
        "steps": cfg.steps,
        "seed": cfg.seed,
        "final": final,
        "events": list(state.get("errors", [])),
        "metadata": {
            "start_time": metadata.get("start_time", ""),
            "end_time": get_timestamp(),
            "steps_run": metadata.get("steps_run", 0),
            "wall_seconds": metadata.get("wall_seconds"),
            "layer_shapes": metadata.get("layer_shapes", []),
            "memory": metadata.get("memory", []),
            "max_preconditioner_residual": metadata.get("max_preconditioner_residual"),
        },
    }
    return summary

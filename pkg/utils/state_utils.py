from typing import Dict, Any, List, TypedDict
import logging
from utils.file_utils import get_timestamp

logger = logging.getLogger(__name__)


class RunState(TypedDict):
    """TypedDict defining the structure of the training pipeline state"""

    config: Any  # RunConfig
    output_dir: str
    artifacts: Dict[str, Any]  # problem, weights and optimizer states, in memory only
    records: List[Dict[str, Any]]  # one per evaluation
    errors: List[str]  # recorded step events and failures
    status: str
    metadata: Dict[str, Any]


def create_initial_state(config, output_dir: str) -> RunState:
    """Create and return an initial state for the training pipeline

    Args:
        config: Validated RunConfig
        output_dir: Directory the run writes its files to

    Returns:
        Initial pipeline state with default values
    """
    return RunState(
        config=config,
        output_dir=output_dir,
        artifacts={},
        records=[],
        errors=[],
        status="started",
        metadata={
            "start_time": get_timestamp(),
            "optimizer": config.optimizer.name,
            "task": config.task.kind,
            "seed": config.seed,
        },
    )


def update_state_metadata(
    state: RunState, metadata_updates: Dict[str, Any]
) -> Dict[str, Any]:
    """Merge metadata updates into a copy of the state's metadata

    Args:
        state: Current pipeline state
        metadata_updates: Dictionary of metadata to update

    Returns:
        State update carrying the merged metadata
    """
    metadata = dict(state.get("metadata", {}))
    metadata.update(metadata_updates)
    return {"metadata": metadata}


def set_state_error(state: RunState, error_message: str) -> Dict[str, Any]:
    """Record an error and mark the run failed

    Args:
        state: Current pipeline state
        error_message: Error message to add

    Returns:
        State update with the error appended and status failed
    """
    logger.error(error_message)
    return {"errors": list(state.get("errors", [])) + [error_message], "status": "failed"}

"""
LangGraph Workflow for Optimizer Training Runs

This module defines and executes a training run as a directed graph of
processing steps: prepare the problem, train, write the outputs.
"""

import logging
import os
from typing import Any, Dict, Optional

from langgraph.graph import StateGraph, END

logger = logging.getLogger(__name__)

# Import from utils
from utils.file_utils import get_timestamp
from utils.state_utils import RunState, create_initial_state
from utils.workflow_nodes import prepare_run, train_model, write_outputs


def _after_prepare(state: RunState) -> str:
    return END if state["status"] == "failed" else "train_model"


def build_training_graph():
    """Compile the prepare -> train -> write pipeline"""
    workflow = StateGraph(RunState)

    # Add nodes
    workflow.add_node("prepare_run", prepare_run)
    workflow.add_node("train_model", train_model)
    workflow.add_node("write_outputs", write_outputs)

    # Define edges
    workflow.set_entry_point("prepare_run")
    workflow.add_conditional_edges(
        "prepare_run", _after_prepare, {"train_model": "train_model", END: END}
    )
    workflow.add_edge("train_model", "write_outputs")
    workflow.add_edge("write_outputs", END)

    return workflow.compile()


def run_training(config, output_dir: Optional[str] = None) -> Dict[str, Any]:
    """
    Run one seeded training run through the pipeline graph

    Args:
        config: Validated RunConfig
        output_dir: Directory for metrics.csv and summary.json; defaults to
            a timestamped directory under output.dir

    Returns:
        Dictionary with status, records, events and metadata of the run
    """
    if output_dir is None:
        output_dir = os.path.join(
            config.output.dir, f"{config.optimizer.name}_{get_timestamp()}"
        )

    initial_state = create_initial_state(config, output_dir)
    graph = build_training_graph()
    logger.info(f"Starting training run, writing to {output_dir}")
    final_state = graph.invoke(initial_state)
    logger.info(f"Training run completed with status: {final_state['status']}")

    return {
        "status": final_state["status"],
        "output_dir": output_dir,
        "records": final_state.get("records", []),
        "errors": final_state.get("errors", []),
        "metadata": final_state.get("metadata", {}),
        "weights": final_state.get("artifacts", {}).get("weights", []),
    }

"""
Stored-scalar accounting per layer and optimizer.

Counts are derived from shapes and structures only, so they can be produced
without running anything; the tests check them against the sizes of freshly
initialized optimizer states.
"""

import logging
from typing import Iterable, List, Optional, Sequence, Tuple

import pandas as pd

from core.structured import storage_count
from optimizers.state import FIRST_ORDER, PRECONDITIONED

logger = logging.getLogger(__name__)

ALL_OPTIMIZERS = PRECONDITIONED + FIRST_ORDER


def layer_memory_items(name: str, opt_cfg, d_out: int, d_in: int) -> List[Tuple[str, int]]:
    """Itemized stored scalars of one d_o x d_i layer for one optimizer"""
    weights = d_out * d_in
    if name == "kfac":
        return [
            ("S_K", d_in * d_in),
            ("S_C", d_out * d_out),
            ("S_K_inv", d_in * d_in),
            ("S_C_inv", d_out * d_out),
            ("m_mu", weights),
        ]
    if name in ("ikfac", "singd"):
        k_count = storage_count(opt_cfg.structure_k.bind(d_in))
        c_count = storage_count(opt_cfg.structure_c.bind(d_out))
        return [
            ("K", k_count),
            ("m_K", k_count),
            ("C", c_count),
            ("m_C", c_count),
            ("m_mu", weights),
        ]
    if name == "adamw":
        return [("second_moment", weights), ("m_mu", weights)]
    if name == "sgd":
        return [("m_mu", weights)]
    raise ValueError(f"Unknown optimizer '{name}'")


def memory_report(
    layer_shapes: Sequence[Tuple[int, int]],
    opt_cfg,
    optimizers: Optional[Iterable[str]] = None,
) -> pd.DataFrame:
    """Per-layer, per-item stored-scalar counts

    Args:
        layer_shapes: (d_o, d_i) of every layer, bias coordinate included
        opt_cfg: OptimizerConfig providing the structures
        optimizers: Names to report; defaults to the configured optimizer

    Returns:
        DataFrame with columns optimizer, layer, d_out, d_in, item, count
    """
    names = list(optimizers) if optimizers is not None else [opt_cfg.name]
    rows = []
    for name in names:
        for index, (d_out, d_in) in enumerate(layer_shapes):
            for item, count in layer_memory_items(name, opt_cfg, d_out, d_in):
                rows.append(
                    {
                        "optimizer": name,
                        "layer": index,
                        "d_out": d_out,
                        "d_in": d_in,
                        "item": item,
                        "count": int(count),
                    }
                )
    return pd.DataFrame(rows, columns=["optimizer", "layer", "d_out", "d_in", "item", "count"])


def memory_totals(report: pd.DataFrame) -> pd.DataFrame:
    """Total stored scalars per optimizer, split into factors and momenta"""
    report = report.assign(
        kind=report["item"].map(lambda item: "momentum" if item.startswith("m_") else "factor")
    )
    totals = report.pivot_table(
        index="optimizer", columns="kind", values="count", aggfunc="sum", fill_value=0
    )
    totals = totals.reindex(columns=["factor", "momentum"], fill_value=0)
    totals["total"] = totals["factor"] + totals["momentum"]
    return totals.reset_index()


def state_scalar_count(state) -> int:
    """Scalars actually held by an optimizer state"""
    arrays = [state.m_mu, state.S_K, state.S_C, state.S_K_inv, state.S_C_inv, state.second_moment]
    count = sum(a.size for a in arrays if a is not None)
    count += sum(f.coeffs.size for f in (state.K, state.C, state.m_K, state.m_C) if f is not None)
    return int(count)

import math
from typing import Callable

from utils.errors import ContractError


def get_schedule(run_cfg) -> Callable[[int], float]:
    """Multiplier on beta2 as a function of the step index

    constant: 1
    cosine: 1/2 (1 + cos(pi t / steps))
    step: factor ** (t // interval)

    Args:
        run_cfg: RunConfig (schedule, steps, schedule_interval, schedule_factor)

    Returns:
        Function mapping step t to the learning-rate multiplier
    """
    name = run_cfg.schedule
    if name == "constant":
        return lambda t: 1.0
    if name == "cosine":
        steps = run_cfg.steps
        return lambda t: 0.5 * (1.0 + math.cos(math.pi * t / steps))
    if name == "step":
        interval, factor = run_cfg.schedule_interval, run_cfg.schedule_factor
        return lambda t: factor ** (t // interval)
    raise ContractError(f"Unknown schedule '{name}'")

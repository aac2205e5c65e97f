"""
Run configuration: a flat `section.key = value` text file parsed into
validated pydantic models.
"""

import logging
import os
import re
from typing import Any, Dict, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from config import DEFAULT_OUTPUT_DIR, DEFAULT_SEED, SEED_ENV_VAR, get_int_env
from core.precision import PRESETS, PrecisionPolicy
from core.structured import FactorStructure, StructureKind
from utils.errors import ConfigError

logger = logging.getLogger(__name__)

SECTIONS = ("run", "task", "model", "optimizer", "precision", "output")
OPTIMIZER_NAMES = ("kfac", "ikfac", "singd", "adamw", "sgd")

_STRUCTURE_PATTERN = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")


class StructureSpec(BaseModel):
    """A structure family with its integer parameters, not yet bound to a size"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: StructureKind = StructureKind.DENSE
    k: int = Field(1, ge=0)
    d2: int = Field(1, ge=0)
    d3: int = Field(1, ge=0)

    @model_validator(mode="before")
    @classmethod
    def _parse_text(cls, value: Any):
        if not isinstance(value, str):
            return value
        match = _STRUCTURE_PATTERN.match(value)
        if not match:
            raise ValueError(f"cannot parse structure '{value}'")
        parsed: Dict[str, Any] = {"kind": match.group(1)}
        if match.group(2):
            for item in match.group(2).split(","):
                if not item.strip():
                    continue
                name, _, number = item.partition("=")
                if not number.strip():
                    raise ValueError(f"structure parameter '{item.strip()}' needs a value")
                parsed[name.strip()] = int(number)
        return parsed

    def bind(self, dim: int) -> FactorStructure:
        """Fix the structure to a concrete factor dimension

        Parameters larger than the dimension are clamped so one spec can be
        shared by layers of different widths.
        """
        if self.kind == StructureKind.BLOCK_DIAGONAL:
            k = min(max(self.k, 1), dim)
            if k != self.k:
                logger.warning(f"Block size {self.k} clamped to {k} for dimension {dim}")
            return FactorStructure(self.kind, dim, k=k)
        if self.kind in (StructureKind.RANK_K_TRIL, StructureKind.RANK_K_TRIU):
            k = min(self.k, dim)
            if k != self.k:
                logger.warning(f"Rank {self.k} clamped to {k} for dimension {dim}")
            return FactorStructure(self.kind, dim, k=k)
        if self.kind == StructureKind.HIERARCHICAL:
            d2 = min(self.d2, dim)
            d3 = min(self.d3, dim - d2)
            if (d2, d3) != (self.d2, self.d3):
                logger.warning(
                    f"Hierarchical blocks ({self.d2}, {self.d3}) clamped to "
                    f"({d2}, {d3}) for dimension {dim}"
                )
            return FactorStructure(self.kind, dim, d2=d2, d3=d3)
        return FactorStructure(self.kind, dim)

    def label(self) -> str:
        if self.kind in (
            StructureKind.BLOCK_DIAGONAL,
            StructureKind.RANK_K_TRIL,
            StructureKind.RANK_K_TRIU,
        ):
            return f"{self.kind.value}(k={self.k})"
        if self.kind == StructureKind.HIERARCHICAL:
            return f"{self.kind.value}(d2={self.d2},d3={self.d3})"
        return self.kind.value


class OptimizerConfig(BaseModel):
    """Hyperparameters shared by every optimizer; each uses the subset it needs

    The usual symbols are accepted as aliases: lambda (damping), gamma
    (weight decay), T (preconditioner update interval), structure_K and
    structure_C.
    """

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    name: Literal["kfac", "ikfac", "singd", "adamw", "sgd"] = "singd"
    beta1: float = Field(0.05, gt=0, le=1)
    beta2: float = Field(0.1, gt=0)
    alpha1: float = Field(0.0, ge=0, lt=1)
    alpha2: float = Field(0.0, ge=0, lt=1)
    damping: float = Field(1e-3, ge=0, alias="lambda")
    weight_decay: float = Field(0.0, ge=0, alias="gamma")
    update_interval: int = Field(1, ge=1, alias="T")
    structure_k: StructureSpec = Field(default_factory=StructureSpec, alias="structure_K")
    structure_c: StructureSpec = Field(default_factory=StructureSpec, alias="structure_C")
    truncation_order: int = Field(1, ge=1, le=2)
    adamw_decay_sign: Literal["as_printed", "decoupled"] = "as_printed"
    precision: PrecisionPolicy = Field(default_factory=PrecisionPolicy)

    def with_updates(self, **changes) -> "OptimizerConfig":
        return self.model_copy(update=changes)


class TaskConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal[
        "gaussian_blobs_classification", "kronecker_quadratic", "csv_classification"
    ] = "gaussian_blobs_classification"
    n_classes: int = Field(3, ge=2)
    n_features: int = Field(4, ge=1)
    n_samples: int = Field(240, ge=4)
    noise: float = Field(0.6, ge=0)
    test_fraction: float = Field(0.25, gt=0, lt=1)
    d_in: int = Field(4, ge=1)
    d_out: int = Field(4, ge=1)
    condition: float = Field(100.0, ge=1)
    path: Optional[str] = None

    @model_validator(mode="after")
    def _csv_needs_path(self):
        if self.kind == "csv_classification" and not self.path:
            raise ValueError("csv_classification needs task.path")
        return self


class ModelConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    hidden: Tuple[int, ...] = (16,)
    activation: Literal["relu", "tanh", "identity"] = "tanh"
    loss: Literal["softmax_cross_entropy", "mse"] = "softmax_cross_entropy"

    @field_validator("hidden", mode="before")
    @classmethod
    def _parse_hidden(cls, value):
        if isinstance(value, str):
            return tuple(int(v) for v in value.split(",") if v.strip())
        return value


class OutputConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    dir: str = DEFAULT_OUTPUT_DIR
    timing: bool = False
    progress: bool = False


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    steps: int = Field(100, ge=1)
    batch_size: int = Field(32, ge=1)
    seed: int = DEFAULT_SEED
    eval_interval: int = Field(10, ge=1)
    schedule: Literal["constant", "cosine", "step"] = "constant"
    schedule_interval: int = Field(40, ge=1)
    schedule_factor: float = Field(0.1, gt=0)
    task: TaskConfig = Field(default_factory=TaskConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)


def parse_config_text(text: str) -> Dict[str, Dict[str, Tuple[str, int]]]:
    """Split config text into {section: {key: (raw value, line number)}}

    Args:
        text: Contents of a config file

    Returns:
        Raw values grouped by section

    Raises:
        ConfigError: on malformed lines, unknown sections or duplicate keys
    """
    sections: Dict[str, Dict[str, Tuple[str, int]]] = {name: {} for name in SECTIONS}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'section.key = value'", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        parts = key.split(".")
        if len(parts) != 2 or not all(parts):
            raise ConfigError("keys must have the form section.key", line=lineno, key=key)
        section, name = parts
        if section not in sections:
            raise ConfigError(f"unknown section '{section}'", line=lineno, key=key)
        if name in sections[section]:
            raise ConfigError("duplicate key", line=lineno, key=key)
        sections[section][name] = (value, lineno)
    return sections


def _build(model_cls, section: str, entries: Dict[str, Tuple[str, int]], extra=None):
    values: Dict[str, Any] = {name: value for name, (value, _) in entries.items()}
    if extra:
        values.update(extra)
    try:
        return model_cls.model_validate(values)
    except ValidationError as e:
        first = e.errors()[0]
        name = str(first["loc"][0]) if first["loc"] else None
        line = entries[name][1] if name in entries else None
        key = f"{section}.{name}" if name else section
        raise ConfigError(first["msg"], line=line, key=key) from e


def _build_precision(entries: Dict[str, Tuple[str, int]]) -> PrecisionPolicy:
    entries = dict(entries)
    base: Dict[str, Any] = {}
    if "preset" in entries:
        preset, lineno = entries.pop("preset")
        if preset.lower() not in PRESETS:
            raise ConfigError(
                f"unknown preset '{preset}'", line=lineno, key="precision.preset"
            )
        base = PRESETS[preset.lower()].model_dump()
    for name, (_, lineno) in entries.items():
        if name not in PrecisionPolicy.model_fields:
            raise ConfigError("unknown key", line=lineno, key=f"precision.{name}")
    base.update({name: value for name, (value, _) in entries.items()})
    return _build(PrecisionPolicy, "precision", entries, extra=base)


def config_from_text(text: str) -> RunConfig:
    """Parse and validate config text, then apply the seed override"""
    sections = parse_config_text(text)
    precision = _build_precision(sections["precision"])
    optimizer = _build(
        OptimizerConfig, "optimizer", sections["optimizer"], extra={"precision": precision}
    )
    run_values = {
        "task": _build(TaskConfig, "task", sections["task"]),
        "model": _build(ModelConfig, "model", sections["model"]),
        "optimizer": optimizer,
        "output": _build(OutputConfig, "output", sections["output"]),
    }
    config = _build(RunConfig, "run", sections["run"], extra=run_values)

    if os.getenv(SEED_ENV_VAR, "").strip():
        try:
            seed = get_int_env(SEED_ENV_VAR, config.seed)
        except ValueError:
            raise ConfigError("seed override must be an integer", key=SEED_ENV_VAR) from None
        logger.info(f"Seed overridden from {SEED_ENV_VAR}: {seed}")
        config = config.model_copy(update={"seed": seed})
    return config


def load_run_config(path: str) -> RunConfig:
    """Read a run configuration file

    Args:
        path: Path to the config file

    Returns:
        Validated RunConfig
    """
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    config = config_from_text(text)
    logger.info(
        f"Loaded config {path}: optimizer={config.optimizer.name}, "
        f"task={config.task.kind}, steps={config.steps}"
    )
    return config

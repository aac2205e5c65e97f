"""
Software emulation of low-precision storage.

Values are rounded to nearest-even at a target significand width with
overflow to infinity and gradual underflow, so the same run reproduces
bit-for-bit on any hardware. Quantization happens at operation boundaries:
operands are loaded in the accumulation format, computed there, and the
result is stored back in the storage format.
"""

import dataclasses
import functools
from enum import Enum
from typing import Callable, FrozenSet, NamedTuple, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator


class NumericFormat(str, Enum):
    FP64 = "fp64"
    FP32 = "fp32"
    BF16 = "bf16"
    FP16 = "fp16"


class FormatSpec(NamedTuple):
    significand_bits: int  # including the hidden bit
    emin: int
    emax: int
    width: int  # total storage bits, used for format ordering


FORMAT_SPECS = {
    NumericFormat.FP64: FormatSpec(53, -1022, 1023, 64),
    NumericFormat.FP32: FormatSpec(24, -126, 127, 32),
    NumericFormat.BF16: FormatSpec(8, -126, 127, 16),
    NumericFormat.FP16: FormatSpec(11, -14, 15, 16),
}

QUANTIZE_POINTS = frozenset({"factor_state", "gradients", "curvature", "parameters"})


def max_finite(fmt: NumericFormat) -> float:
    spec = FORMAT_SPECS[NumericFormat(fmt)]
    return float(np.ldexp(2.0 - 2.0 ** (1 - spec.significand_bits), spec.emax))


def quantize_array(x, fmt: NumericFormat) -> np.ndarray:
    """Round every element of x to the nearest value representable in fmt

    Ties go to the even significand. Magnitudes beyond the largest finite
    value become signed infinity; tiny magnitudes round onto the subnormal
    grid of the format. Non-finite inputs pass through unchanged.

    Args:
        x: Array-like of reals
        fmt: Target storage format

    Returns:
        Array with the dtype of x (float64 for non-float input)
    """
    fmt = NumericFormat(fmt)
    arr = np.asarray(x)
    out_dtype = arr.dtype if np.issubdtype(arr.dtype, np.floating) else np.float64
    if fmt == NumericFormat.FP64:
        return arr.astype(out_dtype, copy=True)

    spec = FORMAT_SPECS[fmt]
    values = arr.astype(np.float64)
    _, exponent = np.frexp(values)
    # frexp gives |x| = m * 2^e with m in [0.5, 1); leading bit sits at e - 1
    lead = np.maximum(exponent - 1, spec.emin)
    quantum = lead - (spec.significand_bits - 1)
    rounded = np.ldexp(np.rint(np.ldexp(values, -quantum)), quantum)

    limit = max_finite(fmt)
    rounded = np.where(np.abs(rounded) > limit, np.copysign(np.inf, values), rounded)
    rounded = np.where(np.isfinite(values), rounded, values)
    return rounded.astype(out_dtype)


def quantize(x: float, fmt: NumericFormat) -> float:
    """Scalar form of quantize_array"""
    return float(quantize_array(np.float64(x), fmt))


def quantize_matrix(m: np.ndarray, fmt: NumericFormat) -> np.ndarray:
    return quantize_array(m, fmt)


class PrecisionPolicy(BaseModel):
    """Numeric format assignment applied at operation boundaries

    Attributes:
        storage: Format tensors are held in between operations
        accumulation: Format operations compute in
        quantize_points: Which tensor families are held in storage format
    """

    model_config = ConfigDict(frozen=True)

    storage: NumericFormat = NumericFormat.FP64
    accumulation: NumericFormat = NumericFormat.FP64
    quantize_points: FrozenSet[str] = QUANTIZE_POINTS

    @field_validator("accumulation")
    @classmethod
    def _accumulation_is_ieee_wide(cls, value: NumericFormat) -> NumericFormat:
        if value not in (NumericFormat.FP64, NumericFormat.FP32):
            raise ValueError("accumulation format must be fp64 or fp32")
        return value

    @field_validator("quantize_points", mode="before")
    @classmethod
    def _parse_points(cls, value):
        if isinstance(value, str):
            value = [p.strip() for p in value.split(",") if p.strip()]
        points = frozenset(value)
        unknown = points - QUANTIZE_POINTS
        if unknown:
            raise ValueError(f"unknown quantize points: {sorted(unknown)}")
        return points

    @model_validator(mode="after")
    def _accumulation_not_narrower(self):
        if FORMAT_SPECS[self.accumulation].width < FORMAT_SPECS[self.storage].width:
            raise ValueError(
                f"accumulation format {self.accumulation.value} is narrower than "
                f"storage format {self.storage.value}"
            )
        return self

    @property
    def dtype(self):
        return np.float32 if self.accumulation == NumericFormat.FP32 else np.float64

    @property
    def is_exact(self) -> bool:
        return (
            self.storage == NumericFormat.FP64
            and self.accumulation == NumericFormat.FP64
        )

    def load(self, x) -> np.ndarray:
        """Bring a stored tensor into the accumulation format"""
        return np.asarray(x).astype(self.dtype, copy=False)

    def store(self, x, point: str) -> np.ndarray:
        """Round a computed tensor back to storage if the point is quantized"""
        arr = self.load(x)
        if point in self.quantize_points and self.storage != NumericFormat.FP64:
            return quantize_array(arr, self.storage)
        return arr

    def rounding(self, point: str) -> Optional[Callable[[np.ndarray], np.ndarray]]:
        """Storage rounding for intermediate results at a quantized point, or None"""
        if point in self.quantize_points and self.storage != NumericFormat.FP64:
            return functools.partial(self.store, point=point)
        return None

    def load_factor(self, factor):
        return dataclasses.replace(factor, coeffs=self.load(factor.coeffs))

    def store_factor(self, factor, point: str = "factor_state"):
        return dataclasses.replace(factor, coeffs=self.store(factor.coeffs, point))


PRESETS = {
    "fp64": PrecisionPolicy(),
    "fp32": PrecisionPolicy(storage=NumericFormat.FP32, accumulation=NumericFormat.FP32),
    "bf16": PrecisionPolicy(storage=NumericFormat.BF16, accumulation=NumericFormat.FP32),
    "fp16": PrecisionPolicy(storage=NumericFormat.FP16, accumulation=NumericFormat.FP32),
}


def policy_from_name(name: str) -> PrecisionPolicy:
    try:
        return PRESETS[name.lower()]
    except KeyError:
        raise ValueError(f"Unknown precision preset '{name}'") from None

import struct
import sys
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

# Add parent directory to path for imports
sys.path.append(str(Path(__file__).parent.parent))

from core.precision import (
    PRESETS,
    NumericFormat,
    PrecisionPolicy,
    max_finite,
    policy_from_name,
    quantize,
    quantize_array,
)
from utils.verification_utils import precision_samples, reference_quantize


def _bf16_by_bits(value: float) -> float:
    """BF16 rounding of a float32-representable value through its 32-bit pattern"""
    (bits,) = struct.unpack("<I", struct.pack("<f", value))
    lower = bits & 0xFFFF
    upper = bits >> 16
    if lower > 0x8000 or (lower == 0x8000 and upper & 1):
        upper += 1
    return struct.unpack("<f", struct.pack("<I", (upper << 16) & 0xFFFFFFFF))[0]


def test_quantize_examples():
    assert quantize(1.0, NumericFormat.BF16) == 1.0
    assert quantize(1.0 + 2.0**-8, NumericFormat.BF16) == 1.0
    assert quantize(0.2, NumericFormat.BF16) == 0.2001953125


def test_quantize_tie_rounds_to_even_upwards():
    # 1 + 3 * 2^-8 sits between 1 + 2^-7 (odd) and 1 + 2^-6 (even)
    assert quantize(1.0 + 3 * 2.0**-8, NumericFormat.BF16) == 1.0 + 2.0**-6


def test_quantize_overflow_and_passthrough():
    big = max_finite(NumericFormat.BF16)
    assert quantize(big, NumericFormat.BF16) == big
    assert quantize(2.0 * big, NumericFormat.BF16) == np.inf
    assert quantize(-2.0 * big, NumericFormat.BF16) == -np.inf
    assert np.isnan(quantize(np.nan, NumericFormat.BF16))
    assert quantize(70000.0, NumericFormat.FP16) == np.inf


def test_quantize_subnormals():
    smallest = 2.0**-133  # bf16 subnormal quantum: 2^(emin - 7)
    assert quantize(smallest, NumericFormat.BF16) == smallest
    assert quantize(0.4 * smallest, NumericFormat.BF16) == 0.0
    assert quantize(0.6 * smallest, NumericFormat.BF16) == smallest


def test_fp32_matches_numpy_cast():
    x = np.random.default_rng(0).normal(size=1000) * 1e3
    assert np.array_equal(quantize_array(x, NumericFormat.FP32), x.astype(np.float32).astype(np.float64))


def test_bf16_matches_float32_bit_oracle():
    rng = np.random.default_rng(1)
    values = np.ldexp(rng.uniform(-1.0, 1.0, size=100_000), rng.integers(-100, 100, size=100_000))
    values = values.astype(np.float32).astype(np.float64)
    expected = np.array([_bf16_by_bits(float(v)) for v in values])
    assert np.array_equal(quantize_array(values, NumericFormat.BF16), expected)


@pytest.mark.parametrize("fmt", [NumericFormat.BF16, NumericFormat.FP16])
def test_matches_float64_bit_oracle(fmt):
    x = precision_samples(20_000, fmt)
    assert np.array_equal(quantize_array(x, fmt), reference_quantize(x, fmt))


@pytest.mark.parametrize("fmt", [NumericFormat.BF16, NumericFormat.FP16, NumericFormat.FP32])
def test_idempotent_and_monotone(fmt):
    x = np.sort(np.random.default_rng(2).normal(size=5000) * 10.0)
    q = quantize_array(x, fmt)
    assert np.array_equal(quantize_array(q, fmt), q)
    assert np.all(q[1:] >= q[:-1])


def test_bf16_relative_error_bound():
    rng = np.random.default_rng(3)
    x = np.ldexp(rng.uniform(1.0, 2.0, size=10_000), rng.integers(-100, 100, size=10_000))
    assert np.max(np.abs(quantize_array(x, NumericFormat.BF16) - x) / x) <= 2.0**-8


def test_quantize_keeps_dtype():
    x = np.linspace(-1.0, 1.0, 7, dtype=np.float32)
    assert quantize_array(x, NumericFormat.BF16).dtype == np.float32


def test_policy_store_and_load():
    policy = PRESETS["bf16"]
    assert policy.dtype == np.float32
    stored = policy.store(np.array([0.2]), "gradients")
    assert stored.dtype == np.float32
    assert float(stored[0]) == 0.2001953125
    assert PRESETS["fp64"].is_exact
    assert np.array_equal(PRESETS["fp64"].store(np.array([0.2]), "gradients"), np.array([0.2]))


def test_policy_only_quantizes_listed_points():
    policy = PrecisionPolicy(
        storage=NumericFormat.BF16, accumulation=NumericFormat.FP32, quantize_points="parameters"
    )
    x = np.array([0.2])
    assert float(policy.store(x, "gradients")[0]) == pytest.approx(0.2, rel=1e-7)
    assert float(policy.store(x, "parameters")[0]) == 0.2001953125


def test_policy_validation():
    with pytest.raises(ValidationError):
        PrecisionPolicy(accumulation=NumericFormat.BF16)
    with pytest.raises(ValidationError):
        PrecisionPolicy(storage=NumericFormat.FP64, accumulation=NumericFormat.FP32)
    with pytest.raises(ValidationError):
        PrecisionPolicy(quantize_points="weights")
    with pytest.raises(ValueError):
        policy_from_name("int8")

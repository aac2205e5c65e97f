import sys
from pathlib import Path

import numpy as np
import pytest

# Add parent directory to path for imports
sys.path.append(str(Path(__file__).parent.parent))

from core import structured
from core.structured import FactorStructure, StructureKind, StructuredFactor
from utils.config_utils import StructureSpec
from utils.errors import ContractError, ShapeError
from utils.verification_utils import (
    STRUCTURE_SPECS,
    closure_mass,
    projection_oracle,
    random_member,
    random_symmetric,
)


def _structure(text: str, dim: int) -> FactorStructure:
    return StructureSpec.model_validate(text).bind(dim)


def _diag(*values) -> StructuredFactor:
    return StructuredFactor(FactorStructure(StructureKind.DIAGONAL, len(values)), np.array(values, dtype=float))


def test_identity_examples():
    assert np.array_equal(structured.identity(FactorStructure(StructureKind.DIAGONAL, 3)).coeffs, np.ones(3))
    toeplitz = structured.identity(FactorStructure(StructureKind.TRIU_TOEPLITZ, 3))
    assert np.array_equal(structured.to_dense(toeplitz)[0], np.array([1.0, 0.0, 0.0]))
    hierarchical = structured.identity(FactorStructure(StructureKind.HIERARCHICAL, 4, d2=1, d3=1))
    assert np.array_equal(structured.to_dense(hierarchical), np.eye(4))


@pytest.mark.parametrize("text", STRUCTURE_SPECS)
def test_identity_is_member_of_every_class(text):
    structure = _structure(text, 7)
    assert np.array_equal(structured.to_dense(structured.identity(structure)), np.eye(7))


def test_storage_counts():
    assert structured.storage_count(FactorStructure(StructureKind.DENSE, 4)) == 16
    assert structured.storage_count(FactorStructure(StructureKind.DIAGONAL, 4)) == 4
    assert structured.storage_count(FactorStructure(StructureKind.BLOCK_DIAGONAL, 4, k=2)) == 8
    assert structured.storage_count(FactorStructure(StructureKind.TRIL, 4)) == 10
    assert structured.storage_count(FactorStructure(StructureKind.TRIL_TOEPLITZ, 4)) == 4
    # k*k + k*(d-k) + (d-k)
    assert structured.storage_count(FactorStructure(StructureKind.RANK_K_TRIL, 5, k=2)) == 4 + 6 + 3
    # d2^2 + d2*m + d2*d3 + m + d3*m + d3^2 with m = d - d2 - d3
    assert structured.storage_count(FactorStructure(StructureKind.HIERARCHICAL, 6, d2=2, d3=1)) == 4 + 6 + 2 + 3 + 3 + 1


def test_ragged_block_diagonal():
    structure = FactorStructure(StructureKind.BLOCK_DIAGONAL, 7, k=3)
    assert structured.block_sizes(structure) == [3, 3, 1]
    assert structured.storage_count(structure) == 9 + 9 + 1


def test_invalid_structures():
    with pytest.raises(ContractError):
        FactorStructure(StructureKind.BLOCK_DIAGONAL, 4, k=0)
    with pytest.raises(ContractError):
        FactorStructure(StructureKind.HIERARCHICAL, 3, d2=2, d3=2)
    with pytest.raises(ShapeError):
        StructuredFactor(FactorStructure(StructureKind.DIAGONAL, 3), np.ones(4))


def test_projection_examples():
    m = np.array([[1.0, 2.0], [2.0, 3.0]])
    tril = structured.project(FactorStructure(StructureKind.TRIL, 2), m)
    assert np.array_equal(structured.to_dense(tril), np.array([[1.0, 0.0], [4.0, 3.0]]))
    diagonal = structured.project(FactorStructure(StructureKind.DIAGONAL, 2), m)
    assert np.array_equal(diagonal.coeffs, np.array([1.0, 3.0]))
    toeplitz = structured.project(FactorStructure(StructureKind.TRIU_TOEPLITZ, 2), m)
    assert np.array_equal(toeplitz.coeffs, np.array([2.0, 4.0]))
    assert np.array_equal(structured.to_dense(toeplitz), np.array([[2.0, 4.0], [0.0, 2.0]]))


def test_projection_rejects_asymmetric_and_wrong_size():
    with pytest.raises(ContractError):
        structured.project(FactorStructure(StructureKind.DENSE, 2), np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ShapeError):
        structured.project(FactorStructure(StructureKind.DENSE, 3), np.eye(2))


@pytest.mark.parametrize("text", STRUCTURE_SPECS)
def test_projection_matches_oracle(text):
    rng = np.random.default_rng(11)
    structure = _structure(text, 7)
    for _ in range(10):
        m = random_symmetric(7, rng)
        projected = structured.to_dense(structured.project(structure, m))
        assert np.max(np.abs(projected - projection_oracle(structure, m))) <= 1e-14


def test_tril_projection_identity():
    rng = np.random.default_rng(12)
    m = random_symmetric(6, rng)
    p = structured.to_dense(structured.project(FactorStructure(StructureKind.TRIL, 6), m))
    assert np.allclose(p + p.T, 2.0 * m, atol=1e-12)


def test_dense_projection_is_identity():
    m = random_symmetric(5, np.random.default_rng(13))
    assert np.array_equal(structured.to_dense(structured.project(FactorStructure(StructureKind.DENSE, 5), m)), m)


def test_right_update_examples():
    k = _diag(2.0, 3.0)
    assert np.array_equal(structured.right_update(k, structured.zeros(k.structure), 0.1).coeffs, k.coeffs)
    updated = structured.right_update(k, _diag(1.0, 1.0), 0.1)
    assert np.allclose(updated.coeffs, [1.8, 2.7])
    with pytest.raises(ContractError):
        structured.right_update(k, structured.zeros(FactorStructure(StructureKind.DENSE, 2)), 0.1)


def test_right_update_dense_matches_matmul():
    rng = np.random.default_rng(14)
    structure = FactorStructure(StructureKind.DENSE, 4)
    k, m = random_member(structure, rng), random_member(structure, rng)
    expected = structured.to_dense(k) @ (np.eye(4) - 0.3 * structured.to_dense(m))
    assert np.allclose(structured.to_dense(structured.right_update(k, m, 0.3)), expected, atol=1e-12)


def test_second_order_update_matches_truncated_series():
    rng = np.random.default_rng(15)
    structure = FactorStructure(StructureKind.TRIL_TOEPLITZ, 5)
    k, m = random_member(structure, rng), random_member(structure, rng)
    mk = structured.to_dense(m)
    series = np.eye(5) - 0.2 * mk + 0.5 * 0.04 * mk @ mk
    updated = structured.right_update(k, m, 0.2, order=2)
    assert np.allclose(structured.to_dense(updated), structured.to_dense(k) @ series, atol=1e-12)


@pytest.mark.parametrize("text", STRUCTURE_SPECS)
def test_products_stay_in_class(text):
    rng = np.random.default_rng(16)
    for dim in (4, 8, 16):
        mass = closure_mass(_structure(text, dim), 5, rng)
        assert mass["product"] <= 1e-14
        assert mass["update"] <= 1e-14
        assert mass["gap"] <= 1e-12 * dim


def test_congruence_examples():
    u = np.array([[2.0, 1.0], [1.0, 3.0]])
    assert np.allclose(structured.congruence(structured.identity(FactorStructure(StructureKind.DENSE, 2)), u), u)
    assert np.allclose(structured.congruence(_diag(2.0, 3.0), np.eye(2)), np.diag([4.0, 9.0]))
    with pytest.raises(ShapeError):
        structured.congruence(_diag(2.0, 3.0), np.eye(3))


@pytest.mark.parametrize("text", STRUCTURE_SPECS)
def test_congruence_matches_dense(text):
    rng = np.random.default_rng(17)
    k = random_member(_structure(text, 5), rng)
    u = random_symmetric(5, rng)
    dense = structured.to_dense(k)
    assert np.allclose(structured.congruence(k, u), dense.T @ u @ dense, atol=1e-12)


@pytest.mark.parametrize("text", ["tril_toeplitz", "triu_toeplitz"])
def test_toeplitz_rmul_uses_bands(text):
    rng = np.random.default_rng(18)
    k = random_member(_structure(text, 9), rng)
    x = rng.normal(size=(3, 9))
    dense = structured.to_dense(k)
    assert np.allclose(structured.rmul(x, k), x @ dense, atol=1e-12)
    assert np.allclose(structured.rmul_t(x, k), x @ dense.T, atol=1e-12)


def test_gram_trace_examples():
    assert structured.gram_trace(structured.identity(FactorStructure(StructureKind.DENSE, 7))) == 7.0
    assert structured.gram_trace(_diag(2.0, 3.0)) == 13.0


@pytest.mark.parametrize("text", STRUCTURE_SPECS)
def test_gram_trace_matches_dense(text):
    k = random_member(_structure(text, 6), np.random.default_rng(19))
    assert structured.gram_trace(k) == pytest.approx(float(np.sum(structured.to_dense(k) ** 2)), abs=1e-12)


def test_sandwich_examples():
    g = np.array([[1.0, 2.0], [3.0, 4.0]])
    c = structured.identity(FactorStructure(StructureKind.DENSE, 2))
    assert np.allclose(structured.sandwich_precondition(c, g, c), g)
    assert np.allclose(structured.sandwich_precondition(_diag(2.0), np.array([[1.0]]), _diag(3.0)), [[36.0]])
    with pytest.raises(ShapeError):
        structured.sandwich_precondition(c, np.ones((3, 2)), c)


@pytest.mark.parametrize("text", STRUCTURE_SPECS)
def test_sandwich_matches_dense(text):
    rng = np.random.default_rng(20)
    c = random_member(_structure(text, 3), rng)
    k = random_member(_structure(text, 4), rng)
    g = rng.normal(size=(3, 4))
    cd, kd = structured.to_dense(c), structured.to_dense(k)
    expected = cd @ cd.T @ g @ kd @ kd.T
    assert np.allclose(structured.sandwich_precondition(c, g, k), expected, atol=1e-12)


def test_float32_is_preserved():
    structure = FactorStructure(StructureKind.TRIL_TOEPLITZ, 5)
    k = structured.identity(structure, np.float32)
    m = structured.project(structure, np.eye(5, dtype=np.float32))
    assert structured.right_update(k, m, 0.1).dtype == np.float32
    assert structured.congruence(k, np.eye(5, dtype=np.float32)).dtype == np.float32

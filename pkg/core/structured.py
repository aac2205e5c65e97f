"""
Structured Kronecker factors.

Every factor class here is a matrix Lie group whose tangent space is closed
under products, so the factor update K <- K (I - beta1 * m) never leaves the
class. Factors are stored compactly: only the structural nonzeros are kept,
laid out as an ordered list of named segments per kind (see _segments).
Dense matrices are only materialized by to_dense (test and oracle use) and
by congruence, whose output is the dense symmetric bracket that the
optimizers project back.
"""

import dataclasses
from enum import Enum
from typing import Dict, List, Tuple

import numpy as np

from core.linalg import Matrix, as_matrix, require_symmetric
from utils.errors import ContractError, ShapeError


class StructureKind(str, Enum):
    DENSE = "dense"
    DIAGONAL = "diagonal"
    BLOCK_DIAGONAL = "block_diagonal"
    TRIL = "tril"
    TRIU = "triu"
    TRIL_TOEPLITZ = "tril_toeplitz"
    TRIU_TOEPLITZ = "triu_toeplitz"
    HIERARCHICAL = "hierarchical"
    RANK_K_TRIL = "rank_k_tril"
    RANK_K_TRIU = "rank_k_triu"


TOEPLITZ_KINDS = (StructureKind.TRIL_TOEPLITZ, StructureKind.TRIU_TOEPLITZ)


@dataclasses.dataclass(frozen=True)
class FactorStructure:
    """Sparsity class of a d x d Kronecker factor

    Attributes:
        kind: Structure family
        dim: Factor dimension d
        k: Block size (block_diagonal) or leading block size (rank_k_*)
        d2: Leading dense block size (hierarchical)
        d3: Trailing dense block size (hierarchical)
    """

    kind: StructureKind
    dim: int
    k: int = 0
    d2: int = 0
    d3: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", StructureKind(self.kind))
        if self.dim < 1:
            raise ContractError(f"Factor dimension must be positive, got {self.dim}")
        if self.kind == StructureKind.BLOCK_DIAGONAL and not 1 <= self.k <= self.dim:
            raise ContractError(
                f"Block size must lie in [1, {self.dim}], got {self.k}"
            )
        if self.kind in (StructureKind.RANK_K_TRIL, StructureKind.RANK_K_TRIU):
            if not 0 <= self.k <= self.dim:
                raise ContractError(f"Rank k must lie in [0, {self.dim}], got {self.k}")
        if self.kind == StructureKind.HIERARCHICAL:
            if self.d2 < 0 or self.d3 < 0 or self.d2 + self.d3 > self.dim:
                raise ContractError(
                    f"Hierarchical blocks need d2, d3 >= 0 and d2 + d3 <= {self.dim}, "
                    f"got d2={self.d2}, d3={self.d3}"
                )

    def describe(self) -> str:
        if self.kind == StructureKind.BLOCK_DIAGONAL:
            return f"{self.kind.value}(k={self.k})[{self.dim}]"
        if self.kind in (StructureKind.RANK_K_TRIL, StructureKind.RANK_K_TRIU):
            return f"{self.kind.value}(k={self.k})[{self.dim}]"
        if self.kind == StructureKind.HIERARCHICAL:
            return f"{self.kind.value}(d2={self.d2}, d3={self.d3})[{self.dim}]"
        return f"{self.kind.value}[{self.dim}]"


@dataclasses.dataclass(frozen=True, eq=False)
class StructuredFactor:
    structure: FactorStructure
    coeffs: np.ndarray

    def __post_init__(self):
        expected = storage_count(self.structure)
        if self.coeffs.ndim != 1 or self.coeffs.shape[0] != expected:
            raise ShapeError(
                f"{self.structure.describe()} stores {expected} scalars, "
                f"got coefficient array of shape {self.coeffs.shape}"
            )

    @property
    def dim(self) -> int:
        return self.structure.dim

    @property
    def dtype(self):
        return self.coeffs.dtype


# ---------------------------------------------------------------------------
# Compact layout
# ---------------------------------------------------------------------------


def block_sizes(structure: FactorStructure) -> List[int]:
    """Block sizes of a block-diagonal structure; the last block may be ragged"""
    full, rest = divmod(structure.dim, structure.k)
    return [structure.k] * full + ([rest] if rest else [])


def _hierarchical_split(structure: FactorStructure) -> Tuple[slice, slice, slice]:
    d, d2, d3 = structure.dim, structure.d2, structure.d3
    middle = d - d2 - d3
    return slice(0, d2), slice(d2, d2 + middle), slice(d2 + middle, d)


def _segments(structure: FactorStructure) -> List[Tuple[str, Tuple[int, ...]]]:
    d, kind = structure.dim, structure.kind
    if kind == StructureKind.DENSE:
        return [("a", (d, d))]
    if kind == StructureKind.DIAGONAL:
        return [("diag", (d,))]
    if kind == StructureKind.BLOCK_DIAGONAL:
        return [(f"b{i}", (s, s)) for i, s in enumerate(block_sizes(structure))]
    if kind in (StructureKind.TRIL, StructureKind.TRIU):
        return [("tri", (d * (d + 1) // 2,))]
    if kind in TOEPLITZ_KINDS:
        return [("bands", (d,))]
    if kind == StructureKind.RANK_K_TRIL:
        k = structure.k
        return [("a11", (k, k)), ("a12", (k, d - k)), ("diag", (d - k,))]
    if kind == StructureKind.RANK_K_TRIU:
        k = structure.k
        return [("a11", (k, k)), ("a21", (d - k, k)), ("diag", (d - k,))]
    if kind == StructureKind.HIERARCHICAL:
        d2, d3 = structure.d2, structure.d3
        m = d - d2 - d3
        return [
            ("a11", (d2, d2)),
            ("a12", (d2, m)),
            ("a13", (d2, d3)),
            ("a22", (m,)),
            ("a32", (d3, m)),
            ("a33", (d3, d3)),
        ]
    raise ContractError(f"Unsupported structure kind {kind}")


def storage_count(structure: FactorStructure) -> int:
    """Exact number of scalars stored for one factor of this structure"""
    return int(sum(int(np.prod(shape)) for _, shape in _segments(structure)))


def _unpack(factor: StructuredFactor) -> Dict[str, np.ndarray]:
    parts, offset = {}, 0
    for name, shape in _segments(factor.structure):
        size = int(np.prod(shape))
        parts[name] = factor.coeffs[offset : offset + size].reshape(shape)
        offset += size
    return parts


def _pack(structure: FactorStructure, parts: Dict[str, np.ndarray]) -> StructuredFactor:
    chunks = [np.asarray(parts[name]).reshape(-1) for name, _ in _segments(structure)]
    coeffs = np.concatenate(chunks) if chunks else np.zeros(0)
    return StructuredFactor(structure, coeffs)


def _tri_indices(structure: FactorStructure):
    d = structure.dim
    return np.tril_indices(d) if structure.kind == StructureKind.TRIL else np.triu_indices(d)


def _toeplitz_offsets(structure: FactorStructure) -> np.ndarray:
    """Band index of every dense entry, -1 outside the triangle"""
    rows, cols = np.indices((structure.dim, structure.dim))
    offsets = cols - rows if structure.kind == StructureKind.TRIU_TOEPLITZ else rows - cols
    return np.where(offsets >= 0, offsets, -1)


# ---------------------------------------------------------------------------
# Construction and conversion
# ---------------------------------------------------------------------------


def zeros(structure: FactorStructure, dtype=np.float64) -> StructuredFactor:
    return StructuredFactor(structure, np.zeros(storage_count(structure), dtype=dtype))


def identity(structure: FactorStructure, dtype=np.float64) -> StructuredFactor:
    """The identity, which is a member of every supported class"""
    d, kind = structure.dim, structure.kind
    parts = {
        name: np.zeros(shape, dtype=dtype) for name, shape in _segments(structure)
    }
    if kind == StructureKind.DENSE:
        parts["a"] = np.eye(d, dtype=dtype)
    elif kind == StructureKind.DIAGONAL:
        parts["diag"][:] = 1.0
    elif kind == StructureKind.BLOCK_DIAGONAL:
        for i, size in enumerate(block_sizes(structure)):
            parts[f"b{i}"] = np.eye(size, dtype=dtype)
    elif kind in (StructureKind.TRIL, StructureKind.TRIU):
        rows, cols = _tri_indices(structure)
        parts["tri"] = (rows == cols).astype(dtype)
    elif kind in TOEPLITZ_KINDS:
        parts["bands"][0] = 1.0
    elif kind in (StructureKind.RANK_K_TRIL, StructureKind.RANK_K_TRIU):
        parts["a11"] = np.eye(structure.k, dtype=dtype)
        parts["diag"][:] = 1.0
    elif kind == StructureKind.HIERARCHICAL:
        parts["a11"] = np.eye(structure.d2, dtype=dtype)
        parts["a22"][:] = 1.0
        parts["a33"] = np.eye(structure.d3, dtype=dtype)
    return _pack(structure, parts)


def to_dense(factor: StructuredFactor) -> Matrix:
    """Materialize the factor as a dense d x d matrix"""
    structure, parts = factor.structure, _unpack(factor)
    d, kind = structure.dim, structure.kind
    dense = np.zeros((d, d), dtype=factor.dtype)

    if kind == StructureKind.DENSE:
        dense[:] = parts["a"]
    elif kind == StructureKind.DIAGONAL:
        dense[np.diag_indices(d)] = parts["diag"]
    elif kind == StructureKind.BLOCK_DIAGONAL:
        start = 0
        for i, size in enumerate(block_sizes(structure)):
            dense[start : start + size, start : start + size] = parts[f"b{i}"]
            start += size
    elif kind in (StructureKind.TRIL, StructureKind.TRIU):
        dense[_tri_indices(structure)] = parts["tri"]
    elif kind in TOEPLITZ_KINDS:
        offsets = _toeplitz_offsets(structure)
        dense[:] = np.where(offsets >= 0, parts["bands"][np.maximum(offsets, 0)], 0.0)
    elif kind == StructureKind.RANK_K_TRIL:
        k = structure.k
        dense[:k, :k] = parts["a11"]
        dense[:k, k:] = parts["a12"]
        dense[np.arange(k, d), np.arange(k, d)] = parts["diag"]
    elif kind == StructureKind.RANK_K_TRIU:
        k = structure.k
        dense[:k, :k] = parts["a11"]
        dense[k:, :k] = parts["a21"]
        dense[np.arange(k, d), np.arange(k, d)] = parts["diag"]
    elif kind == StructureKind.HIERARCHICAL:
        s1, s2, s3 = _hierarchical_split(structure)
        dense[s1, s1] = parts["a11"]
        dense[s1, s2] = parts["a12"]
        dense[s1, s3] = parts["a13"]
        middle = np.arange(s2.start, s2.stop)
        dense[middle, middle] = parts["a22"]
        dense[s3, s2] = parts["a32"]
        dense[s3, s3] = parts["a33"]
    return dense


def structure_support(structure: FactorStructure) -> np.ndarray:
    """Boolean mask of the entries a member of this class may populate"""
    ones = StructuredFactor(structure, np.ones(storage_count(structure)))
    return to_dense(ones) != 0.0


def from_dense(structure: FactorStructure, dense: Matrix) -> StructuredFactor:
    """Read the structural entries of a dense matrix (no reweighting)

    Entries outside the support are ignored. Toeplitz bands are read from
    the first row (upper) or first column (lower).
    """
    dense = as_matrix(dense)
    _check_dim(structure, dense)
    d, kind = structure.dim, structure.kind
    if kind == StructureKind.DENSE:
        parts = {"a": dense.copy()}
    elif kind == StructureKind.DIAGONAL:
        parts = {"diag": np.diag(dense).copy()}
    elif kind == StructureKind.BLOCK_DIAGONAL:
        parts, start = {}, 0
        for i, size in enumerate(block_sizes(structure)):
            parts[f"b{i}"] = dense[start : start + size, start : start + size]
            start += size
    elif kind in (StructureKind.TRIL, StructureKind.TRIU):
        parts = {"tri": dense[_tri_indices(structure)]}
    elif kind == StructureKind.TRIU_TOEPLITZ:
        parts = {"bands": dense[0, :].copy()}
    elif kind == StructureKind.TRIL_TOEPLITZ:
        parts = {"bands": dense[:, 0].copy()}
    elif kind == StructureKind.RANK_K_TRIL:
        k = structure.k
        parts = {"a11": dense[:k, :k], "a12": dense[:k, k:], "diag": np.diag(dense)[k:]}
    elif kind == StructureKind.RANK_K_TRIU:
        k = structure.k
        parts = {"a11": dense[:k, :k], "a21": dense[k:, :k], "diag": np.diag(dense)[k:]}
    else:
        s1, s2, s3 = _hierarchical_split(structure)
        parts = {
            "a11": dense[s1, s1],
            "a12": dense[s1, s2],
            "a13": dense[s1, s3],
            "a22": np.diag(dense)[s2],
            "a32": dense[s3, s2],
            "a33": dense[s3, s3],
        }
    return _pack(structure, parts)


def _check_dim(structure: FactorStructure, m: Matrix) -> None:
    if m.shape != (structure.dim, structure.dim):
        raise ShapeError(
            f"{structure.describe()} expects a {structure.dim}x{structure.dim} "
            f"matrix, got {m.shape[0]}x{m.shape[1]}"
        )


def _require_same(a: StructuredFactor, b: StructuredFactor, op: str) -> None:
    if a.structure != b.structure:
        raise ContractError(
            f"{op} needs matching structures, got {a.structure.describe()} "
            f"and {b.structure.describe()}"
        )


# ---------------------------------------------------------------------------
# Subspace projection
# ---------------------------------------------------------------------------


def project(structure: FactorStructure, m: Matrix) -> StructuredFactor:
    """Subspace projection map of a dense symmetric matrix onto the class

    Diagonal-type entries are kept as is; each off-diagonal structural entry
    collects the weight of its mirrored partner, so it is doubled. Toeplitz
    bands are averaged along their diagonal before doubling.

    Args:
        structure: Target class
        m: Symmetric d x d matrix

    Returns:
        The projected factor in compact storage
    """
    m = require_symmetric(as_matrix(m), "project")
    _check_dim(structure, m)
    d, kind = structure.dim, structure.kind

    if kind == StructureKind.DENSE:
        return _pack(structure, {"a": m.copy()})
    if kind in (StructureKind.DIAGONAL, StructureKind.BLOCK_DIAGONAL):
        return from_dense(structure, m)
    if kind == StructureKind.TRIL:
        weighted = 2.0 * np.tril(m, -1) + np.diag(np.diag(m))
        return from_dense(structure, weighted)
    if kind == StructureKind.TRIU:
        weighted = 2.0 * np.triu(m, 1) + np.diag(np.diag(m))
        return from_dense(structure, weighted)
    if kind in TOEPLITZ_KINDS:
        sign = 1 if kind == StructureKind.TRIU_TOEPLITZ else -1
        bands = np.array(
            [np.diagonal(m, offset=sign * j).mean() for j in range(d)], dtype=m.dtype
        )
        bands[1:] *= 2.0
        return _pack(structure, {"bands": bands})
    if kind == StructureKind.RANK_K_TRIL:
        k = structure.k
        return _pack(
            structure,
            {"a11": m[:k, :k], "a12": 2.0 * m[:k, k:], "diag": np.diag(m)[k:]},
        )
    if kind == StructureKind.RANK_K_TRIU:
        k = structure.k
        return _pack(
            structure,
            {"a11": m[:k, :k], "a21": 2.0 * m[k:, :k], "diag": np.diag(m)[k:]},
        )
    s1, s2, s3 = _hierarchical_split(structure)
    return _pack(
        structure,
        {
            "a11": m[s1, s1],
            "a12": 2.0 * m[s1, s2],
            "a13": 2.0 * m[s1, s3],
            "a22": np.diag(m)[s2],
            "a32": 2.0 * m[s3, s2],
            "a33": m[s3, s3],
        },
    )


# ---------------------------------------------------------------------------
# Closed algebra
# ---------------------------------------------------------------------------


def scale(factor: StructuredFactor, alpha: float) -> StructuredFactor:
    return StructuredFactor(factor.structure, alpha * factor.coeffs)


def add(a: StructuredFactor, b: StructuredFactor) -> StructuredFactor:
    _require_same(a, b, "add")
    return StructuredFactor(a.structure, a.coeffs + b.coeffs)


def multiply(a: StructuredFactor, b: StructuredFactor) -> StructuredFactor:
    """Product a @ b, computed and returned in compact storage"""
    _require_same(a, b, "multiply")
    structure = a.structure
    kind = structure.kind
    pa, pb = _unpack(a), _unpack(b)

    if kind == StructureKind.DENSE:
        parts = {"a": pa["a"] @ pb["a"]}
    elif kind == StructureKind.DIAGONAL:
        parts = {"diag": pa["diag"] * pb["diag"]}
    elif kind == StructureKind.BLOCK_DIAGONAL:
        parts = {name: pa[name] @ pb[name] for name in pa}
    elif kind in (StructureKind.TRIL, StructureKind.TRIU):
        product = to_dense(a) @ to_dense(b)
        parts = {"tri": product[_tri_indices(structure)]}
    elif kind in TOEPLITZ_KINDS:
        parts = {"bands": np.convolve(pa["bands"], pb["bands"])[: structure.dim]}
    elif kind == StructureKind.RANK_K_TRIL:
        parts = {
            "a11": pa["a11"] @ pb["a11"],
            "a12": pa["a11"] @ pb["a12"] + pa["a12"] * pb["diag"][None, :],
            "diag": pa["diag"] * pb["diag"],
        }
    elif kind == StructureKind.RANK_K_TRIU:
        parts = {
            "a11": pa["a11"] @ pb["a11"],
            "a21": pa["a21"] @ pb["a11"] + pa["diag"][:, None] * pb["a21"],
            "diag": pa["diag"] * pb["diag"],
        }
    else:
        parts = {
            "a11": pa["a11"] @ pb["a11"],
            "a12": pa["a11"] @ pb["a12"]
            + pa["a12"] * pb["a22"][None, :]
            + pa["a13"] @ pb["a32"],
            "a13": pa["a11"] @ pb["a13"] + pa["a13"] @ pb["a33"],
            "a22": pa["a22"] * pb["a22"],
            "a32": pa["a32"] * pb["a22"][None, :] + pa["a33"] @ pb["a32"],
            "a33": pa["a33"] @ pb["a33"],
        }
    return _pack(structure, parts)


def structured_expm(m: StructuredFactor, step: float, order: int = 1) -> StructuredFactor:
    """Truncated Expm(step * m) evaluated inside the structure"""
    if order not in (1, 2):
        raise ContractError(f"Truncation order must be 1 or 2, got {order}")
    result = add(identity(m.structure, m.dtype), scale(m, step))
    if order == 2:
        result = add(result, scale(multiply(m, m), 0.5 * step * step))
    return result


def right_update(
    k: StructuredFactor, m: StructuredFactor, beta1: float, order: int = 1
) -> StructuredFactor:
    """K <- K (I - beta1 * m), or its second-order variant, within the class"""
    _require_same(k, m, "right_update")
    return multiply(k, structured_expm(m, -beta1, order))


# ---------------------------------------------------------------------------
# Dense x structured products
# ---------------------------------------------------------------------------


def _causal_convolve(rows: np.ndarray, bands: np.ndarray) -> np.ndarray:
    """out[:, j] = sum_{i <= j} rows[:, i] * bands[j - i], via FFT"""
    d = bands.shape[0]
    size = 2 * d
    spectrum = np.fft.rfft(rows, n=size, axis=1) * np.fft.rfft(bands, n=size)
    out = np.fft.irfft(spectrum, n=size, axis=1)[:, :d]
    return out.astype(np.result_type(rows, bands), copy=False)


def _toeplitz_rmul(x: np.ndarray, bands: np.ndarray, upper: bool) -> np.ndarray:
    if upper:
        return _causal_convolve(x, bands)
    # x @ L with L[i, j] = bands[i - j]: run the causal filter on reversed rows
    return _causal_convolve(x[:, ::-1], bands)[:, ::-1]


def _check_rmul(x: Matrix, factor: StructuredFactor, op: str) -> Matrix:
    x = as_matrix(x)
    if x.shape[1] != factor.dim:
        raise ShapeError(
            f"{op}: cannot multiply {x.shape[0]}x{x.shape[1]} by "
            f"{factor.structure.describe()}"
        )
    return x


def rmul(x: Matrix, factor: StructuredFactor) -> Matrix:
    """Dense product x @ K exploiting the structure of K"""
    x = _check_rmul(x, factor, "rmul")
    structure, parts = factor.structure, _unpack(factor)
    kind = structure.kind

    if kind == StructureKind.DENSE:
        return x @ parts["a"]
    if kind == StructureKind.DIAGONAL:
        return x * parts["diag"][None, :]
    if kind == StructureKind.BLOCK_DIAGONAL:
        out, start = [], 0
        for i, size in enumerate(block_sizes(structure)):
            out.append(x[:, start : start + size] @ parts[f"b{i}"])
            start += size
        return np.concatenate(out, axis=1)
    if kind in (StructureKind.TRIL, StructureKind.TRIU):
        return x @ to_dense(factor)
    if kind in TOEPLITZ_KINDS:
        return _toeplitz_rmul(x, parts["bands"], kind == StructureKind.TRIU_TOEPLITZ)
    if kind == StructureKind.RANK_K_TRIL:
        k = structure.k
        x1, x2 = x[:, :k], x[:, k:]
        return np.concatenate(
            [x1 @ parts["a11"], x1 @ parts["a12"] + x2 * parts["diag"][None, :]], axis=1
        )
    if kind == StructureKind.RANK_K_TRIU:
        k = structure.k
        x1, x2 = x[:, :k], x[:, k:]
        return np.concatenate(
            [x1 @ parts["a11"] + x2 @ parts["a21"], x2 * parts["diag"][None, :]], axis=1
        )
    s1, s2, s3 = _hierarchical_split(structure)
    x1, x2, x3 = x[:, s1], x[:, s2], x[:, s3]
    return np.concatenate(
        [
            x1 @ parts["a11"],
            x1 @ parts["a12"] + x2 * parts["a22"][None, :] + x3 @ parts["a32"],
            x1 @ parts["a13"] + x3 @ parts["a33"],
        ],
        axis=1,
    )


def rmul_t(x: Matrix, factor: StructuredFactor) -> Matrix:
    """Dense product x @ K^T exploiting the structure of K"""
    x = _check_rmul(x, factor, "rmul_t")
    structure, parts = factor.structure, _unpack(factor)
    kind = structure.kind

    if kind == StructureKind.DENSE:
        return x @ parts["a"].T
    if kind == StructureKind.DIAGONAL:
        return x * parts["diag"][None, :]
    if kind == StructureKind.BLOCK_DIAGONAL:
        out, start = [], 0
        for i, size in enumerate(block_sizes(structure)):
            out.append(x[:, start : start + size] @ parts[f"b{i}"].T)
            start += size
        return np.concatenate(out, axis=1)
    if kind in (StructureKind.TRIL, StructureKind.TRIU):
        return x @ to_dense(factor).T
    if kind in TOEPLITZ_KINDS:
        # the transpose of an upper Toeplitz factor is lower Toeplitz, same bands
        return _toeplitz_rmul(x, parts["bands"], kind == StructureKind.TRIL_TOEPLITZ)
    if kind == StructureKind.RANK_K_TRIL:
        k = structure.k
        x1, x2 = x[:, :k], x[:, k:]
        return np.concatenate(
            [x1 @ parts["a11"].T + x2 @ parts["a12"].T, x2 * parts["diag"][None, :]],
            axis=1,
        )
    if kind == StructureKind.RANK_K_TRIU:
        k = structure.k
        x1, x2 = x[:, :k], x[:, k:]
        return np.concatenate(
            [x1 @ parts["a11"].T, x1 @ parts["a21"].T + x2 * parts["diag"][None, :]],
            axis=1,
        )
    s1, s2, s3 = _hierarchical_split(structure)
    x1, x2, x3 = x[:, s1], x[:, s2], x[:, s3]
    return np.concatenate(
        [
            x1 @ parts["a11"].T + x2 @ parts["a12"].T + x3 @ parts["a13"].T,
            x2 * parts["a22"][None, :],
            x2 @ parts["a32"].T + x3 @ parts["a33"].T,
        ],
        axis=1,
    )


def congruence(k: StructuredFactor, u: Matrix) -> Matrix:
    """Dense symmetric K^T U K for symmetric U"""
    u = require_symmetric(as_matrix(u), "congruence")
    _check_dim(k.structure, u)
    uk = rmul(u, k)
    # (U K)^T K = K^T U K since U is symmetric
    result = rmul(uk.T, k)
    return 0.5 * (result + result.T)


def gram(k: StructuredFactor) -> Matrix:
    """Dense K^T K"""
    return congruence(k, np.eye(k.dim, dtype=k.dtype))


def gram_trace(k: StructuredFactor) -> float:
    """Tr(K^T K), the sum of squares of all structural entries"""
    if k.structure.kind in TOEPLITZ_KINDS:
        # band j occupies d - j entries
        multiplicity = np.arange(k.dim, 0, -1, dtype=k.dtype)
        return float(np.sum(multiplicity * k.coeffs * k.coeffs))
    return float(np.sum(k.coeffs * k.coeffs))


def sandwich_precondition(c: StructuredFactor, g: Matrix, k: StructuredFactor) -> Matrix:
    """C C^T G K K^T for G of shape d_o x d_i, as four structured products"""
    g = as_matrix(g)
    if g.shape != (c.dim, k.dim):
        raise ShapeError(
            f"Gradient of shape {g.shape[0]}x{g.shape[1]} does not match "
            f"C {c.structure.describe()} and K {k.structure.describe()}"
        )
    gkk = rmul_t(rmul(g, k), k)
    ct_gkk = rmul(gkk.T, c).T
    return rmul_t(ct_gkk.T, c).T

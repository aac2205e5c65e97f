"""
Named verification suites.

Each suite runs small seeded experiments and compares a measured quantity
with a bound, one CheckResult per property. The suites are: theorem1,
invariance, projections, closure, precision, quadratic.
"""

import logging
from typing import Callable, Dict, List, NamedTuple, Sequence

import numpy as np
import pandas as pd

from core import structured
from core.curvature import KroneckerCurvature, linear_layer_curvature
from core.linalg import dense_inverse, frobenius_norm
from core.precision import FORMAT_SPECS, PRESETS, NumericFormat, max_finite, quantize_array
from core.structured import FactorStructure, StructureKind, StructuredFactor
from models.tasks import (
    KroneckerQuadratic,
    kronecker_quadratic_eval,
    kronecker_quadratic_optimum,
    kronecker_quadratic_samples,
    make_kronecker_quadratic,
)
from optimizers.kfac import kfac_precond_update, preconditioner_residual
from optimizers.singd import ikfac_precond_update, singd_precond_update
from optimizers.state import init_layer_state
from optimizers.step import optimizer_step
from utils.config_utils import OptimizerConfig, StructureSpec

logger = logging.getLogger(__name__)

SUITES = ("theorem1", "invariance", "projections", "closure", "precision", "quadratic")

STRUCTURE_SPECS = (
    "dense",
    "diagonal",
    "block_diagonal(k=3)",
    "tril",
    "triu",
    "tril_toeplitz",
    "triu_toeplitz",
    "hierarchical(d2=2, d3=1)",
    "rank_k_tril(k=2)",
    "rank_k_triu(k=2)",
)


class CheckResult(NamedTuple):
    suite: str
    property: str
    measured: float
    bound: str
    passed: bool


def _at_most(suite: str, prop: str, measured: float, bound: float) -> CheckResult:
    return CheckResult(suite, prop, float(measured), f"<= {bound:g}", bool(measured <= bound))


def _above(suite: str, prop: str, measured: float, bound: float) -> CheckResult:
    return CheckResult(suite, prop, float(measured), f"> {bound:g}", bool(measured > bound))


def _between(suite: str, prop: str, measured: float, low: float, high: float) -> CheckResult:
    return CheckResult(
        suite, prop, float(measured), f"[{low:g}, {high:g}]", bool(low <= measured <= high)
    )


def _is_true(suite: str, prop: str, flag: bool) -> CheckResult:
    return CheckResult(suite, prop, float(bool(flag)), "== 1", bool(flag))


def random_spd(dim: int, rng, shift: float = 0.5) -> np.ndarray:
    """shift I + X^T X / (8 d): eigenvalues stay within about [shift, shift + 0.4]"""
    x = rng.normal(size=(2 * dim, dim))
    u = shift * np.eye(dim) + x.T @ x / (8 * dim)
    return 0.5 * (u + u.T)


def random_symmetric(dim: int, rng) -> np.ndarray:
    m = rng.normal(size=(dim, dim))
    return 0.5 * (m + m.T)


def random_member(structure: FactorStructure, rng) -> StructuredFactor:
    return StructuredFactor(structure, rng.normal(size=structured.storage_count(structure)))


def _dense(factor: StructuredFactor) -> np.ndarray:
    return structured.to_dense(factor)


# ---------------------------------------------------------------------------
# theorem1: IKFAC tracks the damped KFAC inverse
# ---------------------------------------------------------------------------


def kfac_tracking_gap(beta1: float, steps: int = 20, dim: int = 8, damping: float = 1e-2, seed: int = 0) -> float:
    """||K K^T - (S_K + lambda I)^-1||_F after `steps` shared curvature updates

    Both methods start from the same preconditioner: K = I and
    S_K = (1 - lambda) I, so (S_K + lambda I)^-1 = I = K K^T.
    """
    rng = np.random.default_rng(seed)
    stream = [random_spd(dim, rng) for _ in range(steps)]
    cfg = OptimizerConfig(name="ikfac", beta1=beta1, damping=damping)
    kfac = init_layer_state("kfac", cfg, 1, dim)
    kfac = kfac.copy_with(S_K=(1.0 - damping) * np.eye(dim), S_C=(1.0 - damping) * np.eye(1))
    ikfac = init_layer_state("ikfac", cfg, 1, dim)
    G = np.eye(1)
    for U in stream:
        curv = KroneckerCurvature(U, G)
        kfac = kfac_precond_update(kfac, curv, cfg)
        ikfac = ikfac_precond_update(ikfac, curv, cfg)
    K = _dense(ikfac.K)
    return frobenius_norm(K @ K.T - kfac.S_K_inv)


def ikfac_oracle_step(K: np.ndarray, U: np.ndarray, damping: float, beta1: float) -> np.ndarray:
    """Dense IKFAC factor step K (I - beta1/2 (K^T U K + lambda K^T K - I))"""
    m = 0.5 * (K.T @ U @ K + damping * K.T @ K - np.eye(K.shape[0]))
    return K @ (np.eye(K.shape[0]) - beta1 * m)


def substitution_gaps(steps: int = 50, d_in: int = 6, d_out: int = 4, seed: int = 1):
    """Max entry gaps over a trajectory between IKFAC, trace-substituted
    SINGD and a literal dense IKFAC oracle

    Returns:
        (gap IKFAC vs substituted SINGD, gap IKFAC vs dense oracle)
    """
    rng = np.random.default_rng(seed)
    cfg = OptimizerConfig(name="singd", beta1=0.05, damping=1e-2, alpha1=0.0)
    ikfac = init_layer_state("ikfac", cfg, d_out, d_in)
    singd = init_layer_state("singd", cfg, d_out, d_in)
    K_oracle, C_oracle = np.eye(d_in), np.eye(d_out)
    gap_singd, gap_oracle = 0.0, 0.0
    for _ in range(steps):
        curv = KroneckerCurvature(random_spd(d_in, rng), random_spd(d_out, rng))
        ikfac = ikfac_precond_update(ikfac, curv, cfg)
        singd = singd_precond_update(singd, curv, cfg, adaptive=False)
        K_oracle = ikfac_oracle_step(K_oracle, curv.U, cfg.damping, cfg.beta1)
        C_oracle = ikfac_oracle_step(C_oracle, curv.G, cfg.damping, cfg.beta1)
        gap_singd = max(
            gap_singd,
            float(np.max(np.abs(ikfac.K.coeffs - singd.K.coeffs))),
            float(np.max(np.abs(ikfac.C.coeffs - singd.C.coeffs))),
        )
        gap_oracle = max(
            gap_oracle,
            float(np.max(np.abs(_dense(ikfac.K) - K_oracle))),
            float(np.max(np.abs(_dense(ikfac.C) - C_oracle))),
        )
    return gap_singd, gap_oracle


def expm_consistency_gap(beta1: float, dim: int = 6, damping: float = 1e-2, seed: int = 2) -> float:
    """One dense INGD step against the damped EMA of the precision

    With d_o = 1, G = 1 and C = 1 the K update of INGD (alpha1 = 0) should
    match P' = ((1 - beta1) P^-1 + beta1 (U + lambda I))^-1 up to O(beta1^2),
    where P = K K^T.
    """
    rng = np.random.default_rng(seed)
    cfg = OptimizerConfig(name="singd", beta1=beta1, damping=damping)
    state = init_layer_state("singd", cfg, 1, dim)
    K0 = np.eye(dim) + 0.1 * np.tril(rng.normal(size=(dim, dim)))
    state = state.copy_with(K=structured.from_dense(state.K.structure, K0))
    U = random_spd(dim, rng)
    state = singd_precond_update(state, KroneckerCurvature(U, np.eye(1)), cfg)
    K1 = _dense(state.K)
    P0 = K0 @ K0.T
    target = dense_inverse((1.0 - beta1) * dense_inverse(P0) + beta1 * (U + damping * np.eye(dim)))
    return frobenius_norm(K1 @ K1.T - target)


def run_kfac_tracking_suite() -> List[CheckResult]:
    suite = "theorem1"
    results = []
    gaps = {beta: kfac_tracking_gap(beta) for beta in (0.1, 0.05, 0.025)}
    results.append(_between(suite, "gap_ratio_0.05_over_0.1", gaps[0.05] / gaps[0.1], 0.15, 0.40))
    results.append(_between(suite, "gap_ratio_0.025_over_0.05", gaps[0.025] / gaps[0.05], 0.15, 0.40))
    gap_singd, gap_oracle = substitution_gaps()
    results.append(_at_most(suite, "ikfac_equals_substituted_singd", gap_singd, 1e-14))
    results.append(_at_most(suite, "ikfac_matches_dense_oracle", gap_oracle, 1e-10))
    expm = {beta: expm_consistency_gap(beta) for beta in (0.1, 0.05)}
    results.append(_between(suite, "expm_step_gap_ratio", expm[0.05] / expm[0.1], 0.15, 0.40))
    return results


# ---------------------------------------------------------------------------
# invariance
# ---------------------------------------------------------------------------


def scale_invariance_gap(
    name: str,
    structure: str,
    alpha: float,
    steps: int = 50,
    d_in: int = 6,
    d_out: int = 5,
    seed: int = 3,
) -> float:
    """Max relative factor gap between runs fed (U, G) and (alpha U, G / alpha)"""
    rng = np.random.default_rng(seed)
    spec = StructureSpec.model_validate(structure)
    cfg = OptimizerConfig(
        name=name, beta1=0.03, damping=1e-3, alpha1=0.5 if name == "singd" else 0.0,
        structure_K=spec, structure_C=spec,
    )
    plain = init_layer_state(name, cfg, d_out, d_in)
    scaled = init_layer_state(name, cfg, d_out, d_in)
    update = singd_precond_update if name == "singd" else ikfac_precond_update
    gap = 0.0
    for _ in range(steps):
        curv = KroneckerCurvature(random_spd(d_in, rng, 0.2), random_spd(d_out, rng, 0.2))
        plain = update(plain, curv, cfg)
        scaled = update(scaled, curv.rescaled(alpha), cfg)
        for a, b in ((plain.K, scaled.K), (plain.C, scaled.C)):
            scale = max(1.0, float(np.max(np.abs(a.coeffs))))
            gap = max(gap, float(np.max(np.abs(a.coeffs - b.coeffs))) / scale)
    return gap


def run_invariance_suite() -> List[CheckResult]:
    suite = "invariance"
    results = []
    for structure in STRUCTURE_SPECS:
        for alpha in (0.1, 10.0):
            gap = scale_invariance_gap("singd", structure, alpha)
            results.append(_at_most(suite, f"singd_{structure}_alpha_{alpha:g}", gap, 1e-10))
    for alpha in (0.1, 10.0):
        gap = scale_invariance_gap("ikfac", "dense", alpha)
        results.append(_above(suite, f"ikfac_dense_alpha_{alpha:g}_differs", gap, 1e-3))
    return results


# ---------------------------------------------------------------------------
# projections
# ---------------------------------------------------------------------------


def projection_oracle(structure: FactorStructure, m: np.ndarray) -> np.ndarray:
    """Dense subspace projection written entry by entry from the table rules"""
    d, kind = structure.dim, structure.kind
    out = np.zeros_like(m)
    if kind in (StructureKind.TRIL_TOEPLITZ, StructureKind.TRIU_TOEPLITZ):
        for j in range(d):
            total = 0.0
            for t in range(d - j):
                total += m[t, t + j]
            band = total / (d - j) * (2.0 if j > 0 else 1.0)
            for t in range(d - j):
                if kind == StructureKind.TRIU_TOEPLITZ:
                    out[t, t + j] = band
                else:
                    out[t + j, t] = band
        return out

    weight = np.zeros_like(m)
    if kind == StructureKind.DENSE:
        weight[:] = 1.0
    elif kind == StructureKind.DIAGONAL:
        weight[np.diag_indices(d)] = 1.0
    elif kind == StructureKind.BLOCK_DIAGONAL:
        for start in range(0, d, structure.k):
            stop = min(start + structure.k, d)
            weight[start:stop, start:stop] = 1.0
    elif kind == StructureKind.TRIL:
        for i in range(d):
            for j in range(i + 1):
                weight[i, j] = 1.0 if i == j else 2.0
    elif kind == StructureKind.TRIU:
        for i in range(d):
            for j in range(i, d):
                weight[i, j] = 1.0 if i == j else 2.0
    elif kind in (StructureKind.RANK_K_TRIL, StructureKind.RANK_K_TRIU):
        k = structure.k
        weight[:k, :k] = 1.0
        for i in range(k, d):
            weight[i, i] = 1.0
        if kind == StructureKind.RANK_K_TRIL:
            weight[:k, k:] = 2.0
        else:
            weight[k:, :k] = 2.0
    elif kind == StructureKind.HIERARCHICAL:
        d2, d3 = structure.d2, structure.d3
        mid = d - d2 - d3
        weight[:d2, :d2] = 1.0
        weight[:d2, d2:] = 2.0
        for i in range(d2, d2 + mid):
            weight[i, i] = 1.0
        weight[d2 + mid :, d2 : d2 + mid] = 2.0
        weight[d2 + mid :, d2 + mid :] = 1.0
    return weight * m


def run_projections_suite(samples: int = 100, dim: int = 7, seed: int = 4) -> List[CheckResult]:
    suite = "projections"
    rng = np.random.default_rng(seed)
    results = []
    for text in STRUCTURE_SPECS:
        structure = StructureSpec.model_validate(text).bind(dim)
        worst, worst_linear = 0.0, 0.0
        for _ in range(samples):
            m, n = random_symmetric(dim, rng), random_symmetric(dim, rng)
            projected = _dense(structured.project(structure, m))
            worst = max(worst, float(np.max(np.abs(projected - projection_oracle(structure, m)))))
            combined = _dense(structured.project(structure, 2.5 * m - 0.5 * n))
            separate = 2.5 * projected - 0.5 * _dense(structured.project(structure, n))
            worst_linear = max(worst_linear, float(np.max(np.abs(combined - separate))))
        results.append(_at_most(suite, f"{text}_matches_oracle", worst, 1e-14))
        results.append(_at_most(suite, f"{text}_linear", worst_linear, 1e-12))

    tril = FactorStructure(StructureKind.TRIL, dim)
    worst_identity, worst_dense = 0.0, 0.0
    for _ in range(samples):
        m = random_symmetric(dim, rng)
        p = _dense(structured.project(tril, m))
        worst_identity = max(worst_identity, float(np.max(np.abs(p + p.T - 2.0 * m))))
        dense = _dense(structured.project(FactorStructure(StructureKind.DENSE, dim), m))
        worst_dense = max(worst_dense, float(np.max(np.abs(dense - m))))
    results.append(_at_most(suite, "tril_identity", worst_identity, 1e-12))
    results.append(_at_most(suite, "dense_projection_is_identity", worst_dense, 0.0))
    return results


# ---------------------------------------------------------------------------
# closure
# ---------------------------------------------------------------------------


def closure_mass(structure: FactorStructure, pairs: int, rng) -> Dict[str, float]:
    """Worst off-support mass of dense products and right updates, and the
    worst gap between the structured and dense products"""
    outside = ~structured.structure_support(structure)
    worst_product, worst_update, worst_gap = 0.0, 0.0, 0.0
    for _ in range(pairs):
        a, b = random_member(structure, rng), random_member(structure, rng)
        dense_product = _dense(a) @ _dense(b)
        worst_product = max(worst_product, float(np.max(np.abs(dense_product[outside]), initial=0.0)))
        product = _dense(structured.multiply(a, b))
        worst_gap = max(worst_gap, float(np.max(np.abs(product - dense_product))))
        updated = _dense(structured.right_update(a, structured.scale(b, 0.1), 0.5, order=2))
        worst_update = max(worst_update, float(np.max(np.abs(updated[outside]), initial=0.0)))
    return {"product": worst_product, "update": worst_update, "gap": worst_gap}


def run_closure_suite(pairs: int = 100, dims: Sequence[int] = (4, 8, 16), seed: int = 5) -> List[CheckResult]:
    suite = "closure"
    rng = np.random.default_rng(seed)
    results = []
    for text in STRUCTURE_SPECS:
        spec = StructureSpec.model_validate(text)
        for dim in dims:
            structure = spec.bind(dim)
            mass = closure_mass(structure, pairs, rng)
            label = f"{text}_d{dim}"
            results.append(_at_most(suite, f"{label}_product_support", mass["product"], 1e-14))
            results.append(_at_most(suite, f"{label}_update_support", mass["update"], 1e-14))
            scale = 1e-12 * dim
            results.append(_at_most(suite, f"{label}_product_matches_dense", mass["gap"], scale))
    return results


# ---------------------------------------------------------------------------
# precision
# ---------------------------------------------------------------------------


def reference_quantize(x, fmt: NumericFormat) -> np.ndarray:
    """Round float64 values to fmt by integer manipulation of their bit patterns

    Independent of quantize_array: reads sign, exponent and fraction fields,
    shifts the 53-bit significand to the target quantum and rounds half to
    even on the discarded bits.
    """
    spec = FORMAT_SPECS[NumericFormat(fmt)]
    values = np.ascontiguousarray(np.asarray(x, dtype=np.float64)).reshape(-1)
    bits = values.view(np.uint64)
    negative = (bits >> np.uint64(63)) == 1
    biased = ((bits >> np.uint64(52)) & np.uint64(0x7FF)).astype(np.int64)
    fraction = bits & np.uint64((1 << 52) - 1)

    out = np.empty_like(values)
    for i in range(values.shape[0]):
        value = values[i]
        if not np.isfinite(value) or value == 0.0:
            out[i] = value
            continue
        if biased[i] == 0:
            significand, scale_exp, lead = int(fraction[i]), -1074, -1023
        else:
            significand = int(fraction[i]) | (1 << 52)
            scale_exp, lead = int(biased[i]) - 1075, int(biased[i]) - 1023
        quantum = max(lead, spec.emin) - (spec.significand_bits - 1)
        shift = quantum - scale_exp
        if shift <= 0:
            rounded, exponent = significand, scale_exp
        elif shift > 60:
            rounded, exponent = 0, quantum
        else:
            kept = significand >> shift
            dropped = significand & ((1 << shift) - 1)
            half = 1 << (shift - 1)
            if dropped > half or (dropped == half and kept & 1):
                kept += 1
            rounded, exponent = kept, quantum
        magnitude = float(np.ldexp(float(rounded), exponent))
        if magnitude > max_finite(fmt):
            magnitude = np.inf
        out[i] = -magnitude if negative[i] else magnitude
    return out.reshape(np.shape(x))


def precision_samples(count: int, fmt: NumericFormat, seed: int = 6) -> np.ndarray:
    """Random values spanning subnormals to overflow, a tenth of them exact ties"""
    spec = FORMAT_SPECS[NumericFormat(fmt)]
    rng = np.random.default_rng(seed)
    exponents = rng.integers(spec.emin - spec.significand_bits - 2, spec.emax + 2, size=count)
    values = np.ldexp(rng.uniform(0.5, 1.0, size=count), exponents)
    ties = count // 10
    odd = 2 * rng.integers(1 << (spec.significand_bits - 1), 1 << spec.significand_bits, size=ties) + 1
    tie_exp = rng.integers(spec.emin, spec.emax - 1, size=ties) - spec.significand_bits
    values[:ties] = np.ldexp(odd.astype(np.float64), tie_exp)
    signs = np.where(rng.random(count) < 0.5, -1.0, 1.0)
    return signs * values


def low_precision_run(
    name: str,
    structure: str = "dense",
    steps: int = 500,
    preset: str = "bf16",
    condition: float = 1e6,
    dim: int = 4,
    seed: int = 7,
) -> Dict[str, float]:
    """Train on the ill-conditioned quadratic under a precision preset

    Returns:
        initial_loss, final_loss, nonfinite (0/1), events, max_residual
    """
    task = make_kronecker_quadratic(dim, dim, condition, seed=seed)
    spec = StructureSpec.model_validate(structure)
    cfg = OptimizerConfig(
        name=name, beta1=0.1, beta2=0.1, damping=1e-6,
        structure_K=spec, structure_C=spec, precision=PRESETS[preset],
    )
    return run_quadratic(task, cfg, steps, seed=seed)


def run_quadratic(task: KroneckerQuadratic, cfg: OptimizerConfig, steps: int, seed: int = 0, W0=None) -> Dict:
    """Optimize the quadratic with exact gradients and exact curvature

    Stops at the first non-finite loss, gradient or weight.
    """
    policy = cfg.precision
    if W0 is None:
        W0 = np.random.default_rng(seed).normal(size=task.shape)
    W = policy.store(W0, "parameters")
    state = init_layer_state(cfg.name, cfg, task.d_out, task.d_in)
    initial = kronecker_quadratic_eval(task, np.asarray(W, dtype=np.float64))
    losses, grad_norms, events = [initial.loss], [frobenius_norm(initial.grad)], []
    max_residual, nonfinite = 0.0, False
    for _ in range(steps):
        evaluation = kronecker_quadratic_eval(task, np.asarray(W, dtype=np.float64))
        outcome = optimizer_step(state, evaluation.grad, W, evaluation.curvature, cfg)
        state, W = outcome.state, outcome.weights
        events.extend(outcome.events)
        if cfg.name == "kfac":
            residual = preconditioner_residual(state, cfg)
            max_residual = max(max_residual, residual) if np.isfinite(residual) else np.inf
        after = kronecker_quadratic_eval(task, np.asarray(W, dtype=np.float64))
        losses.append(after.loss)
        grad_norms.append(frobenius_norm(after.grad))
        nonfinite = not np.isfinite(after.loss) or not np.all(np.isfinite(W))
        if nonfinite:
            break
    return {
        "initial_loss": losses[0],
        "final_loss": losses[-1],
        "min_grad_norm": float(np.nanmin(grad_norms)),
        "final_grad_norm": grad_norms[-1],
        "nonfinite": float(nonfinite),
        "events": float(len(events)),
        "max_residual": float(max_residual),
        "weights": np.asarray(W, dtype=np.float64),
        "diverged": float(state.diverged or nonfinite),
    }


def _nondecreasing(values: np.ndarray) -> bool:
    return bool(np.all(values[1:] >= values[:-1]))


def run_precision_suite(samples: int = 100_000, robustness_steps: int = 500) -> List[CheckResult]:
    suite = "precision"
    results = []
    for fmt in (NumericFormat.BF16, NumericFormat.FP16):
        x = precision_samples(samples, fmt)
        q = quantize_array(x, fmt)
        mismatches = int(np.sum(~((q == reference_quantize(x, fmt)) | (np.isnan(q)))))
        results.append(_at_most(suite, f"{fmt.value}_bit_oracle_mismatches", mismatches, 0))
        results.append(_is_true(suite, f"{fmt.value}_idempotent", np.array_equal(quantize_array(q, fmt), q)))
        ordered = np.sort(x)
        results.append(_is_true(suite, f"{fmt.value}_monotone", _nondecreasing(quantize_array(ordered, fmt))))

    rng = np.random.default_rng(8)
    normal = np.ldexp(rng.uniform(1.0, 2.0, size=samples), rng.integers(-120, 120, size=samples))
    relative = np.max(np.abs(quantize_array(normal, NumericFormat.BF16) - normal) / normal)
    results.append(_at_most(suite, "bf16_relative_error", relative, 2.0**-8))

    for name, structure in (("ikfac", "dense"), ("singd", "diagonal"), ("singd", "dense")):
        run = low_precision_run(name, structure, steps=robustness_steps)
        label = f"bf16_{name}_{structure}"
        results.append(_at_most(suite, f"{label}_nonfinite", run["nonfinite"], 0))
        results.append(_is_true(suite, f"{label}_loss_decreased", run["final_loss"] < run["initial_loss"]))
    kfac = low_precision_run("kfac", steps=robustness_steps)
    unstable = kfac["events"] > 0 or kfac["nonfinite"] > 0 or kfac["max_residual"] > 0.1
    results.append(_is_true(suite, "bf16_kfac_instability_recorded", unstable))
    return results


# ---------------------------------------------------------------------------
# quadratic
# ---------------------------------------------------------------------------


def run_quadratic_suite(steps: int = 200) -> List[CheckResult]:
    suite = "quadratic"
    task = make_kronecker_quadratic(4, 4, condition=1e3, seed=9)
    inputs, out_grads = kronecker_quadratic_samples(task)
    curv = linear_layer_curvature(inputs, out_grads)
    recovery = max(float(np.max(np.abs(curv.U - task.A))), float(np.max(np.abs(curv.G - task.B))))

    cfg = OptimizerConfig(name="singd", beta1=0.5, beta2=0.5, damping=1e-8)
    run = run_quadratic(task, cfg, steps, seed=9)
    optimum = kronecker_quadratic_optimum(task)
    return [
        _at_most(suite, "curvature_recovers_factors", recovery, 1e-12),
        _at_most(suite, "singd_dense_min_grad_norm", run["min_grad_norm"], 1e-6),
        _at_most(suite, "singd_dense_matches_oracle", float(np.max(np.abs(run["weights"] - optimum))), 1e-5),
    ]


SUITE_RUNNERS: Dict[str, Callable[[], List[CheckResult]]] = {
    "theorem1": run_kfac_tracking_suite,
    "invariance": run_invariance_suite,
    "projections": run_projections_suite,
    "closure": run_closure_suite,
    "precision": run_precision_suite,
    "quadratic": run_quadratic_suite,
}


def verify(suite: str) -> pd.DataFrame:
    """Run one named suite, or all of them with suite == "all"

    Returns:
        DataFrame with columns suite, property, measured, bound, passed
    """
    names = SUITES if suite == "all" else (suite,)
    rows: List[CheckResult] = []
    for name in names:
        if name not in SUITE_RUNNERS:
            raise ValueError(f"Unknown suite '{name}'; choose from {', '.join(SUITES)}")
        logger.info(f"Running verification suite {name}")
        suite_rows = SUITE_RUNNERS[name]()
        failed = [r.property for r in suite_rows if not r.passed]
        if failed:
            logger.warning(f"Suite {name}: {len(failed)} failing properties: {', '.join(failed)}")
        else:
            logger.info(f"Suite {name}: all {len(suite_rows)} properties passed")
        rows.extend(suite_rows)
    return pd.DataFrame(rows, columns=list(CheckResult._fields))

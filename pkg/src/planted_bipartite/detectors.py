"""Test statistics, thresholds, and the composite detector.

Three statistics are implemented:

- total degree: the standardized sum of all entries;
- truncated degree: per-column counts are passed through the Bennett kernel
  w, recentred by the conditional mean nu_tau, and summed over columns whose
  standardized count exceeds tau (kernel Bin(n1, p0) for axis 1);
- max truncated degree: the same column statistic computed from row subsets
  of size k_scan (kernel Bin(k_scan, p0)), maximized by exact enumeration
  over all subsets.

Thresholds come either from closed-form expressions with configurable
constants (ANALYTIC) or from the empirical (1 - alpha)-quantile of the
statistic under null simulation (CALIBRATED, the default).  The composite
detector dispatches among the tests according to the argmin branch of the
rate R_tilde.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from itertools import combinations

import numpy as np

from . import binomial_kernel as bk
from .errors import BudgetError, ConfigError, ParameterError
from .graph_model import AdjacencyMatrix, ProblemShape
from .rates import Branch, RateConstants, log_binom, rate_bundle
from .rng import TAG_CAL, batch_cell_uniforms, derive_seed

DEFAULT_SUBSET_BUDGET = 10**6
_TRIAL_CHUNK = 512


class DetectorTag(Enum):
    TOTAL_DEGREE = "TOTAL_DEGREE"
    TRUNC_DEGREE_AXIS1 = "TRUNC_DEGREE_AXIS1"
    TRUNC_DEGREE_AXIS2 = "TRUNC_DEGREE_AXIS2"
    MAX_TRUNC_AXIS1 = "MAX_TRUNC_AXIS1"
    MAX_TRUNC_AXIS2 = "MAX_TRUNC_AXIS2"
    DELTA_STAR = "DELTA_STAR"


_TRUNC_TAGS = {
    DetectorTag.TRUNC_DEGREE_AXIS1,
    DetectorTag.TRUNC_DEGREE_AXIS2,
    DetectorTag.MAX_TRUNC_AXIS1,
    DetectorTag.MAX_TRUNC_AXIS2,
}
_MAX_TAGS = {DetectorTag.MAX_TRUNC_AXIS1, DetectorTag.MAX_TRUNC_AXIS2}


@dataclass(frozen=True)
class DetectorKind:
    """A statistic selector: which test, at what truncation, scanning what
    subset size.  DELTA_STAR carries no parameters; its sub-test and tau are
    resolved from the shape and constants at run time."""

    tag: DetectorTag
    tau: float | None = None
    k_scan: int | None = None

    def __post_init__(self):
        if (self.tau is not None) != (self.tag in _TRUNC_TAGS):
            raise ParameterError(f"tau must be given exactly for truncated tests, tag={self.tag}")
        if (self.k_scan is not None) != (self.tag in _MAX_TAGS):
            raise ParameterError(f"k_scan must be given exactly for max tests, tag={self.tag}")
        if self.tau is not None and self.tau < 0:
            raise ParameterError(f"tau must be nonnegative, got {self.tau}")
        if self.k_scan is not None and self.k_scan < 1:
            raise ParameterError(f"k_scan must be a positive integer, got {self.k_scan}")


class ThresholdMode(Enum):
    ANALYTIC = "ANALYTIC"
    CALIBRATED = "CALIBRATED"


@dataclass(frozen=True)
class ThresholdSpec:
    mode: ThresholdMode
    alpha: float
    trials: int = 10_000
    seed: int = 0
    value: float | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.mode is ThresholdMode.CALIBRATED and self.trials < 100:
            raise ParameterError(f"calibration needs trials >= 100, got {self.trials}")


@dataclass(frozen=True)
class TestDecision:
    statistic: float
    threshold: float
    reject: bool


def total_degree(A: AdjacencyMatrix, p0: float) -> float:
    """t = sum_ij (A_ij - p0) / sqrt(n1 n2 p0 (1 - p0))."""
    _check_p0(p0)
    n1, n2 = A.n1, A.n2
    return (int(A.bits.sum()) - n1 * n2 * p0) / math.sqrt(n1 * n2 * p0 * (1.0 - p0))


def truncated_degree(A: AdjacencyMatrix, p0: float, tau: float, axis: int = 1) -> float:
    """Sum over columns j with standardized count >= tau of w(count_j) - nu_tau.

    axis=1 sums each column over the n1 rows (kernel Bin(n1, p0)); axis=2
    runs the same statistic on the transpose.
    """
    bits = _oriented(A, axis)
    return float(_batch_truncated(bits[None, :, :], p0, tau)[0])


def max_truncated_degree(
    A: AdjacencyMatrix,
    p0: float,
    tau: float,
    k_scan: int,
    axis: int = 1,
    budget: int = DEFAULT_SUBSET_BUDGET,
) -> float:
    """Exact maximum of the truncated-degree statistic over all k_scan-row
    subsets (kernel Bin(k_scan, p0)); raises BudgetError rather than
    approximating when there are more than `budget` subsets."""
    bits = _oriented(A, axis)
    return float(_batch_max_truncated(bits[None, :, :], p0, tau, k_scan, budget)[0])


def _check_p0(p0: float) -> None:
    if not 0.0 < p0 < 1.0:
        raise ParameterError(f"p0 must lie in (0, 1), got {p0}")


def _oriented(A: AdjacencyMatrix, axis: int) -> np.ndarray:
    if axis not in (1, 2):
        raise ParameterError(f"axis must be 1 or 2, got {axis}")
    return A.bits if axis == 1 else A.bits.T


def _batch_total(bits: np.ndarray, p0: float) -> np.ndarray:
    _check_p0(p0)
    n1, n2 = bits.shape[1], bits.shape[2]
    sums = bits.reshape(bits.shape[0], -1).sum(axis=1, dtype=np.int64)
    return (sums - n1 * n2 * p0) / math.sqrt(n1 * n2 * p0 * (1.0 - p0))


def _batch_truncated(bits: np.ndarray, p0: float, tau: float) -> np.ndarray:
    """bits: (T, n1, n2) with axis already oriented; returns (T,)."""
    _check_p0(p0)
    if tau < 0:
        raise ParameterError(f"tau must be nonnegative, got {tau}")
    n1 = bits.shape[1]
    kern = bk.BennettKernel(n1, p0)
    k_min = bk.z_threshold_to_count(tau, kern)
    nu_tau = bk.nu(tau, kern)
    w_table = bk.w_stat(np.arange(n1 + 1), kern)
    counts = bits.sum(axis=1, dtype=np.int64)
    contrib = np.where(counts >= k_min, w_table[counts] - nu_tau, 0.0)
    return contrib.sum(axis=1)


def _subset_matrix(n: int, k: int, budget: int) -> np.ndarray:
    """(S, n) float64 indicator rows for all k-subsets of [n], lexicographic."""
    count = math.comb(n, k)
    if count > budget:
        raise BudgetError(f"{count} subsets of size {k} from {n} exceed budget {budget}")
    M = np.zeros((count, n))
    for s, J in enumerate(combinations(range(n), k)):
        M[s, list(J)] = 1.0
    return M


def _batch_max_truncated(
    bits: np.ndarray, p0: float, tau: float, k_scan: int, budget: int
) -> np.ndarray:
    """bits: (T, n1, n2) with axis already oriented; returns (T,)."""
    _check_p0(p0)
    if tau < 0:
        raise ParameterError(f"tau must be nonnegative, got {tau}")
    n1 = bits.shape[1]
    if k_scan > n1:
        raise ParameterError(f"k_scan={k_scan} exceeds row count {n1}")
    kern = bk.BennettKernel(k_scan, p0)
    k_min = bk.z_threshold_to_count(tau, kern)
    nu_tau = bk.nu(tau, kern)
    w_table = bk.w_stat(np.arange(k_scan + 1), kern)
    M = _subset_matrix(n1, k_scan, budget)
    out = np.empty(bits.shape[0])
    # Chunk trials: the (chunk, S, n2) count tensor is the memory hot spot.
    chunk = max(1, _TRIAL_CHUNK * 512 // max(1, M.shape[0])) or 1
    for lo in range(0, bits.shape[0], chunk):
        blk = bits[lo : lo + chunk].astype(np.float64)
        counts = np.einsum("sn,tnj->tsj", M, blk).round().astype(np.int64)
        contrib = np.where(counts >= k_min, w_table[counts] - nu_tau, 0.0)
        out[lo : lo + chunk] = contrib.sum(axis=2).max(axis=1)
    return out


def statistic(
    A: AdjacencyMatrix,
    p0: float,
    kind: DetectorKind,
    budget: int = DEFAULT_SUBSET_BUDGET,
) -> float:
    """Evaluate the selected statistic on one matrix."""
    return float(_batch_statistic(A.bits[None, :, :], p0, kind, budget)[0])


def _batch_statistic(
    bits: np.ndarray, p0: float, kind: DetectorKind, budget: int
) -> np.ndarray:
    tag = kind.tag
    if tag is DetectorTag.TOTAL_DEGREE:
        return _batch_total(bits, p0)
    if tag is DetectorTag.TRUNC_DEGREE_AXIS1:
        return _batch_truncated(bits, p0, kind.tau)
    if tag is DetectorTag.TRUNC_DEGREE_AXIS2:
        return _batch_truncated(bits.transpose(0, 2, 1), p0, kind.tau)
    if tag is DetectorTag.MAX_TRUNC_AXIS1:
        return _batch_max_truncated(bits, p0, kind.tau, kind.k_scan, budget)
    if tag is DetectorTag.MAX_TRUNC_AXIS2:
        return _batch_max_truncated(bits.transpose(0, 2, 1), p0, kind.tau, kind.k_scan, budget)
    raise ParameterError(f"statistic undefined for tag {tag}; resolve DELTA_STAR first")


@dataclass(frozen=True)
class AnalyticThresholds:
    """Closed-form thresholds and truncation levels for all sub-tests.

    Numbered by test: 1/1p truncated degree axes 1/2, 2/2p total degree,
    3/4 max truncated degree axes 1/2.
    """

    h1: float
    h1p: float
    h2: float
    h2p: float
    h3: float
    h4: float
    tau1: float
    tau2: float
    tau3: float
    tau4: float


def _trunc_threshold(n2: float, log_arg: float, log_term: float, consts: RateConstants) -> float:
    inner = n2 * math.exp(-consts.c_prime * math.log1p(log_arg)) * log_term
    return consts.C_star * (math.sqrt(inner) + log_term)


def analytic_thresholds(
    shape: ProblemShape,
    p0: float,
    alpha: float,
    consts: RateConstants = RateConstants(),
) -> AnalyticThresholds:
    """Threshold formulas with the configured constants C_star, c_prime,
    C_tau.  The constants are existence-only in the theory; these values are
    for formula-shape diagnostics, not exact Type I control."""
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    _check_p0(p0)
    n1, n2, k1, k2 = shape.n1, shape.n2, shape.k1, shape.k2
    la = math.log(2.0 / alpha)
    h2 = math.sqrt(4.0 * la)
    lb1 = log_binom(n1, k1)
    lb2 = log_binom(n2, k2)
    arg1 = n2 / k2**2
    arg2 = n1 / k1**2
    arg3 = (n2 / k2**2) * lb1
    arg4 = (n1 / k1**2) * lb2
    return AnalyticThresholds(
        h1=_trunc_threshold(n2, arg1, la, consts),
        h1p=_trunc_threshold(n1, arg2, la, consts),
        h2=h2,
        h2p=h2,
        h3=_trunc_threshold(n2, arg3, la + lb1, consts),
        h4=_trunc_threshold(n1, arg4, la + lb2, consts),
        tau1=math.sqrt(consts.C_tau * math.log1p(arg1)),
        tau2=math.sqrt(consts.C_tau * math.log1p(arg2)),
        tau3=math.sqrt(consts.C_tau * math.log1p(arg3)),
        tau4=math.sqrt(consts.C_tau * math.log1p(arg4)),
    )


def delta_star_subtest(
    shape: ProblemShape, p0: float, consts: RateConstants = RateConstants()
) -> DetectorKind:
    """Resolve which sub-test the composite detector runs for this shape,
    with its truncation level and scan size."""
    at = analytic_thresholds(shape, p0, alpha=0.5, consts=consts)
    branch = rate_bundle(shape, consts).branch
    if branch is Branch.MAX_TRUNC_1:
        return DetectorKind(DetectorTag.MAX_TRUNC_AXIS1, tau=at.tau3, k_scan=shape.k1)
    if branch is Branch.MAX_TRUNC_2:
        return DetectorKind(DetectorTag.MAX_TRUNC_AXIS2, tau=at.tau4, k_scan=shape.k2)
    if branch is Branch.BRANCH_A:
        if shape.n2 / shape.k2**2 >= consts.c1:
            return DetectorKind(DetectorTag.TRUNC_DEGREE_AXIS1, tau=at.tau1)
        return DetectorKind(DetectorTag.TOTAL_DEGREE)
    if shape.n1 / shape.k1**2 >= consts.c1:
        return DetectorKind(DetectorTag.TRUNC_DEGREE_AXIS2, tau=at.tau2)
    return DetectorKind(DetectorTag.TOTAL_DEGREE)


def resolve_kind(
    kind: DetectorKind, shape: ProblemShape, p0: float, consts: RateConstants
) -> DetectorKind:
    """Replace DELTA_STAR by its concrete sub-test; other kinds pass through."""
    if kind.tag is DetectorTag.DELTA_STAR:
        return delta_star_subtest(shape, p0, consts)
    return kind


def null_statistics(
    kind: DetectorKind,
    shape: ProblemShape,
    p0: float,
    trials: int,
    seed: int,
    budget: int = DEFAULT_SUBSET_BUDGET,
) -> np.ndarray:
    """Statistic values over `trials` independent null draws, computed in
    fixed-size batches with per-trial derived seeds; order-deterministic."""
    base = derive_seed(seed, TAG_CAL)
    out = np.empty(trials)
    for lo in range(0, trials, _TRIAL_CHUNK):
        hi = min(lo + _TRIAL_CHUNK, trials)
        seeds = (np.uint64(base) + np.arange(lo + 1, hi + 1, dtype=np.uint64))
        u = batch_cell_uniforms(seeds, shape.n1, shape.n2)
        bits = (u < p0).astype(np.uint8)
        out[lo:hi] = _batch_statistic(bits, p0, kind, budget)
    return out


def empirical_quantile(values: np.ndarray, alpha: float) -> float:
    """Lowest order statistic with rank >= ceil((1 - alpha) * len)."""
    rank = math.ceil((1.0 - alpha) * len(values))
    rank = min(max(rank, 1), len(values))
    return float(np.sort(values)[rank - 1])


def calibrate_threshold(
    kind: DetectorKind,
    shape: ProblemShape,
    p0: float,
    alpha: float,
    trials: int,
    seed: int,
    consts: RateConstants = RateConstants(),
    budget: int = DEFAULT_SUBSET_BUDGET,
) -> float:
    """Empirical (1 - alpha)-quantile of the statistic under the null."""
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    if trials < 1:
        raise ParameterError(f"trials must be positive, got {trials}")
    kind = resolve_kind(kind, shape, p0, consts)
    values = null_statistics(kind, shape, p0, trials, seed, budget)
    return empirical_quantile(values, alpha)


def resolve_threshold(
    kind: DetectorKind,
    shape: ProblemShape,
    p0: float,
    spec: ThresholdSpec,
    consts: RateConstants = RateConstants(),
    budget: int = DEFAULT_SUBSET_BUDGET,
) -> tuple[DetectorKind, float]:
    """Resolve (concrete kind, threshold value) for a detector selection."""
    kind = resolve_kind(kind, shape, p0, consts)
    if spec.value is not None:
        return kind, spec.value
    if spec.mode is ThresholdMode.CALIBRATED:
        h = calibrate_threshold(kind, shape, p0, spec.alpha, spec.trials, spec.seed, consts, budget)
        return kind, h
    at = analytic_thresholds(shape, p0, spec.alpha, consts)
    table = {
        DetectorTag.TOTAL_DEGREE: at.h2,
        DetectorTag.TRUNC_DEGREE_AXIS1: at.h1,
        DetectorTag.TRUNC_DEGREE_AXIS2: at.h1p,
        DetectorTag.MAX_TRUNC_AXIS1: at.h3,
        DetectorTag.MAX_TRUNC_AXIS2: at.h4,
    }
    return kind, table[kind.tag]


def run_test(
    A: AdjacencyMatrix,
    p0: float,
    kind: DetectorKind,
    threshold: float,
    budget: int = DEFAULT_SUBSET_BUDGET,
) -> TestDecision:
    t = statistic(A, p0, kind, budget)
    return TestDecision(statistic=t, threshold=threshold, reject=t > threshold)


def run_delta_star(
    A: AdjacencyMatrix,
    shape: ProblemShape,
    p0: float,
    consts: RateConstants,
    thresholds: dict[DetectorTag, float],
    budget: int = DEFAULT_SUBSET_BUDGET,
) -> TestDecision:
    """Composite detector: dispatch on the rate branch and run the selected
    sub-test against its resolved threshold."""
    if (A.n1, A.n2) != (shape.n1, shape.n2):
        raise ParameterError(f"matrix is {A.n1}x{A.n2}, shape says {shape.n1}x{shape.n2}")
    kind = delta_star_subtest(shape, p0, consts)
    if kind.tag not in thresholds:
        raise ConfigError("thresholds", f"no threshold resolved for {kind.tag.value}")
    return run_test(A, p0, kind, thresholds[kind.tag], budget)

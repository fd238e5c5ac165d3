"""Monte Carlo experiment engine.

Estimates Type I / Type II error of a detector over many seeded trials,
sweeps a grid of signal strengths, bisects for the empirical separation
level, evaluates rate bundles over shape grids, and runs the empty-subgraph
diagnostics.  Everything is a pure function of (config, seed): per-trial
seeds are derived from the experiment seed and trial index, so results are
identical for any worker count, and the same uniforms drive every point of
a delta grid (common random numbers).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .detectors import (
    DEFAULT_SUBSET_BUDGET,
    DetectorKind,
    DetectorTag,
    ThresholdSpec,
    _batch_statistic,
    resolve_threshold,
)
from .errors import BracketError, BudgetError, ConfigError, ParameterError
from .graph_model import ProblemShape
from .rates import RateBundle, RateConstants, log_binom, rate_bundle
from .rng import (
    TAG_ALT,
    TAG_COLS,
    TAG_NULL,
    TAG_ROWS,
    batch_cell_uniforms,
    derive_seed,
    sample_subset,
)

_TRIAL_CHUNK = 512


@dataclass(frozen=True)
class ExperimentConfig:
    shape: ProblemShape
    p0: float
    delta_grid: tuple[float, ...]
    detector: DetectorKind
    threshold: ThresholdSpec
    trials: int
    seed: int
    eta: float = 0.5
    consts: RateConstants = field(default_factory=RateConstants)
    budget: int = DEFAULT_SUBSET_BUDGET

    def __post_init__(self):
        if not 0.0 < self.p0 < 1.0:
            raise ConfigError("p0", f"must lie in (0, 1), got {self.p0}")
        if not self.delta_grid:
            raise ConfigError("delta_grid", "must be nonempty")
        for d in self.delta_grid:
            if not 0.0 <= d <= 1.0 - self.p0 + 1e-12:
                raise ConfigError("delta_grid", f"value {d} outside [0, 1 - p0]")
        if self.trials < 100:
            raise ConfigError("trials", f"must be >= 100, got {self.trials}")
        if not 0.0 < self.eta < 1.0:
            raise ConfigError("eta", f"must lie in (0, 1), got {self.eta}")


@dataclass(frozen=True)
class RiskEstimate:
    type1: float
    type2: float
    se1: float
    se2: float
    trials: int

    @property
    def risk(self) -> float:
        return self.type1 + self.type2


def _proportion_se(p: float, n: int) -> float:
    return math.sqrt(p * (1.0 - p) / n)


def _null_reject_count(
    kind: DetectorKind, shape: ProblemShape, p0: float, threshold: float,
    trials: int, seed: int, budget: int,
) -> int:
    base = derive_seed(seed, TAG_NULL)
    count = 0
    for lo in range(0, trials, _TRIAL_CHUNK):
        hi = min(lo + _TRIAL_CHUNK, trials)
        seeds = np.uint64(base) + np.arange(lo + 1, hi + 1, dtype=np.uint64)
        bits = (batch_cell_uniforms(seeds, shape.n1, shape.n2) < p0).astype(np.uint8)
        stats = _batch_statistic(bits, p0, kind, budget)
        count += int((stats > threshold).sum())
    return count


def _planted_accept_count(
    kind: DetectorKind, shape: ProblemShape, p0: float, delta: float, threshold: float,
    trials: int, seed: int, budget: int,
) -> int:
    base = derive_seed(seed, TAG_ALT)
    count = 0
    for lo in range(0, trials, _TRIAL_CHUNK):
        hi = min(lo + _TRIAL_CHUNK, trials)
        idx = np.arange(lo + 1, hi + 1, dtype=np.uint64)
        seeds = np.uint64(base) + idx
        u = batch_cell_uniforms(seeds, shape.n1, shape.n2)
        p = np.full_like(u, p0)
        for t, trial_seed in enumerate(seeds.tolist()):
            K1 = sample_subset(trial_seed, TAG_ROWS, shape.n1, shape.k1)
            K2 = sample_subset(trial_seed, TAG_COLS, shape.n2, shape.k2)
            p[t][np.ix_(K1, K2)] = p0 + delta
        bits = (u < p).astype(np.uint8)
        stats = _batch_statistic(bits, p0, kind, budget)
        count += int((stats <= threshold).sum())
    return count


def estimate_risk(cfg: ExperimentConfig, delta: float) -> RiskEstimate:
    """Type I over null trials plus Type II over planted trials with uniform
    random support at signal level delta, both at the resolved threshold."""
    kind, threshold = resolve_threshold(
        cfg.detector, cfg.shape, cfg.p0, cfg.threshold, cfg.consts, cfg.budget
    )
    n = cfg.trials
    if math.isinf(threshold):
        r1 = 0 if threshold > 0 else n
        r2 = n - r1
        # Degenerate detectors short-circuit: never / always reject.
    else:
        r1 = _null_reject_count(kind, cfg.shape, cfg.p0, threshold, n, cfg.seed, cfg.budget)
        r2 = _planted_accept_count(
            kind, cfg.shape, cfg.p0, delta, threshold, n, cfg.seed, cfg.budget
        )
    t1, t2 = r1 / n, r2 / n
    return RiskEstimate(t1, t2, _proportion_se(t1, n), _proportion_se(t2, n), n)


@dataclass(frozen=True)
class SweepRow:
    delta: float
    estimate: RiskEstimate


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    type2_monotone: bool


def power_sweep(cfg: ExperimentConfig) -> SweepResult:
    """One risk estimate per grid delta, sharing random numbers across the
    grid, plus a flag for whether Type II decreases in delta up to noise."""
    rows = tuple(SweepRow(d, estimate_risk(cfg, d)) for d in sorted(cfg.delta_grid))
    monotone = True
    for a, b in zip(rows, rows[1:]):
        slack = 4.0 * (a.estimate.se2 + b.estimate.se2)
        if b.estimate.type2 > a.estimate.type2 + slack:
            monotone = False
    return SweepResult(rows, monotone)


def bisect_delta_star(cfg: ExperimentConfig, tolerance: float) -> float:
    """Bisection for the signal level where empirical risk crosses eta.

    Requires risk(0) > eta and risk(1 - p0) < eta; common random numbers
    make the empirical risk monotone enough for bisection at desk scale.
    """
    if tolerance <= 0:
        raise ParameterError(f"tolerance must be positive, got {tolerance}")
    lo, hi = 0.0, 1.0 - cfg.p0
    risk_lo = estimate_risk(cfg, lo).risk
    risk_hi = estimate_risk(cfg, hi).risk
    if not (risk_lo > cfg.eta and risk_hi < cfg.eta):
        raise BracketError(
            f"no crossing: risk({lo})={risk_lo:.4f}, risk({hi})={risk_hi:.4f}, eta={cfg.eta}"
        )
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        if estimate_risk(cfg, mid).risk > cfg.eta:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def phase_diagram(
    shape_grid, p0: float, consts: RateConstants = RateConstants()
) -> list[tuple[ProblemShape, RateBundle]]:
    """Rate bundle (components, R, R_tilde, branch) for every grid shape."""
    grid = list(shape_grid)
    if not grid:
        raise ParameterError("shape grid must be nonempty")
    return [(shape, rate_bundle(shape, consts)) for shape in grid]


def empty_subgraph_diagnostic(
    shape: ProblemShape,
    p0: float,
    trials: int,
    seed: int,
    row_variant: bool = False,
    scan_budget: int = 10**6,
) -> dict:
    """Probability that a null graph contains an all-zero k1 x k2 block
    (or, with row_variant, k1 fully isolated left vertices): the log-space
    union bound against a Monte Carlo frequency from exhaustive scans."""
    if trials < 100:
        raise ParameterError(f"trials must be >= 100, got {trials}")
    if not 0.0 <= p0 <= 1.0:
        raise ParameterError(f"p0 must lie in [0, 1], got {p0}")
    n1, n2, k1, k2 = shape.n1, shape.n2, shape.k1, shape.k2
    if row_variant:
        log_ub = log_binom(n1, k1) + k1 * n2 * (math.log1p(-p0) if p0 < 1.0 else -math.inf)
    else:
        log_ub = (
            log_binom(n1, k1)
            + log_binom(n2, k2)
            + k1 * k2 * (math.log1p(-p0) if p0 < 1.0 else -math.inf)
        )
    union_bound = min(1.0, math.exp(log_ub)) if log_ub < 0 else 1.0

    scan_cost = math.comb(n1, k1) * (1 if row_variant else math.comb(n2, k2))
    if scan_cost > scan_budget:
        raise BudgetError(f"{scan_cost} subgraph scans per trial exceed budget {scan_budget}")

    from itertools import combinations

    M = np.zeros((math.comb(n1, k1), n1))
    for s, J in enumerate(combinations(range(n1), k1)):
        M[s, list(J)] = 1.0
    base = derive_seed(seed, TAG_NULL)
    hits = 0
    for lo in range(0, trials, _TRIAL_CHUNK):
        hi = min(lo + _TRIAL_CHUNK, trials)
        seeds = np.uint64(base) + np.arange(lo + 1, hi + 1, dtype=np.uint64)
        bits = (batch_cell_uniforms(seeds, n1, n2) < p0).astype(np.float64)
        counts = np.einsum("sn,tnj->tsj", M, bits)
        if row_variant:
            # All k1 chosen rows empty across every column.
            found = (counts.sum(axis=2) == 0).any(axis=1)
        else:
            zero_cols = (counts == 0).sum(axis=2)
            found = (zero_cols >= k2).any(axis=1)
        hits += int(found.sum())
    mc = hits / trials
    return {
        "union_bound": union_bound,
        "mc_estimate": mc,
        "mc_se": _proportion_se(mc, trials),
        "trials": trials,
    }


CSV_COLUMNS = [
    "experiment_id", "n1", "n2", "k1", "k2", "p0", "delta", "detector",
    "threshold_mode", "threshold", "trials", "seed", "type1", "se1",
    "type2", "se2", "risk",
]


@dataclass(frozen=True)
class ResultRow:
    experiment_id: str
    n1: int
    n2: int
    k1: int
    k2: int
    p0: float
    delta: float
    detector: str
    threshold_mode: str
    threshold: float
    trials: int
    seed: int
    type1: float
    se1: float
    type2: float
    se2: float
    risk: float


def result_rows(
    cfg: ExperimentConfig, sweep: SweepResult, experiment_id: str, threshold_value: float
) -> list[ResultRow]:
    kind = cfg.detector
    return [
        ResultRow(
            experiment_id=experiment_id,
            n1=cfg.shape.n1, n2=cfg.shape.n2, k1=cfg.shape.k1, k2=cfg.shape.k2,
            p0=cfg.p0, delta=row.delta,
            detector=kind.tag.value,
            threshold_mode=cfg.threshold.mode.value,
            threshold=threshold_value,
            trials=cfg.trials, seed=cfg.seed,
            type1=row.estimate.type1, se1=row.estimate.se1,
            type2=row.estimate.type2, se2=row.estimate.se2,
            risk=row.estimate.risk,
        )
        for row in sweep.rows
    ]


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def emit_results(table: list[ResultRow], path, fmt: str = "CSV") -> None:
    """Write result rows with 17-significant-digit floats; CSV columns are
    fixed, JSON mirrors the field names."""
    fmt = fmt.upper()
    if fmt == "CSV":
        with open(path, "w", newline="", encoding="ascii") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for row in table:
                writer.writerow([_fmt(getattr(row, c)) for c in CSV_COLUMNS])
    elif fmt == "JSON":
        payload = [
            {c: (_fmt(getattr(row, c)) if isinstance(getattr(row, c), float) else getattr(row, c))
             for c in CSV_COLUMNS}
            for row in table
        ]
        with open(path, "w", encoding="ascii") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    else:
        raise ParameterError(f"unknown output format {fmt!r}")

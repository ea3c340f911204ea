"""
Wilcoxon signed-rank test and the paired algorithm-comparison table.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
from scipy import stats

from compression_errors import ConfigError, UndefinedTestError

ALPHA = 0.05
EXACT_MAX_N = 20
# int64 counts of 2^n sign vectors stay exact up to here
EXACT_LIMIT = 60
METHODS = ("auto", "exact", "normal_approx")

# True when a lower value is better
LOWER_IS_BETTER = {
    "rmse": True,
    "mse": True,
    "psnr": False,
    "psnr_db": False,
    "ssim": False,
}


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    n_effective: int
    method: str  # "exact" or "normal_approx"
    w_plus: float
    w_minus: float

    # keep pytest from collecting this as a test class
    __test__ = False


def _differences(x: Sequence[float], y: Sequence[float]) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ConfigError(f"Paired samples must be equal-length 1-D sequences, got {x.shape} and {y.shape}")
    if x.size == 0:
        raise ConfigError("Paired samples must contain at least one pair")
    # inf - inf is treated as no difference
    with np.errstate(invalid="ignore"):
        return np.where(x == y, 0.0, x - y)


def _exact_lower_tail(ranks: np.ndarray, w: float) -> float:
    """
    P(W+ <= w) under the null, by counting all 2^n sign assignments.
    Ranks are doubled so midranks become integers.
    """
    doubled = np.rint(ranks * 2).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in doubled:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    limit = int(math.floor(2 * w + 1e-9))
    hits = int(counts[: limit + 1].sum())
    return hits / float(2 ** len(doubled))


def wilcoxon_signed_rank(x: Sequence[float], y: Sequence[float],
                         alternative: str = "two-sided", method: str = "auto") -> TestResult:
    """
    Two-sided Wilcoxon signed-rank test on the pairs (x_i, y_i).

    Zero differences are dropped, |d| is ranked with midranks, W = min(W+, W-).
    The null distribution is enumerated exactly for n <= 20; above that a
    normal approximation with tie and continuity corrections is used.
    `method` forces one or the other.
    """
    if alternative != "two-sided":
        raise ConfigError(f"Only the two-sided test is supported, got {alternative!r}")
    if method not in METHODS:
        raise ConfigError(f"Unknown method {method!r}; expected one of {', '.join(METHODS)}")

    d = _differences(x, y)
    d = d[d != 0]
    n = int(d.size)
    if n == 0:
        raise UndefinedTestError("All paired differences are zero; the signed-rank test is undefined")

    ranks = stats.rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)

    if method == "auto":
        method = "exact" if n <= EXACT_MAX_N else "normal_approx"
    if method == "exact" and n > EXACT_LIMIT:
        raise ConfigError(f"Exact enumeration supports at most {EXACT_LIMIT} nonzero differences, got {n}")

    if method == "exact":
        p = 2.0 * _exact_lower_tail(ranks, w)
    else:
        mean = n * (n + 1) / 4.0
        _, tie_counts = np.unique(ranks, return_counts=True)
        tie_term = float(np.sum(tie_counts ** 3 - tie_counts)) / 48.0
        var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term
        z = min(0.0, (w - mean + 0.5) / math.sqrt(var))
        p = 2.0 * float(stats.norm.cdf(z))

    return TestResult(
        statistic=w,
        p_value=min(1.0, max(0.0, p)),
        n_effective=n,
        method=method,
        w_plus=w_plus,
        w_minus=w_minus,
    )


@dataclass
class SignificanceCell:
    algorithm: str
    metric: str
    baseline: str
    n_runs: int
    baseline_median: float
    other_median: float
    p_value: Optional[float]
    method: Optional[str]
    defeated: bool
    note: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "algorithm": self.algorithm,
            "metric": self.metric,
            "baseline": self.baseline,
            "n_runs": self.n_runs,
            "baseline_median": self.baseline_median,
            "other_median": self.other_median,
            "p_value": self.p_value,
            "method": self.method,
            "defeated": self.defeated,
            "note": self.note,
        }


def baseline_is_better(metric: str, baseline_median: float, other_median: float) -> bool:
    if LOWER_IS_BETTER.get(metric, True):
        return baseline_median < other_median
    return baseline_median > other_median


def compare_algorithms(runs: Mapping[str, Mapping[str, Sequence[float]]],
                       baseline: str,
                       metrics: Optional[Sequence[str]] = None) -> List[SignificanceCell]:
    """
    runs[algorithm][metric] is a list of per-run values, paired by position
    (same seed schedule for every algorithm). For every non-baseline
    algorithm and metric the baseline is tested against it; "defeated"
    means p < 0.05 and the baseline median is the better one.
    """
    if baseline not in runs:
        raise ConfigError(f"Baseline {baseline!r} not among algorithms {sorted(runs)}")
    if len(runs) < 2:
        raise ConfigError("compare_algorithms needs at least two algorithms")

    metrics = list(metrics or runs[baseline].keys())
    lengths = {len(values) for per_metric in runs.values() for m, values in per_metric.items() if m in metrics}
    if len(lengths) != 1:
        raise ConfigError(f"Unequal run counts across algorithms/metrics: {sorted(lengths)}")
    n_runs = lengths.pop()
    if n_runs < 2:
        raise UndefinedTestError(
            f"{n_runs} paired run(s) cannot reach any two-sided p below 1; need at least 2"
        )

    cells: List[SignificanceCell] = []
    for algorithm in runs:
        if algorithm == baseline:
            continue
        for metric in metrics:
            base_values = np.asarray(runs[baseline][metric], dtype=np.float64)
            other_values = np.asarray(runs[algorithm][metric], dtype=np.float64)
            base_median = float(np.median(base_values))
            other_median = float(np.median(other_values))
            try:
                result = wilcoxon_signed_rank(base_values, other_values)
            except UndefinedTestError as e:
                cells.append(SignificanceCell(
                    algorithm=algorithm, metric=metric, baseline=baseline, n_runs=n_runs,
                    baseline_median=base_median, other_median=other_median,
                    p_value=None, method=None, defeated=False, note=f"undefined: {e}",
                ))
                continue

            defeated = result.p_value < ALPHA and baseline_is_better(metric, base_median, other_median)
            cells.append(SignificanceCell(
                algorithm=algorithm, metric=metric, baseline=baseline, n_runs=n_runs,
                baseline_median=base_median, other_median=other_median,
                p_value=result.p_value, method=result.method, defeated=defeated,
            ))
    return cells

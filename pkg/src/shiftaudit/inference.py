"""Percentile bootstrap intervals and quantile-binned calibration curves."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.stats import norm

from .metrics import MetricResult
from .rng import STREAM_BOOTSTRAP, substream

StatValue = Union[float, MetricResult]
# A statistic receives resample row indices and returns one value per tracked
# statistic; row-aligned data (including weights) stays in the closure so
# weights travel with their rows.
VectorStatistic = Callable[[np.ndarray], Sequence[StatValue]]


@dataclass(frozen=True)
class BootstrapConfig:
    replicates: int = 10_000
    seed: int = 0
    ci_level: float = 0.95
    salt: int = 0   # distinguishes independent bootstrap passes under one seed

    def __post_init__(self) -> None:
        if self.replicates < 100:
            raise ValueError(f"need at least 100 replicates for CI output, got {self.replicates}")
        if not 0.0 < self.ci_level < 1.0:
            raise ValueError(f"ci_level must be in (0,1), got {self.ci_level}")


@dataclass
class IntervalEstimate:
    point: float
    lower: float
    upper: float
    undefined_replicates: int = 0
    undefined_reason: Optional[str] = None

    def covers(self, value: float) -> bool:
        if np.isnan(self.lower) or np.isnan(self.upper):
            return False
        return self.lower <= value <= self.upper

    def excludes(self, value: float) -> bool:
        return not (np.isnan(self.lower) or np.isnan(self.upper)) and not self.covers(value)


def _as_float(v: StatValue) -> tuple[float, Optional[str]]:
    if isinstance(v, MetricResult):
        if not v.defined:
            return float("nan"), v.undefined_reason
        return float(v.value), None
    v = float(v)
    if np.isnan(v):
        return v, "statistic returned NaN"
    return v, None


def bootstrap_vector_ci(
    statistic: VectorStatistic,
    n_rows: int,
    config: BootstrapConfig,
    strict: bool = True,
) -> list[IntervalEstimate]:
    """Joint percentile bootstrap for several statistics of the same rows.

    Every replicate resamples the n rows once (with replacement) and feeds the
    index vector to the statistic, so statistics that must be compared (for
    instance a subgroup mean and a weighted population mean) are computed on
    the same resample. Replicate index r draws from its own derived substream,
    making results independent of execution order. Interval endpoints are
    order statistics of the replicate values; the point estimate is the
    statistic of the full sample.

    A statistic undefined on more than half the replicates raises when
    `strict`, otherwise yields an all-NaN interval tagged with the dominant
    reason (so batch callers can mark that cell and keep going).
    """
    if n_rows <= 0:
        raise ValueError("cannot bootstrap an empty sample")
    points = [_as_float(v) for v in statistic(np.arange(n_rows))]
    k = len(points)
    values = np.empty((config.replicates, k))
    reasons: list[Counter] = [Counter() for _ in range(k)]
    for rep in range(config.replicates):
        idx = substream(config.seed, STREAM_BOOTSTRAP, config.salt, rep).integers(
            0, n_rows, n_rows
        )
        for j, v in enumerate(statistic(idx)):
            values[rep, j], reason = _as_float(v)
            if reason is not None:
                reasons[j][reason] += 1
    alpha = 1.0 - config.ci_level
    out = []
    for j in range(k):
        col = values[:, j]
        defined = col[~np.isnan(col)]
        n_undef = config.replicates - defined.size
        if n_undef > 0.5 * config.replicates:
            dominant = reasons[j].most_common(1)[0][0] if reasons[j] else "statistic returned NaN"
            if strict:
                raise RuntimeError(
                    f"{n_undef}/{config.replicates} bootstrap replicates undefined: {dominant}"
                )
            out.append(
                IntervalEstimate(
                    point=points[j][0],
                    lower=float("nan"),
                    upper=float("nan"),
                    undefined_replicates=n_undef,
                    undefined_reason=dominant,
                )
            )
            continue
        lower = float(np.quantile(defined, alpha / 2.0, method="lower"))
        upper = float(np.quantile(defined, 1.0 - alpha / 2.0, method="higher"))
        out.append(
            IntervalEstimate(
                point=points[j][0],
                lower=lower,
                upper=upper,
                undefined_replicates=n_undef,
                undefined_reason=points[j][1],
            )
        )
    return out


def bootstrap_ci(
    statistic: Callable[[np.ndarray], StatValue],
    n_rows: int,
    config: BootstrapConfig,
) -> IntervalEstimate:
    """Percentile bootstrap CI for a single statistic of resampled rows."""
    return bootstrap_vector_ci(lambda idx: (statistic(idx),), n_rows, config)[0]


def wilson_interval(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("wilson interval needs at least one trial")
    z = float(norm.ppf(0.5 + level / 2.0))
    phat = successes / trials
    denom = 1.0 + z**2 / trials
    center = (phat + z**2 / (2.0 * trials)) / denom
    half = z * np.sqrt(phat * (1.0 - phat) / trials + z**2 / (4.0 * trials**2)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass
class CalibrationCurve:
    """Quantile-binned reliability summary with per-bin Wilson bands."""

    mean_score: np.ndarray
    mean_outcome: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    count: np.ndarray
    edges: np.ndarray
    merged_bins: bool = False
    level: float = 0.95

    @property
    def n_bins(self) -> int:
        return len(self.count)

    def violations(self) -> np.ndarray:
        """Bins whose Wilson band does not contain the bin's mean score."""
        return (self.mean_score < self.lower) | (self.mean_score > self.upper)

    def to_json(self) -> dict:
        return {
            "mean_score": self.mean_score.tolist(),
            "mean_outcome": self.mean_outcome.tolist(),
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "count": self.count.tolist(),
            "merged_bins": bool(self.merged_bins),
            "level": self.level,
        }


def calibration_curve(
    y: np.ndarray, r: np.ndarray, bins: int = 10, level: float = 0.95
) -> CalibrationCurve:
    """Bin scores by quantiles and compare mean outcome to mean score.

    Ties at a bin edge fall into the lower bin. If tied score values make
    some quantile edges coincide, the degenerate bins are merged and the
    curve is flagged.
    """
    y = np.asarray(y)
    r = np.asarray(r, dtype=float)
    if len(y) != len(r):
        raise ValueError("labels and scores differ in length")
    if len(r) < bins:
        raise ValueError(f"need at least {bins} rows for {bins} bins, got {len(r)}")
    edges = np.quantile(r, np.arange(1, bins) / bins)
    merged = bool(len(np.unique(edges)) < len(edges))
    edges = np.unique(edges)
    idx = np.searchsorted(edges, r, side="left")
    n_bins = len(edges) + 1
    mean_score = np.empty(n_bins)
    mean_outcome = np.empty(n_bins)
    lower = np.empty(n_bins)
    upper = np.empty(n_bins)
    count = np.zeros(n_bins, dtype=int)
    keep = []
    for b in range(n_bins):
        mask = idx == b
        count[b] = int(mask.sum())
        if count[b] == 0:
            merged = True
            continue
        keep.append(b)
        mean_score[b] = float(r[mask].mean())
        mean_outcome[b] = float(y[mask].mean())
        lower[b], upper[b] = wilson_interval(int(y[mask].sum()), count[b], level)
    keep = np.array(keep, dtype=int)
    return CalibrationCurve(
        mean_score=mean_score[keep],
        mean_outcome=mean_outcome[keep],
        lower=lower[keep],
        upper=upper[keep],
        count=count[keep],
        edges=edges,
        merged_bins=merged,
        level=level,
    )

"""Performance metrics with self-normalized (Hajek) weighted variants.

Weighted means divide by the weight sum, so every metric is invariant to
rescaling the weight vector. Metrics that condition on a class or on the
prediction set can become undefined on a resample; they report a reason
instead of propagating NaN so that bootstrap aggregation can count
undefined replicates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

SCORE_FLOOR = 1e-12  # scores are clipped to [floor, 1-floor] before any log


class MetricId(str, enum.Enum):
    LOG_LOSS = "log_loss"
    AUC_ROC = "auc_roc"
    SENSITIVITY = "sensitivity"
    SPECIFICITY = "specificity"
    PRECISION = "precision"
    NET_BENEFIT = "net_benefit"
    CLASSIFICATION_RATE = "classification_rate"


@dataclass(frozen=True)
class MetricSpec:
    """A metric identifier plus the thresholds it needs.

    `tau` is the decision threshold for thresholded metrics; `tau_p` is the
    preference trade-off threshold of net benefit.
    """

    kind: MetricId
    tau: float = 0.5
    tau_p: float = 0.5

    @property
    def key(self) -> str:
        return self.kind.value

    @property
    def decomposable(self) -> bool:
        """True when the metric is a plain weighted mean of per-row terms."""
        return self.kind in (MetricId.LOG_LOSS, MetricId.NET_BENEFIT, MetricId.CLASSIFICATION_RATE)


def threshold_defaults() -> tuple[float, float]:
    """Default (decision threshold, preference threshold)."""
    return 0.5, 0.5


def log_loss() -> MetricSpec:
    return MetricSpec(MetricId.LOG_LOSS)


def auc_roc() -> MetricSpec:
    return MetricSpec(MetricId.AUC_ROC)


def sensitivity(tau: float = 0.5) -> MetricSpec:
    return MetricSpec(MetricId.SENSITIVITY, tau=tau)


def specificity(tau: float = 0.5) -> MetricSpec:
    return MetricSpec(MetricId.SPECIFICITY, tau=tau)


def precision(tau: float = 0.5) -> MetricSpec:
    return MetricSpec(MetricId.PRECISION, tau=tau)


def net_benefit(tau: float = 0.5, tau_p: float = 0.5) -> MetricSpec:
    return MetricSpec(MetricId.NET_BENEFIT, tau=tau, tau_p=tau_p)


def classification_rate(tau: float = 0.5) -> MetricSpec:
    return MetricSpec(MetricId.CLASSIFICATION_RATE, tau=tau)


DEFAULT_METRICS = (
    log_loss(),
    auc_roc(),
    sensitivity(),
    specificity(),
    precision(),
    net_benefit(),
    classification_rate(),
)


@dataclass
class MetricResult:
    value: float
    effective_sample_size: float
    undefined_reason: Optional[str] = None

    @property
    def defined(self) -> bool:
        return self.undefined_reason is None


def clip_scores(r: np.ndarray) -> np.ndarray:
    return np.clip(r, SCORE_FLOOR, 1.0 - SCORE_FLOOR)


def instance_losses(metric: MetricSpec, y: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Per-row terms for decomposable metrics (their mean is the metric)."""
    y = np.asarray(y, dtype=float)
    r = np.asarray(r, dtype=float)
    if metric.kind is MetricId.LOG_LOSS:
        rc = clip_scores(r)
        return -(y * np.log(rc) + (1.0 - y) * np.log1p(-rc))
    yhat = (r >= metric.tau).astype(float)
    if metric.kind is MetricId.CLASSIFICATION_RATE:
        return yhat
    if metric.kind is MetricId.NET_BENEFIT:
        odds = metric.tau_p / (1.0 - metric.tau_p)
        return yhat * y - odds * yhat * (1.0 - y)
    raise ValueError(f"{metric.kind.value} has no per-row decomposition")


def _undefined(reason: str) -> MetricResult:
    return MetricResult(value=float("nan"), effective_sample_size=0.0, undefined_reason=reason)


def effective_sample_size(w: np.ndarray) -> float:
    total = float(np.sum(w))
    if total <= 0.0:
        return 0.0
    return total**2 / float(np.sum(np.asarray(w, dtype=float) ** 2))


def _weighted_auc(y: np.ndarray, r: np.ndarray, w: np.ndarray) -> MetricResult:
    """Weighted Mann-Whitney statistic with half credit for score ties.

    Pairwise weight products are accumulated in one ascending pass over the
    scores: for each tied-score block, positives in the block earn the full
    negative weight strictly below plus half the negative weight inside the
    block.
    """
    pos = (y == 1) & (w > 0)
    neg = (y == 0) & (w > 0)
    w_pos_total = float(w[pos].sum())
    w_neg_total = float(w[neg].sum())
    if w_pos_total <= 0.0:
        return _undefined("no positive examples")
    if w_neg_total <= 0.0:
        return _undefined("no negative examples")
    order = np.argsort(r, kind="stable")
    r_sorted = r[order]
    wp = np.where(y[order] == 1, w[order], 0.0)
    wn = np.where(y[order] == 0, w[order], 0.0)
    # block boundaries between distinct score values
    starts = np.flatnonzero(np.concatenate(([True], r_sorted[1:] != r_sorted[:-1])))
    block_wp = np.add.reduceat(wp, starts)
    block_wn = np.add.reduceat(wn, starts)
    below = np.concatenate(([0.0], np.cumsum(block_wn)[:-1]))
    favorable = float(np.sum(block_wp * (below + 0.5 * block_wn)))
    value = favorable / (w_pos_total * w_neg_total)
    return MetricResult(value=value, effective_sample_size=effective_sample_size(w))


def evaluate(
    metric: MetricSpec,
    y: np.ndarray,
    r: np.ndarray,
    w: Optional[np.ndarray] = None,
) -> MetricResult:
    """Evaluate one metric, optionally under nonnegative per-row weights."""
    y = np.asarray(y)
    r = np.asarray(r, dtype=float)
    if y.shape != r.shape:
        raise ValueError(f"labels and scores differ in length: {y.shape} vs {r.shape}")
    if w is None:
        w = np.ones_like(r)
    else:
        w = np.asarray(w, dtype=float)
        if w.shape != r.shape:
            raise ValueError(f"weights differ in length: {w.shape} vs {r.shape}")
        if (w < 0).any():
            raise ValueError("weights must be nonnegative")
    total = float(w.sum())
    if total <= 0.0:
        return _undefined("weight sum is zero")

    if metric.kind is MetricId.AUC_ROC:
        return _weighted_auc(y, r, w)

    if metric.decomposable:
        value = float(np.dot(w, instance_losses(metric, y, r)) / total)
        return MetricResult(value=value, effective_sample_size=effective_sample_size(w))

    yhat = r >= metric.tau
    if metric.kind is MetricId.SENSITIVITY:
        denom = float(w[y == 1].sum())
        if denom <= 0.0:
            return _undefined("no positive examples")
        value = float(w[(y == 1) & yhat].sum() / denom)
        ess = effective_sample_size(w[y == 1])
    elif metric.kind is MetricId.SPECIFICITY:
        denom = float(w[y == 0].sum())
        if denom <= 0.0:
            return _undefined("no negative examples")
        value = float(w[(y == 0) & ~yhat].sum() / denom)
        ess = effective_sample_size(w[y == 0])
    elif metric.kind is MetricId.PRECISION:
        denom = float(w[yhat].sum())
        if denom <= 0.0:
            return _undefined("no predicted positives")
        value = float(w[yhat & (y == 1)].sum() / denom)
        ess = effective_sample_size(w[yhat])
    else:
        raise ValueError(f"unknown metric {metric.kind}")
    return MetricResult(value=value, effective_sample_size=ess)

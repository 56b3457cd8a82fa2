"""Weight constructions for controlled disaggregated evaluation.

Four schemes are supported, all built from subgroup-membership probabilities
P(A | V):

* pop_to_subgroup: weight every population row by P(A=a | V), mapping the
  population's control-variable distribution onto the subgroup's. Bounded
  weights; the default scheme.
* subgroup_to_pop: weight subgroup-a rows by 1 / P(A=a | V), mapping the
  subgroup onto the population (inverse-propensity style).
* pairwise_ratio: weight subgroup-a rows by P(A=a' | V) / P(A=a | V),
  mapping subgroup a onto subgroup a'.
* shared_space: weight the rows of a subgroup pair onto the overlap region
  of their control-variable distributions.

The two ratio schemes blow up when a denominator probability approaches
zero, so any denominator below a floor raises instead of silently producing
an unstable estimate; callers may lower the floor explicitly.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import Dataset
from .learner import GroupModel
from .metrics import MetricResult, MetricSpec, effective_sample_size, evaluate

DENOMINATOR_FLOOR = 1e-6


class ExtremeWeightsError(ValueError):
    """A weight denominator fell below the stability floor."""


class SchemeKind(str, enum.Enum):
    POP_TO_SUBGROUP = "pop_to_subgroup"
    SUBGROUP_TO_POP = "subgroup_to_pop"
    PAIRWISE_RATIO = "pairwise_ratio"
    SHARED_SPACE = "shared_space"


@dataclass(frozen=True)
class WeightScheme:
    kind: SchemeKind
    other: Optional[int] = None   # ordered pair partner for the pairwise schemes

    def __post_init__(self) -> None:
        pairwise = self.kind in (SchemeKind.PAIRWISE_RATIO, SchemeKind.SHARED_SPACE)
        if pairwise and self.other is None:
            raise ValueError(f"{self.kind.value} requires the paired subgroup")
        if not pairwise and self.other is not None:
            raise ValueError(f"{self.kind.value} does not take a paired subgroup")


@dataclass
class WeightSet:
    """Per-row nonnegative weights realizing one scheme for one subgroup.

    The vector is aligned with the evaluation rows; rows outside the scheme's
    support carry weight zero, so weighted metrics restrict to the intended
    rows automatically.
    """

    weights: np.ndarray
    scheme: WeightScheme
    target: int
    control: str
    max_weight_share: float = 0.0
    n_eff: float = 0.0

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if (w < 0).any() or not np.isfinite(w).all():
            raise ValueError("weights must be finite and nonnegative")
        total = float(w.sum())
        if total <= 0.0:
            raise ValueError("weight vector sums to zero")
        self.weights = w
        self.max_weight_share = float(w.max() / total)
        self.n_eff = effective_sample_size(w)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["row", "weight", "scheme", "subgroup", "control"])
            for i, w in enumerate(self.weights):
                writer.writerow([i, "%.17g" % w, self.scheme.kind.value, self.target, self.control])


def build_weights(
    group_model: GroupModel,
    scheme: WeightScheme,
    a: int,
    rows: Dataset,
    scores: Optional[np.ndarray] = None,
    floor: float = DENOMINATOR_FLOOR,
) -> WeightSet:
    """Construct the weight vector for one (scheme, subgroup) on given rows."""
    probs = group_model.probabilities(rows, scores)
    if len(probs) != rows.n:
        raise ValueError("group-model probabilities are not aligned with the rows")
    p_a = probs[:, a]
    if scheme.kind is SchemeKind.POP_TO_SUBGROUP:
        weights = p_a.copy()
    elif scheme.kind is SchemeKind.SUBGROUP_TO_POP:
        mask = rows.a == a
        _check_floor(p_a[mask], floor, f"P(A={rows.label_of(a)} | V)")
        weights = np.zeros(rows.n)
        weights[mask] = 1.0 / p_a[mask]
    elif scheme.kind is SchemeKind.PAIRWISE_RATIO:
        mask = rows.a == a
        _check_floor(p_a[mask], floor, f"P(A={rows.label_of(a)} | V)")
        weights = np.zeros(rows.n)
        weights[mask] = probs[mask, scheme.other] / p_a[mask]
    else:  # shared space over the (a, other) pair
        share_a = float(np.mean(rows.a == a))
        share_b = float(np.mean(rows.a == scheme.other))
        p_b = probs[:, scheme.other]
        denom = share_a * p_b + share_b * p_a
        # the target lives on the overlap region: zero mass for either group
        # puts a row outside it regardless of the ratio's limit
        overlap = (p_a > 0.0) & (p_b > 0.0) & (denom > 0.0)
        weights = np.zeros(rows.n)
        for code, numer in ((a, p_b), (scheme.other, p_a)):
            mask = (rows.a == code) & overlap
            weights[mask] = numer[mask] / denom[mask]
    return WeightSet(weights, scheme, a, group_model.v)


def _check_floor(p: np.ndarray, floor: float, name: str) -> None:
    if p.size and float(p.min()) < floor:
        raise ExtremeWeightsError(
            f"{name} reaches {float(p.min()):.2e}, below the stability floor {floor:.0e}; "
            "inverse weights this extreme produce unstable, high-variance estimates "
            "(lower `floor` explicitly to proceed)"
        )


def weighted_population_estimate(
    metric: MetricSpec, y: np.ndarray, r: np.ndarray, weights: WeightSet
) -> MetricResult:
    """The weighted population value of the metric (the mapped estimate)."""
    return evaluate(metric, y, r, weights.weights)


def t_statistic(
    metric: MetricSpec,
    data: Dataset,
    scores: np.ndarray,
    a: int,
    weights: WeightSet,
) -> MetricResult:
    """Unweighted subgroup metric minus the weighted population estimate.

    Zero (up to noise) exactly when the score/label pair is independent of
    subgroup membership given the control variable the weights condition on.
    """
    mask = data.subgroup_mask(a)
    if not mask.any():
        raise ValueError(f"subgroup {data.label_of(a)} has no rows")
    sub = evaluate(metric, data.y[mask], scores[mask])
    pop = weighted_population_estimate(metric, data.y, scores, weights)
    if not sub.defined:
        return MetricResult(float("nan"), 0.0, f"subgroup estimate undefined: {sub.undefined_reason}")
    if not pop.defined:
        return MetricResult(float("nan"), 0.0, f"weighted estimate undefined: {pop.undefined_reason}")
    return MetricResult(sub.value - pop.value, min(sub.effective_sample_size, pop.effective_sample_size))

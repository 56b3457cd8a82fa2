"""Controlled disaggregated evaluation against the theoretical predictions.

The audit takes a fitted (or closed-form) scoring model, maps the population
onto each subgroup along a control variable, and compares every subgroup
metric to its weighted population counterpart. Each comparison carries the
transcribed theoretical prediction for its setting, so the report reduces to
per-cell verdicts: consistent, inconsistent, or inconclusive.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .data import Dataset
from .dgp import DgpSpec, Family, Policy, Selection, bayes_score, sample, sample_selected
from .inference import (
    BootstrapConfig,
    CalibrationCurve,
    IntervalEstimate,
    bootstrap_vector_ci,
    calibration_curve,
)
from .learner import (
    CovariatePolicy,
    FitConfig,
    GroupModel,
    fit,
    fit_group_model,
    fit_group_model_crossfit,
)
from .metrics import DEFAULT_METRICS, MetricId, MetricResult, MetricSpec, evaluate, log_loss
from .predictions import (
    Prediction,
    PropertyKind,
    independence_prediction,
    selection_prediction,
    setting_group,
    stability_prediction,
)
from .weighting import SchemeKind, WeightScheme, build_weights

REPORT_SCHEMA_VERSION = 1
CALIBRATION_BINS = 10
# a subgroup counts as calibrated when at most this many bins break their band
MAX_VIOLATIONS_CALIBRATED = 1
# declaring miscalibration requires at least this many broken bins in a subgroup
MIN_VIOLATIONS_MISCALIBRATED = 2

# metrics where smaller values are better (orients benefit comparisons)
_LOWER_IS_BETTER = {MetricId.LOG_LOSS.value}
# model comparisons carry an expected direction only where improvement is
# predicted to be strict
_COMPARED_METRICS = (MetricId.LOG_LOSS.value, MetricId.NET_BENEFIT.value)


@dataclass
class OracleModel:
    """Closed-form conditional-probability scorer for a synthetic setting."""

    spec: DgpSpec
    policy: CovariatePolicy

    def score(self, dataset: Dataset) -> np.ndarray:
        pol = Policy.AGNOSTIC if self.policy is CovariatePolicy.AGNOSTIC else Policy.AWARE
        return bayes_score(self.spec, dataset.x[:, 0], dataset.a, pol)


@dataclass(frozen=True)
class AuditConfig:
    n_train: int = 50_000
    n_test: int = 20_000
    seed: int = 0
    policies: tuple = ("agnostic", "aware", "stratified")
    metrics: tuple = DEFAULT_METRICS
    control_vars: tuple = ("x", "y", "r")
    replicates: int = 10_000
    ci_level: float = 0.95
    fit: FitConfig = field(default_factory=FitConfig)
    oracle: bool = False
    threads: int = 1
    calibration_bins: int = CALIBRATION_BINS
    comparisons: bool = True

    def bootstrap(self, salt: int) -> BootstrapConfig:
        return BootstrapConfig(
            replicates=self.replicates, seed=self.seed, ci_level=self.ci_level, salt=salt
        )


def verdict_for(prediction: Optional[Prediction], t: IntervalEstimate) -> Optional[str]:
    """Pure verdict rule: a Holds prediction expects the interval to cover 0."""
    if prediction is None:
        return None
    if (
        t.undefined_reason is not None
        or math.isnan(t.point)
        or math.isnan(t.lower)
        or math.isnan(t.upper)
    ):
        return "inconclusive"
    covers = t.lower <= 0.0 <= t.upper
    return "consistent" if covers == prediction.holds else "inconsistent"


@dataclass
class EvalCell:
    setting: str
    policy: str
    metric: str
    subgroup: str
    control: str
    subgroup_estimate: IntervalEstimate
    weighted_estimate: IntervalEstimate
    t_statistic: IntervalEstimate
    n_eff: float
    max_weight_share: float
    prediction: Optional[Prediction] = None
    verdict: Optional[str] = None

    @property
    def sort_key(self) -> tuple:
        return (self.setting, self.policy, self.control, self.metric, self.subgroup)

    def to_json(self) -> dict:
        return {
            "setting": self.setting,
            "policy": self.policy,
            "metric": self.metric,
            "subgroup": self.subgroup,
            "control": self.control,
            "subgroup_estimate": _interval_json(self.subgroup_estimate),
            "weighted_estimate": _interval_json(self.weighted_estimate),
            "t_statistic": _interval_json(self.t_statistic),
            "n_eff": self.n_eff,
            "max_weight_share": self.max_weight_share,
            "prediction": None if self.prediction is None else self.prediction.expected,
            "verdict": self.verdict,
        }


@dataclass
class ComparisonCell:
    policy_a: str
    policy_b: str
    metric: str
    subgroup: str              # "overall" or a subgroup label
    delta: IntervalEstimate    # metric(policy_a) - metric(policy_b)
    expected: Optional[str] = None   # "benefit" | "no_benefit"
    verdict: Optional[str] = None

    @property
    def sort_key(self) -> tuple:
        return (self.policy_a, self.policy_b, self.metric, self.subgroup)

    def to_json(self) -> dict:
        return {
            "policy_a": self.policy_a,
            "policy_b": self.policy_b,
            "metric": self.metric,
            "subgroup": self.subgroup,
            "delta": _interval_json(self.delta),
            "expected": self.expected,
            "verdict": self.verdict,
        }


@dataclass
class CalibrationCell:
    policy: str
    subgroup: str
    curve: CalibrationCurve
    violations: int
    prediction: Optional[Prediction] = None

    @property
    def sort_key(self) -> tuple:
        return (self.policy, self.subgroup)

    def to_json(self) -> dict:
        return {
            "policy": self.policy,
            "subgroup": self.subgroup,
            "curve": self.curve.to_json(),
            "violations": self.violations,
            "prediction": None if self.prediction is None else self.prediction.expected,
        }


@dataclass
class CalibrationSummary:
    """Setting-level calibration verdict for one policy.

    A calibrated prediction is confirmed when every subgroup stays within its
    bands (up to one stray bin); a miscalibration prediction is confirmed
    when some subgroup breaks at least two bins.
    """

    policy: str
    prediction: Optional[Prediction]
    max_violations: int
    verdict: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "policy": self.policy,
            "prediction": None if self.prediction is None else self.prediction.expected,
            "max_violations": self.max_violations,
            "verdict": self.verdict,
        }


def _interval_json(iv: IntervalEstimate) -> dict:
    def _f(v):
        return None if (v is None or (isinstance(v, float) and math.isnan(v))) else v

    return {
        "point": _f(iv.point),
        "lower": _f(iv.lower),
        "upper": _f(iv.upper),
        "undefined_replicates": iv.undefined_replicates,
        "undefined_reason": iv.undefined_reason,
    }


def _model_scores(model, data: Dataset) -> np.ndarray:
    return np.asarray(model.score(data), dtype=float)


# ---------------------------------------------------------------------------
# controlled evaluation


def run_controlled_evaluation(
    data: Dataset,
    model,
    v: str,
    metrics: Sequence[MetricSpec],
    config: BootstrapConfig,
    *,
    group_model: GroupModel,
    family: Optional[Family] = None,
    selection: Selection = Selection.NONE,
    policy_label: Optional[str] = None,
    optimal: bool = True,
) -> list[EvalCell]:
    """Subgroup vs weighted-population estimates for every metric and subgroup.

    All statistics of one run share each replicate's joint resample, so the
    subgroup estimate, the weighted population estimate, and their difference
    are computed on identical rows. Per-cell failures (undefined metrics,
    degenerate weights) mark the affected cells inconclusive instead of
    aborting the run.
    """
    scores = _model_scores(model, data)
    policy_label = policy_label or getattr(model, "policy", CovariatePolicy.AGNOSTIC).value
    categories = list(range(len(data.categories)))
    scheme = WeightScheme(SchemeKind.POP_TO_SUBGROUP)
    weight_sets = {
        a: build_weights(group_model, scheme, a, data, scores) for a in categories
    }
    masks = {a: data.subgroup_mask(a) for a in categories}
    y = data.y

    components: list[tuple[int, MetricSpec]] = [
        (a, metric) for a in categories for metric in metrics
    ]

    def statistic(idx: np.ndarray):
        yi = y[idx]
        ri = scores[idx]
        out = []
        for a, metric in components:
            mi = masks[a][idx]
            wi = weight_sets[a].weights[idx]
            sub = evaluate(metric, yi[mi], ri[mi])
            pop = evaluate(metric, yi, ri, wi)
            if not sub.defined:
                t = MetricResult(float("nan"), 0.0, f"subgroup estimate undefined: {sub.undefined_reason}")
            elif not pop.defined:
                t = MetricResult(float("nan"), 0.0, f"weighted estimate undefined: {pop.undefined_reason}")
            else:
                t = MetricResult(sub.value - pop.value, 0.0)
            out.extend((sub, pop, t))
        return out

    intervals = bootstrap_vector_ci(statistic, data.n, config, strict=False)
    cells = []
    setting_name = family.value if family is not None else "external"
    for j, (a, metric) in enumerate(components):
        sub_iv, pop_iv, t_iv = intervals[3 * j : 3 * j + 3]
        prediction = None
        if family is not None:
            if selection is not Selection.NONE:
                if v == "r":
                    prediction = selection_prediction(
                        family, selection, policy_label, PropertyKind.SUFFICIENCY
                    )
            else:
                prediction = stability_prediction(family, policy_label, v, optimal)
        cells.append(
            EvalCell(
                setting=setting_name,
                policy=policy_label,
                metric=metric.key,
                subgroup=str(data.label_of(a)),
                control=v,
                subgroup_estimate=sub_iv,
                weighted_estimate=pop_iv,
                t_statistic=t_iv,
                n_eff=weight_sets[a].n_eff,
                max_weight_share=weight_sets[a].max_weight_share,
                prediction=prediction,
                verdict=verdict_for(prediction, t_iv),
            )
        )
    return cells


def sufficiency_test(
    data: Dataset,
    scores: np.ndarray,
    config: BootstrapConfig,
    fit_config: FitConfig = FitConfig(),
    folds: int = 5,
) -> dict:
    """Per-subgroup log-loss difference statistic controlled for the score.

    Uses out-of-fold subgroup-membership probabilities on the score, so a
    zero statistic is evidence that the score screens subgroup membership off
    the label.
    """
    group_model = fit_group_model_crossfit(data, scores, folds, fit_config)
    metric = log_loss()
    scheme = WeightScheme(SchemeKind.POP_TO_SUBGROUP)
    y = data.y
    scores = np.asarray(scores, dtype=float)
    categories = list(range(len(data.categories)))
    weight_sets = {a: build_weights(group_model, scheme, a, data, scores) for a in categories}
    masks = {a: data.subgroup_mask(a) for a in categories}

    def statistic(idx: np.ndarray):
        yi = y[idx]
        ri = scores[idx]
        out = []
        for a in categories:
            mi = masks[a][idx]
            sub = evaluate(metric, yi[mi], ri[mi])
            pop = evaluate(metric, yi, ri, weight_sets[a].weights[idx])
            if sub.defined and pop.defined:
                out.append(sub.value - pop.value)
            else:
                out.append(MetricResult(float("nan"), 0.0, "metric undefined"))
        return out

    intervals = bootstrap_vector_ci(statistic, data.n, config, strict=False)
    return {str(data.label_of(a)): iv for a, iv in zip(categories, intervals)}


def model_comparison(
    data: Dataset,
    model_a,
    model_b,
    metrics: Sequence[MetricSpec],
    config: BootstrapConfig,
    *,
    family: Optional[Family] = None,
    label_a: Optional[str] = None,
    label_b: Optional[str] = None,
) -> list[ComparisonCell]:
    """Paired performance differences metric(model_a) - metric(model_b).

    Both models are evaluated on identical resamples, overall and per
    subgroup. Where theory predicts a strict improvement the cell carries the
    expected direction and a verdict.
    """
    ra = _model_scores(model_a, data)
    rb = _model_scores(model_b, data)
    label_a = label_a or model_a.policy.value
    label_b = label_b or model_b.policy.value
    y = data.y
    groups = [("overall", np.ones(data.n, dtype=bool))] + [
        (str(data.label_of(a)), data.subgroup_mask(a)) for a in range(len(data.categories))
    ]
    components = [(name, metric) for name, _ in groups for metric in metrics]
    mask_by_name = dict(groups)

    def statistic(idx: np.ndarray):
        yi = y[idx]
        rai = ra[idx]
        rbi = rb[idx]
        out = []
        for name, metric in components:
            mi = mask_by_name[name][idx]
            va = evaluate(metric, yi[mi], rai[mi])
            vb = evaluate(metric, yi[mi], rbi[mi])
            if va.defined and vb.defined:
                out.append(va.value - vb.value)
            else:
                reason = va.undefined_reason or vb.undefined_reason
                out.append(MetricResult(float("nan"), 0.0, reason))
        return out

    intervals = bootstrap_vector_ci(statistic, data.n, config, strict=False)
    expected_benefit = None
    if family is not None:
        expected_benefit = setting_group(family) != "covariate_shift"
    cells = []
    for (name, metric), delta in zip(components, intervals):
        expected = None
        verdict = None
        if expected_benefit is not None and metric.key in _COMPARED_METRICS:
            expected = "benefit" if expected_benefit else "no_benefit"
            if delta.undefined_reason is not None or math.isnan(delta.point):
                verdict = "inconclusive"
            else:
                covers = delta.lower <= 0.0 <= delta.upper
                if expected == "no_benefit":
                    verdict = "consistent" if covers else "inconsistent"
                else:
                    if metric.key in _LOWER_IS_BETTER:
                        improved = delta.upper < 0.0
                    else:
                        improved = delta.lower > 0.0
                    verdict = "consistent" if improved else "inconsistent"
        cells.append(
            ComparisonCell(
                policy_a=label_a,
                policy_b=label_b,
                metric=metric.key,
                subgroup=name,
                delta=delta,
                expected=expected,
                verdict=verdict,
            )
        )
    return cells


def _calibration_cells(
    data: Dataset,
    model,
    policy_label: str,
    bins: int,
    family: Optional[Family],
    selection: Selection,
) -> tuple[list[CalibrationCell], CalibrationSummary]:
    scores = _model_scores(model, data)
    prediction = None
    if family is not None:
        if selection is not Selection.NONE:
            prediction = selection_prediction(
                family, selection, policy_label, PropertyKind.SUBGROUP_CALIBRATION
            )
        else:
            # with representative data, subgroup calibration of a conditional-
            # probability model is equivalent to the sufficiency criterion
            prediction = independence_prediction(
                family, policy_label, PropertyKind.SUFFICIENCY
            )
            prediction = replace(prediction, property=PropertyKind.SUBGROUP_CALIBRATION)
    cells = []
    worst = 0
    for a in range(len(data.categories)):
        mask = data.subgroup_mask(a)
        curve = calibration_curve(data.y[mask], scores[mask], bins=bins)
        violations = int(curve.violations().sum())
        worst = max(worst, violations)
        cells.append(
            CalibrationCell(
                policy=policy_label,
                subgroup=str(data.label_of(a)),
                curve=curve,
                violations=violations,
                prediction=prediction,
            )
        )
    verdict = None
    if prediction is not None:
        if prediction.holds:
            verdict = "consistent" if worst <= MAX_VIOLATIONS_CALIBRATED else "inconsistent"
        else:
            verdict = "consistent" if worst >= MIN_VIOLATIONS_MISCALIBRATED else "inconsistent"
    summary = CalibrationSummary(
        policy=policy_label, prediction=prediction, max_violations=worst, verdict=verdict
    )
    return cells, summary


# ---------------------------------------------------------------------------
# full audit


@dataclass
class AuditReport:
    setting: Optional[str]
    selection: str
    seed: int
    n_train: int
    n_test: int
    replicates: int
    ci_level: float
    oracle: bool
    cells: list = field(default_factory=list)
    comparisons: list = field(default_factory=list)
    calibration: list = field(default_factory=list)
    calibration_summaries: list = field(default_factory=list)

    def holds_inconsistent(self) -> bool:
        """True when any cell predicted to hold came back inconsistent."""
        for cell in self.cells:
            if cell.prediction is not None and cell.prediction.holds and cell.verdict == "inconsistent":
                return True
        for summary in self.calibration_summaries:
            if summary.prediction is not None and summary.prediction.holds and summary.verdict == "inconsistent":
                return True
        for comp in self.comparisons:
            if comp.expected == "no_benefit" and comp.verdict == "inconsistent":
                return True
        return False

    def verdict_counts(self) -> dict:
        counts = {"consistent": 0, "inconsistent": 0, "inconclusive": 0, "unscored": 0}
        for cell in self.cells:
            counts[cell.verdict or "unscored"] += 1
        return counts

    def to_json(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "kind": "shiftaudit_report",
            "setting": self.setting,
            "selection": self.selection,
            "seed": self.seed,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "replicates": self.replicates,
            "ci_level": self.ci_level,
            "oracle": self.oracle,
            "cells": [c.to_json() for c in sorted(self.cells, key=lambda c: c.sort_key)],
            "comparisons": [
                c.to_json() for c in sorted(self.comparisons, key=lambda c: c.sort_key)
            ],
            "calibration": [
                c.to_json() for c in sorted(self.calibration, key=lambda c: c.sort_key)
            ],
            "calibration_summaries": [
                s.to_json() for s in sorted(self.calibration_summaries, key=lambda s: s.policy)
            ],
        }


_POLICY_SALT = {"agnostic": 1, "aware": 2, "stratified": 3}
_CONTROL_SALT = {"x": 1, "y": 2, "r": 3}


def _fit_policy_models(train: Dataset, config: AuditConfig, spec: Optional[DgpSpec]):
    models = {}
    for name in config.policies:
        policy = CovariatePolicy(name)
        if config.oracle:
            if spec is None:
                raise ValueError("oracle mode requires a synthetic specification")
            models[name] = OracleModel(spec, policy)
        else:
            models[name] = fit(train, policy, config.fit)
    return models


def run_audit(
    spec: Optional[DgpSpec],
    config: AuditConfig = AuditConfig(),
    train: Optional[Dataset] = None,
    test: Optional[Dataset] = None,
) -> AuditReport:
    """Run the full pipeline for one setting (or external train/test data).

    Synthetic mode samples train/test splits from the generating process
    (training on the selected population when it carries a selection
    mechanism) and attaches theoretical predictions to every cell. External
    mode evaluates the same machinery without predictions.
    """
    selection = spec.selection if spec is not None else Selection.NONE
    if train is None or test is None:
        if spec is None:
            raise ValueError("external mode requires explicit train and test datasets")
        if selection is not Selection.NONE:
            train = sample_selected(spec, config.n_train, 2 * config.seed)
        else:
            train = sample(spec, config.n_train, 2 * config.seed)
        test = sample(spec, config.n_test, 2 * config.seed + 1)
    family = spec.family if spec is not None else None

    models = _fit_policy_models(train, config, spec)
    scores = {name: _model_scores(model, test) for name, model in models.items()}

    control_vars = ("r",) if selection is not Selection.NONE else tuple(config.control_vars)
    group_models = {}
    for v in control_vars:
        if v == "r":
            for name in config.policies:
                group_models[("r", name)] = fit_group_model_crossfit(
                    test, scores[name], config.fit.folds, config.fit
                )
        else:
            group_models[(v, None)] = fit_group_model(train, v, config.fit)

    report = AuditReport(
        setting=family.value if family is not None else None,
        selection=selection.value,
        seed=config.seed,
        n_train=config.n_train,
        n_test=config.n_test,
        replicates=config.replicates,
        ci_level=config.ci_level,
        oracle=config.oracle,
    )

    def eval_pass(name: str, v: str) -> list[EvalCell]:
        salt = _POLICY_SALT[name] * 16 + _CONTROL_SALT[v]
        gm = group_models[("r", name)] if v == "r" else group_models[(v, None)]
        return run_controlled_evaluation(
            test,
            models[name],
            v,
            config.metrics,
            config.bootstrap(salt),
            group_model=gm,
            family=family,
            selection=selection,
            policy_label=name,
        )

    passes = [(name, v) for name in config.policies for v in control_vars]
    comparison_pairs = []
    if config.comparisons:
        if "aware" in config.policies and "agnostic" in config.policies:
            comparison_pairs.append(("aware", "agnostic", 900))
        if "stratified" in config.policies and "agnostic" in config.policies:
            comparison_pairs.append(("stratified", "agnostic", 901))

    def comparison_pass(pair):
        name_a, name_b, salt = pair
        return model_comparison(
            test,
            models[name_a],
            models[name_b],
            config.metrics,
            config.bootstrap(salt),
            family=family,
            label_a=name_a,
            label_b=name_b,
        )

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            cell_futures = [pool.submit(eval_pass, name, v) for name, v in passes]
            comp_futures = [pool.submit(comparison_pass, pair) for pair in comparison_pairs]
            for fut in cell_futures:
                report.cells.extend(fut.result())
            for fut in comp_futures:
                report.comparisons.extend(fut.result())
    else:
        for name, v in passes:
            report.cells.extend(eval_pass(name, v))
        for pair in comparison_pairs:
            report.comparisons.extend(comparison_pass(pair))

    for name in config.policies:
        cells, summary = _calibration_cells(
            test, models[name], name, config.calibration_bins, family, selection
        )
        report.calibration.extend(cells)
        report.calibration_summaries.append(summary)
    return report


def selection_audit(spec: DgpSpec, config: AuditConfig = AuditConfig()) -> AuditReport:
    """Train on the selected population, audit on the full population."""
    if spec.selection is Selection.NONE:
        raise ValueError("selection_audit requires a spec with a selection mechanism")
    return run_audit(spec, config)


REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": [
        "schema_version", "kind", "setting", "selection", "seed",
        "n_train", "n_test", "replicates", "ci_level", "oracle",
        "cells", "comparisons", "calibration", "calibration_summaries",
    ],
    "properties": {
        "schema_version": {"const": REPORT_SCHEMA_VERSION},
        "kind": {"const": "shiftaudit_report"},
        "setting": {"type": ["string", "null"]},
        "selection": {"type": "string"},
        "seed": {"type": "integer"},
        "n_train": {"type": "integer"},
        "n_test": {"type": "integer"},
        "replicates": {"type": "integer"},
        "ci_level": {"type": "number"},
        "oracle": {"type": "boolean"},
        "cells": {
            "type": "array",
            "items": {
                "type": "object",
                "required": [
                    "setting", "policy", "metric", "subgroup", "control",
                    "subgroup_estimate", "weighted_estimate", "t_statistic",
                    "n_eff", "max_weight_share", "prediction", "verdict",
                ],
                "properties": {
                    "prediction": {"enum": ["holds", "fails", None]},
                    "verdict": {"enum": ["consistent", "inconsistent", "inconclusive", None]},
                },
            },
        },
        "comparisons": {"type": "array"},
        "calibration": {"type": "array"},
        "calibration_summaries": {"type": "array"},
    },
}


def validate_report(obj: dict) -> None:
    import jsonschema

    jsonschema.validate(obj, REPORT_SCHEMA)

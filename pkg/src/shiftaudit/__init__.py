"""Controlled disaggregated evaluation under subgroup distribution shift.

The package generates synthetic data from causally structured subgroup-shift
settings, fits probabilistic classifiers that are agnostic of, aware of, or
stratified by subgroup membership, and audits disaggregated evaluations by
reweighting population performance onto each subgroup's distribution of a
control variable. Outcomes are checked against transcribed theoretical
predictions of when performance differences are explained by the controls.
"""

from .audit import (
    AuditConfig,
    AuditReport,
    OracleModel,
    model_comparison,
    run_audit,
    run_controlled_evaluation,
    selection_audit,
    sufficiency_test,
    verdict_for,
)
from .data import Dataset, read_csv, write_csv
from .dgp import (
    DgpSpec,
    Family,
    Policy,
    Selection,
    bayes_score,
    group_posterior,
    preset,
    sample,
    sample_selected,
    selection_probability,
)
from .inference import (
    BootstrapConfig,
    CalibrationCurve,
    IntervalEstimate,
    bootstrap_ci,
    bootstrap_vector_ci,
    calibration_curve,
    wilson_interval,
)
from .learner import (
    ConvergenceError,
    CovariatePolicy,
    FitConfig,
    FittedModel,
    GroupModel,
    fit,
    fit_group_model,
    fit_group_model_crossfit,
    score,
)
from .metrics import (
    DEFAULT_METRICS,
    MetricId,
    MetricResult,
    MetricSpec,
    evaluate,
    threshold_defaults,
)
from .predictions import Prediction, PropertyKind, prediction_table, setting_group
from .weighting import (
    ExtremeWeightsError,
    SchemeKind,
    WeightScheme,
    WeightSet,
    build_weights,
    t_statistic,
    weighted_population_estimate,
)

__version__ = "0.1.0"

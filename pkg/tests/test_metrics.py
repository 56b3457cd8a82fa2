import math

import numpy as np
import pytest

from shiftaudit.dgp import Family, Policy, bayes_score, preset, sample
from shiftaudit.metrics import (
    MetricId,
    auc_roc,
    classification_rate,
    evaluate,
    log_loss,
    net_benefit,
    precision,
    sensitivity,
    specificity,
    threshold_defaults,
)

from conftest import SEED

ALL_METRICS = (
    log_loss(), auc_roc(), sensitivity(), specificity(),
    precision(), net_benefit(), classification_rate(),
)


# -- independent reference implementations (kept deliberately naive) --------

def ref_log_loss(y, r):
    r = np.clip(r, 1e-12, 1 - 1e-12)
    return float(np.mean([-math.log(ri) if yi else -math.log(1 - ri) for yi, ri in zip(y, r)]))


def ref_threshold_counts(y, r, tau=0.5):
    yhat = r >= tau
    tp = int(np.sum(yhat & (y == 1)))
    fp = int(np.sum(yhat & (y == 0)))
    fn = int(np.sum(~yhat & (y == 1)))
    tn = int(np.sum(~yhat & (y == 0)))
    return tp, fp, fn, tn


def ref_auc_pairwise(y, r, w=None):
    if w is None:
        w = np.ones_like(r)
    num = 0.0
    den = 0.0
    for i in np.flatnonzero(y == 1):
        for j in np.flatnonzero(y == 0):
            pair = w[i] * w[j]
            den += pair
            if r[i] > r[j]:
                num += pair
            elif r[i] == r[j]:
                num += 0.5 * pair
    return num / den


class TestPointExamples:
    def test_log_loss_half(self):
        res = evaluate(log_loss(), np.array([1]), np.array([0.5]))
        assert res.value == pytest.approx(math.log(2), abs=1e-12)

    def test_net_benefit_balanced_thresholds(self):
        res = evaluate(net_benefit(), np.array([1, 0, 0]), np.array([0.9, 0.9, 0.1]))
        assert res.value == pytest.approx(0.0, abs=1e-15)

    def test_auc_perfect_and_tied(self):
        assert evaluate(auc_roc(), np.array([0, 1]), np.array([0.2, 0.8])).value == 1.0
        assert evaluate(auc_roc(), np.array([0, 1]), np.array([0.5, 0.5])).value == 0.5

    def test_threshold_defaults(self):
        assert threshold_defaults() == (0.5, 0.5)

    def test_net_benefit_preference_limits(self):
        y = np.array([1, 1, 0, 0, 1])
        r = np.array([0.9, 0.2, 0.8, 0.3, 0.7])
        # tau_p = 0.5 reduces to (TP - FP)/n
        tp, fp, _, _ = ref_threshold_counts(y, r)
        assert evaluate(net_benefit(), y, r).value == pytest.approx((tp - fp) / len(y))
        # tau_p -> 0 leaves only the true-positive share
        res = evaluate(net_benefit(tau_p=1e-12), y, r)
        assert res.value == pytest.approx(tp / len(y), abs=1e-9)


class TestWeightedAgainstReference:
    def setup_method(self):
        rng = np.random.default_rng(7)
        self.y = rng.integers(0, 2, 1000)
        self.r = rng.random(1000)

    def test_uniform_weights_match_unweighted_reference(self):
        y, r = self.y, self.r
        w = np.full(len(y), 3.25)   # any constant
        tp, fp, fn, tn = ref_threshold_counts(y, r)
        expected = {
            MetricId.LOG_LOSS: ref_log_loss(y, r),
            MetricId.AUC_ROC: ref_auc_pairwise(y, r),
            MetricId.SENSITIVITY: tp / (tp + fn),
            MetricId.SPECIFICITY: tn / (tn + fp),
            MetricId.PRECISION: tp / (tp + fp),
            MetricId.NET_BENEFIT: (tp - fp) / len(y),
            MetricId.CLASSIFICATION_RATE: (tp + fp) / len(y),
        }
        for metric in ALL_METRICS:
            weighted = evaluate(metric, y, r, w).value
            plain = evaluate(metric, y, r).value
            assert weighted == pytest.approx(expected[metric.kind], abs=1e-12), metric.kind
            assert weighted == pytest.approx(plain, abs=1e-12)

    def test_subgroup_indicator_weights_equal_subgroup_metric(self):
        rng = np.random.default_rng(8)
        a = rng.integers(0, 2, 1000)
        w = (a == 1).astype(float)
        for metric in ALL_METRICS:
            masked = evaluate(metric, self.y[a == 1], self.r[a == 1])
            weighted = evaluate(metric, self.y, self.r, w)
            assert weighted.value == pytest.approx(masked.value, abs=1e-12), metric.kind

    def test_weighted_auc_matches_pairwise_products(self):
        rng = np.random.default_rng(9)
        y = rng.integers(0, 2, 300)
        r = np.round(rng.random(300), 2)      # force plenty of ties
        w = rng.gamma(2.0, 1.0, 300)
        ours = evaluate(auc_roc(), y, r, w).value
        assert ours == pytest.approx(ref_auc_pairwise(y, r, w), abs=1e-12)


class TestInvariances:
    def test_auc_invariant_under_increasing_transform(self):
        rng = np.random.default_rng(10)
        y = rng.integers(0, 2, 400)
        r = np.round(rng.random(400), 1)      # ties included
        w = rng.random(400) + 0.1
        base = evaluate(auc_roc(), y, r, w).value
        for transform in (lambda v: v**3, lambda v: 1 / (1 + np.exp(-5 * v)), lambda v: 2 * v + 1):
            assert evaluate(auc_roc(), y, transform(r), w).value == pytest.approx(base, abs=1e-12)

    def test_thresholded_metrics_invariant_when_crossing_set_preserved(self):
        rng = np.random.default_rng(11)
        y = rng.integers(0, 2, 500)
        r = rng.random(500)
        # monotone map fixing the threshold: tau=0.5 maps to itself
        r2 = 0.5 + 0.5 * np.tanh(3 * (r - 0.5))
        assert np.array_equal(r >= 0.5, r2 >= 0.5)
        for metric in (sensitivity(), specificity(), precision(), net_benefit(), classification_rate()):
            assert evaluate(metric, y, r2).value == pytest.approx(
                evaluate(metric, y, r).value, abs=1e-12
            )

    def test_bayes_scores_floor_fitted_log_loss(self, protocol_data, protocol_models):
        # conditional-probability oracle cannot lose to a fitted model except by noise
        for family in Family:
            _, test = protocol_data(family)
            fitted = protocol_models(family, "aware").score(test)
            oracle = bayes_score(preset(family), test.x[:, 0], test.a, Policy.AWARE)
            ll_oracle = evaluate(log_loss(), test.y, oracle).value
            ll_model = evaluate(log_loss(), test.y, fitted).value
            rng = np.random.default_rng(SEED)
            diffs = []
            for _ in range(200):
                idx = rng.integers(0, test.n, test.n)
                diffs.append(
                    evaluate(log_loss(), test.y[idx], oracle[idx]).value
                    - evaluate(log_loss(), test.y[idx], fitted[idx]).value
                )
            se = float(np.std(diffs))
            assert ll_oracle <= ll_model + se, family


class TestUndefined:
    def test_reasons(self):
        y0 = np.zeros(5, dtype=int)
        y1 = np.ones(5, dtype=int)
        r_low = np.full(5, 0.1)
        assert evaluate(sensitivity(), y0, r_low).undefined_reason == "no positive examples"
        assert evaluate(specificity(), y1, r_low).undefined_reason == "no negative examples"
        assert evaluate(precision(), y1, r_low).undefined_reason == "no predicted positives"
        assert evaluate(auc_roc(), y1, r_low).undefined_reason == "no negative examples"
        assert math.isnan(evaluate(auc_roc(), y1, r_low).value)

    def test_zero_weight_sum(self):
        res = evaluate(log_loss(), np.array([0, 1]), np.array([0.5, 0.5]), np.zeros(2))
        assert res.undefined_reason == "weight sum is zero"

    def test_validation(self):
        with pytest.raises(ValueError):
            evaluate(log_loss(), np.array([0, 1]), np.array([0.5]))
        with pytest.raises(ValueError):
            evaluate(log_loss(), np.array([0, 1]), np.array([0.5, 0.5]), np.array([1.0, -1.0]))

    def test_effective_sample_size_reported(self):
        res = evaluate(log_loss(), np.array([0, 1, 1]), np.array([0.2, 0.8, 0.9]),
                       np.array([1.0, 1.0, 2.0]))
        assert res.effective_sample_size == pytest.approx(16 / 6)

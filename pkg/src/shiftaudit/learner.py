"""Penalized logistic models under three subgroup covariate policies.

The learner family is L2-penalized logistic regression fit by damped Newton
iterations on a whitened feature basis. The default basis is a restricted
cubic spline per covariate (linear tails, cubic interior), which nests the
linear log-odds of the synthetic families while leaving enough flexibility
for mixture-induced curvature. Subgroup-aware models append reference-coded
subgroup dummies plus dummy-by-basis interactions, so an aware fit can
express exactly the same per-subgroup functions as a stratified fit.

Subgroup-membership models P(A | V) reuse the same machinery with a
multinomial head; for V = R they are fit by nested cross-validation on the
evaluation split only, producing strictly out-of-fold probabilities.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .data import Dataset
from .metrics import clip_scores
from .rng import STREAM_FOLDS, substream


class ConvergenceError(RuntimeError):
    pass


class CovariatePolicy(str, enum.Enum):
    AGNOSTIC = "agnostic"
    AWARE = "aware"
    STRATIFIED = "stratified"


@dataclass(frozen=True)
class FitConfig:
    transform: str = "spline"            # "linear" | "quadratic" | "spline" | "spline_quad"
    spline_knots: int = 5
    reg_grid: tuple = (1e-4, 1e-2, 1.0)
    reg: Optional[float] = None          # fixed strength; skips cross-validation
    folds: int = 5
    seed: int = 0
    max_iter: int = 100
    tol: float = 1e-8
    # P(A | R) needs heavier tails than the label models: when class-
    # conditional score spreads differ, its log-odds grow quadratically
    r_transform: str = "spline_quad"


# ---------------------------------------------------------------------------
# feature basis


def _rcs_terms(x: np.ndarray, knots: np.ndarray) -> np.ndarray:
    """Restricted cubic spline terms for one column (excluding the linear term)."""
    k = knots
    K = len(k)
    if K < 3 or len(np.unique(k)) < K:
        return np.empty((len(x), 0))
    denom = (k[-1] - k[0]) ** 2

    def cube(u):
        return np.maximum(u, 0.0) ** 3

    cols = []
    for j in range(K - 2):
        term = (
            cube(x - k[j])
            - cube(x - k[K - 2]) * (k[-1] - k[j]) / (k[-1] - k[K - 2])
            + cube(x - k[-1]) * (k[K - 2] - k[j]) / (k[-1] - k[K - 2])
        )
        cols.append(term / denom)
    return np.column_stack(cols)


_KNOT_QUANTILES = {
    3: (10.0, 50.0, 90.0),
    4: (5.0, 35.0, 65.0, 95.0),
    5: (5.0, 27.5, 50.0, 72.5, 95.0),
    6: (5.0, 23.0, 41.0, 59.0, 77.0, 95.0),
    7: (2.5, 18.33, 34.17, 50.0, 65.83, 81.67, 97.5),
}


@dataclass
class FeatureMap:
    """Basis expansion plus a whitening affine map fit on training columns.

    Whitening keeps the Newton system well conditioned and makes the ridge
    penalty act evenly across basis directions; the raw-basis coefficients
    remain recoverable through the stored affine map.
    """

    kind: str
    knots: list = field(default_factory=list)   # per input column; empty for non-spline
    mean: np.ndarray = None
    whiten: np.ndarray = None

    @staticmethod
    def fit(x: np.ndarray, kind: str, spline_knots: int = 5) -> "FeatureMap":
        if kind not in ("linear", "quadratic", "spline", "spline_quad"):
            raise ValueError(f"unknown transform {kind!r}")
        knots = []
        if kind in ("spline", "spline_quad"):
            qs = _KNOT_QUANTILES[spline_knots]
            knots = [np.unique(np.percentile(x[:, j], qs)) for j in range(x.shape[1])]
        fm = FeatureMap(kind=kind, knots=knots)
        basis = fm.raw_basis(x)
        fm.mean = basis.mean(axis=0)
        centered = basis - fm.mean
        cov = centered.T @ centered / max(len(basis), 1)
        jitter = 1e-9 * max(float(np.trace(cov)) / max(cov.shape[0], 1), 1.0)
        chol = np.linalg.cholesky(cov + jitter * np.eye(cov.shape[0]))
        fm.whiten = np.linalg.inv(chol).T
        return fm

    def raw_basis(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        cols = []
        for j in range(x.shape[1]):
            xj = x[:, j]
            cols.append(xj[:, None])
            if self.kind in ("quadratic", "spline_quad"):
                cols.append((xj**2)[:, None])
            if self.kind in ("spline", "spline_quad"):
                cols.append(_rcs_terms(xj, self.knots[j]))
        return np.hstack(cols)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (self.raw_basis(x) - self.mean) @ self.whiten

    @property
    def n_features(self) -> int:
        return self.whiten.shape[1]

    def raw_coefficients(self, coef: np.ndarray, intercept: float) -> tuple[np.ndarray, float]:
        """Map whitened-space coefficients back to the raw basis."""
        raw = self.whiten @ coef
        return raw, float(intercept - self.mean @ raw)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "knots": [k.tolist() for k in self.knots],
            "mean": self.mean.tolist(),
            "whiten": self.whiten.tolist(),
        }

    @staticmethod
    def from_json(obj: dict) -> "FeatureMap":
        return FeatureMap(
            kind=obj["kind"],
            knots=[np.asarray(k) for k in obj["knots"]],
            mean=np.asarray(obj["mean"]),
            whiten=np.asarray(obj["whiten"]),
        )


# ---------------------------------------------------------------------------
# Newton solvers


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -700.0, 700.0)))


def _newton_logistic(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    max_iter: int = 100,
    tol: float = 1e-8,
) -> np.ndarray:
    """Minimize mean Bernoulli NLL + (lam/2)||beta||^2 (intercept unpenalized).

    X must already include a leading intercept column. Newton steps are
    damped by backtracking until the objective decreases.
    """
    n, p = X.shape
    beta = np.zeros(p)
    ybar = min(max(float(np.mean(y)), 1e-12), 1 - 1e-12)
    beta[0] = np.log(ybar / (1 - ybar))
    pen = np.full(p, lam)
    pen[0] = 0.0

    def objective(b):
        eta = X @ b
        # log(1 + exp(eta)) - y*eta, computed stably
        nll = np.mean(np.logaddexp(0.0, eta) - y * eta)
        return nll + 0.5 * np.sum(pen * b * b)

    obj = objective(beta)
    for _ in range(max_iter):
        eta = X @ beta
        prob = _sigmoid(eta)
        grad = X.T @ (prob - y) / n + pen * beta
        gnorm = float(np.max(np.abs(grad)))
        if gnorm <= tol:
            return beta
        w = np.maximum(prob * (1.0 - prob), 1e-10)
        hess = (X.T * w) @ X / n + np.diag(pen)
        step = np.linalg.solve(hess, grad)
        # near the optimum the objective decrease is below float resolution;
        # take the pure Newton step and let the gradient test decide
        if gnorm < 1e-4:
            beta = beta - step
            obj = objective(beta)
            continue
        t = 1.0
        for _ in range(50):
            cand = beta - t * step
            cand_obj = objective(cand)
            if cand_obj <= obj - 1e-4 * t * float(grad @ step):
                break
            t *= 0.5
        beta = beta - t * step
        obj = objective(beta)
    eta = X @ beta
    grad = X.T @ (_sigmoid(eta) - y) / n + pen * beta
    gnorm = float(np.max(np.abs(grad)))
    if gnorm <= tol:
        return beta
    raise ConvergenceError(
        f"logistic solver did not converge in {max_iter} iterations "
        f"(gradient norm {gnorm:.3e}, tolerance {tol:.1e})"
    )


def _softmax_probs(eta: np.ndarray) -> np.ndarray:
    """Class probabilities for logits with an implicit zero reference column."""
    full = np.concatenate([np.zeros((eta.shape[0], 1)), eta], axis=1)
    full -= full.max(axis=1, keepdims=True)
    ex = np.exp(full)
    return ex / ex.sum(axis=1, keepdims=True)


def _newton_multinomial(
    X: np.ndarray,
    codes: np.ndarray,
    n_classes: int,
    lam: float,
    max_iter: int = 100,
    tol: float = 1e-8,
) -> np.ndarray:
    """Reference-coded multinomial fit; returns theta of shape (K-1, p)."""
    n, p = X.shape
    km1 = n_classes - 1
    theta = np.zeros((km1, p))
    counts = np.bincount(codes, minlength=n_classes) / n
    theta[:, 0] = np.log(np.maximum(counts[1:], 1e-12) / max(counts[0], 1e-12))
    pen = np.full(p, lam)
    pen[0] = 0.0
    onehot = np.zeros((n, km1))
    for k in range(km1):
        onehot[:, k] = codes == k + 1

    def objective(th):
        eta = X @ th.T
        nll = np.mean(np.logaddexp.reduce(np.concatenate([np.zeros((n, 1)), eta], axis=1), axis=1)
                      - np.sum(onehot * eta, axis=1))
        return nll + 0.5 * np.sum(pen * th * th)

    obj = objective(theta)
    for _ in range(max_iter):
        eta = X @ theta.T
        probs = _softmax_probs(eta)[:, 1:]
        grad = (X.T @ (probs - onehot)).T / n + pen * theta
        gnorm = float(np.max(np.abs(grad)))
        if gnorm <= tol:
            return theta
        dim = km1 * p
        hess = np.empty((dim, dim))
        for k in range(km1):
            for m in range(km1):
                w = probs[:, k] * ((k == m) - probs[:, m])
                if k == m:
                    w = np.maximum(w, 1e-10)
                block = (X.T * w) @ X / n
                if k == m:
                    block = block + np.diag(pen)
                hess[k * p : (k + 1) * p, m * p : (m + 1) * p] = block
        step = np.linalg.solve(hess, grad.ravel()).reshape(km1, p)
        if gnorm < 1e-4:
            theta = theta - step
            obj = objective(theta)
            continue
        t = 1.0
        for _ in range(50):
            cand = theta - t * step
            cand_obj = objective(cand)
            if cand_obj <= obj - 1e-4 * t * float(np.sum(grad * step)):
                break
            t *= 0.5
        theta = theta - t * step
        obj = objective(theta)
    eta = X @ theta.T
    probs = _softmax_probs(eta)[:, 1:]
    grad = (X.T @ (probs - onehot)).T / n + pen * theta
    gnorm = float(np.max(np.abs(grad)))
    if gnorm <= tol:
        return theta
    raise ConvergenceError(
        f"multinomial solver did not converge in {max_iter} iterations "
        f"(gradient norm {gnorm:.3e}, tolerance {tol:.1e})"
    )


# ---------------------------------------------------------------------------
# cross-validation


def stratified_folds(labels: np.ndarray, n_folds: int, seed: int, salt: int = 0) -> np.ndarray:
    """Deterministic stratified fold assignment (round-robin within class)."""
    rng = substream(seed, STREAM_FOLDS, salt)
    order = rng.permutation(len(labels))
    fold = np.empty(len(labels), dtype=int)
    for cls in np.unique(labels):
        idx = order[labels[order] == cls]
        fold[idx] = np.arange(len(idx)) % n_folds
    return fold


def _binary_cv_loss(X, y, lam, fold, n_folds, max_iter, tol) -> float:
    total = 0.0
    for f in range(n_folds):
        tr = fold != f
        beta = _newton_logistic(X[tr], y[tr], lam, max_iter, tol)
        prob = clip_scores(_sigmoid(X[~tr] @ beta))
        yv = y[~tr]
        total += float(np.mean(-(yv * np.log(prob) + (1 - yv) * np.log1p(-prob))))
    return total / n_folds


def _multinomial_cv_loss(X, codes, n_classes, lam, fold, n_folds, max_iter, tol) -> float:
    total = 0.0
    for f in range(n_folds):
        tr = fold != f
        theta = _newton_multinomial(X[tr], codes[tr], n_classes, lam, max_iter, tol)
        probs = _softmax_probs(X[~tr] @ theta.T)
        picked = np.clip(probs[np.arange((~tr).sum()), codes[~tr]], 1e-12, None)
        total += float(np.mean(-np.log(picked)))
    return total / n_folds


def _select_strength(losses: dict[float, float]) -> float:
    """Minimum CV loss; ties broken toward the stronger penalty."""
    best = min(losses.values())
    return max(lam for lam, loss in losses.items() if loss <= best + 1e-12)


# ---------------------------------------------------------------------------
# outcome models


@dataclass
class _Branch:
    feature_map: FeatureMap
    coef: np.ndarray      # whitened-space coefficients (without intercept)
    intercept: float


def _check_both_classes(y: np.ndarray, context: str) -> None:
    if len(y) == 0:
        raise ValueError(f"{context}: no rows")
    if y.min() == y.max():
        raise ValueError(f"{context}: only class y={int(y[0])} present")


def _aware_design(base: np.ndarray, a: np.ndarray, n_categories: int) -> np.ndarray:
    """Base features plus reference-coded dummies and dummy-by-base interactions."""
    cols = [base]
    for c in range(1, n_categories):
        dummy = (a == c).astype(float)[:, None]
        cols.append(dummy)
        cols.append(base * dummy)
    return np.hstack(cols)


@dataclass
class FittedModel:
    """A probabilistic classifier with a declared covariate policy."""

    policy: CovariatePolicy
    categories: tuple
    branches: dict                 # key None for single-branch policies, else category code
    regularization: float
    transform: str
    seed: int = 0

    @property
    def n_branches(self) -> int:
        return len(self.branches)

    def _design(self, dataset: Dataset, branch: _Branch) -> np.ndarray:
        base = branch.feature_map.apply(dataset.x)
        if self.policy is CovariatePolicy.AWARE:
            if dataset.a.max(initial=0) >= len(self.categories):
                raise ValueError("dataset contains subgroup codes unknown to the model")
            return _aware_design(base, dataset.a, len(self.categories))
        return base

    def score(self, dataset: Dataset) -> np.ndarray:
        """P(Y=1 | covariates) per row, clipped into (0, 1)."""
        if self.policy is CovariatePolicy.STRATIFIED:
            r = np.empty(dataset.n)
            seen = np.zeros(dataset.n, dtype=bool)
            for code, branch in self.branches.items():
                mask = dataset.a == code
                seen |= mask
                if not mask.any():
                    continue
                z = branch.feature_map.apply(dataset.x[mask])
                r[mask] = _sigmoid(z @ branch.coef + branch.intercept)
            if not seen.all():
                missing = sorted(set(dataset.a[~seen].tolist()))
                raise ValueError(f"no stratified branch for subgroup code(s) {missing}")
            return clip_scores(r)
        branch = self.branches[None]
        design = self._design(dataset, branch)
        return clip_scores(_sigmoid(design @ branch.coef + branch.intercept))

    def raw_coefficients(self, code=None) -> tuple[np.ndarray, float]:
        """Coefficients in un-whitened basis units (agnostic/stratified branches)."""
        branch = self.branches[code]
        if self.policy is CovariatePolicy.AWARE:
            raise ValueError("raw coefficients of an aware design are not per-branch")
        return branch.feature_map.raw_coefficients(branch.coef, branch.intercept)

    def to_json(self) -> dict:
        return {
            "policy": self.policy.value,
            "categories": list(self.categories),
            "regularization": self.regularization,
            "transform": self.transform,
            "seed": self.seed,
            "branches": {
                "null" if code is None else str(code): {
                    "feature_map": br.feature_map.to_json(),
                    "coef": br.coef.tolist(),
                    "intercept": br.intercept,
                }
                for code, br in self.branches.items()
            },
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, sort_keys=True)

    @staticmethod
    def from_json(obj: dict) -> "FittedModel":
        branches = {}
        for key, br in obj["branches"].items():
            code = None if key == "null" else int(key)
            branches[code] = _Branch(
                feature_map=FeatureMap.from_json(br["feature_map"]),
                coef=np.asarray(br["coef"]),
                intercept=float(br["intercept"]),
            )
        return FittedModel(
            policy=CovariatePolicy(obj["policy"]),
            categories=tuple(obj["categories"]),
            branches=branches,
            regularization=float(obj["regularization"]),
            transform=obj["transform"],
            seed=int(obj.get("seed", 0)),
        )

    @staticmethod
    def load(path) -> "FittedModel":
        with open(path) as fh:
            return FittedModel.from_json(json.load(fh))


def _fit_single(
    design: np.ndarray, y: np.ndarray, config: FitConfig, salt: int
) -> tuple[np.ndarray, float]:
    """CV-select the penalty (unless fixed), then refit on all rows."""
    X = np.concatenate([np.ones((len(design), 1)), design], axis=1)
    if config.reg is not None:
        lam = float(config.reg)
    else:
        fold = stratified_folds(y, config.folds, config.seed, salt)
        losses = {
            lam: _binary_cv_loss(X, y, lam, fold, config.folds, config.max_iter, config.tol)
            for lam in config.reg_grid
        }
        lam = _select_strength(losses)
    beta = _newton_logistic(X, y, lam, config.max_iter, config.tol)
    return beta, lam


def fit(train: Dataset, policy: CovariatePolicy, config: FitConfig = FitConfig()) -> FittedModel:
    """Fit a probabilistic classifier under the given covariate policy."""
    policy = CovariatePolicy(policy)
    if train.n == 0:
        raise ValueError("training set is empty")
    if policy is CovariatePolicy.STRATIFIED:
        branches = {}
        lam_used = None
        for code in range(len(train.categories)):
            mask = train.subgroup_mask(code)
            label = train.label_of(code)
            _check_both_classes(train.y[mask], f"stratified branch a={label}")
            fm = FeatureMap.fit(train.x[mask], config.transform, config.spline_knots)
            beta, lam = _fit_single(fm.apply(train.x[mask]), train.y[mask], config, salt=code + 1)
            branches[code] = _Branch(fm, beta[1:], float(beta[0]))
            lam_used = lam
        return FittedModel(policy, train.categories, branches, lam_used, config.transform, config.seed)
    _check_both_classes(train.y, "training labels")
    fm = FeatureMap.fit(train.x, config.transform, config.spline_knots)
    base = fm.apply(train.x)
    design = (
        _aware_design(base, train.a, len(train.categories))
        if policy is CovariatePolicy.AWARE
        else base
    )
    beta, lam = _fit_single(design, train.y, config, salt=0)
    branch = _Branch(fm, beta[1:], float(beta[0]))
    return FittedModel(policy, train.categories, {None: branch}, lam, config.transform, config.seed)


def score(model: FittedModel, rows: Dataset) -> np.ndarray:
    return model.score(rows)


# ---------------------------------------------------------------------------
# subgroup-membership models


@dataclass
class GroupModel:
    """Multinomial model of P(A | V) for V in {x, y, r}.

    Cross-fitted models carry per-row out-of-fold probabilities for exactly
    the rows they were built on and refuse to extrapolate elsewhere.
    """

    categories: tuple
    v: str
    theta: Optional[np.ndarray] = None          # (K-1, p+1) with intercept first
    feature_map: Optional[FeatureMap] = None    # None when v == "y" or fixed
    cross_fitted: bool = False
    oof_probabilities: Optional[np.ndarray] = None
    fixed_probabilities: Optional[np.ndarray] = None

    @staticmethod
    def from_probabilities(probs: np.ndarray, categories: tuple, v: str) -> "GroupModel":
        """Wrap externally supplied P(A | V) values (e.g. a closed-form oracle)."""
        probs = np.asarray(probs, dtype=float)
        if probs.ndim != 2 or probs.shape[1] != len(categories):
            raise ValueError("probability matrix must be (n, n_categories)")
        return GroupModel(tuple(categories), v, fixed_probabilities=probs)

    def _design(self, dataset: Optional[Dataset], scores: Optional[np.ndarray]) -> np.ndarray:
        if self.v == "y":
            vals = dataset.y.astype(float)[:, None]
        elif self.v == "x":
            vals = self.feature_map.apply(dataset.x)
            return np.concatenate([np.ones((len(vals), 1)), vals], axis=1)
        else:
            if scores is None:
                raise ValueError("V=R group model needs the score vector")
            vals = self.feature_map.apply(_logit(scores)[:, None])
            return np.concatenate([np.ones((len(vals), 1)), vals], axis=1)
        return np.concatenate([np.ones((len(vals), 1)), vals], axis=1)

    def probabilities(
        self, dataset: Optional[Dataset] = None, scores: Optional[np.ndarray] = None
    ) -> np.ndarray:
        """(n, K) category probabilities; rows sum to one."""
        if self.fixed_probabilities is not None:
            return self.fixed_probabilities
        if self.cross_fitted:
            n = len(scores) if scores is not None else dataset.n
            if n != len(self.oof_probabilities):
                raise ValueError(
                    "cross-fitted group model only covers the rows it was fit on"
                )
            return self.oof_probabilities
        return _softmax_probs(self._design(dataset, scores) @ self.theta.T)


def _logit(r: np.ndarray) -> np.ndarray:
    rc = clip_scores(np.asarray(r, dtype=float))
    return np.log(rc) - np.log1p(-rc)


def _check_categories(codes: np.ndarray, categories: tuple) -> None:
    present = np.unique(codes)
    if len(present) < 2:
        raise ValueError("group model needs at least two subgroup categories present")
    if len(present) != len(categories):
        missing = sorted(set(range(len(categories))) - set(present.tolist()))
        raise ValueError(f"subgroup categories with no rows: {missing}")


def fit_group_model(data: Dataset, v: str, config: FitConfig = FitConfig()) -> GroupModel:
    """Fit P(A | V) on the given rows for V = 'x' or 'y'."""
    if v not in ("x", "y"):
        raise ValueError(f"fit_group_model expects v in ('x', 'y'), got {v!r}")
    _check_categories(data.a, data.categories)
    n_classes = len(data.categories)
    if v == "y":
        fm = None
        design = np.concatenate([np.ones((data.n, 1)), data.y.astype(float)[:, None]], axis=1)
    else:
        fm = FeatureMap.fit(data.x, config.transform, config.spline_knots)
        z = fm.apply(data.x)
        design = np.concatenate([np.ones((data.n, 1)), z], axis=1)
    if config.reg is not None:
        lam = float(config.reg)
    else:
        fold = stratified_folds(data.a, config.folds, config.seed, salt=101)
        losses = {
            lam: _multinomial_cv_loss(
                design, data.a, n_classes, lam, fold, config.folds, config.max_iter, config.tol
            )
            for lam in config.reg_grid
        }
        lam = _select_strength(losses)
    theta = _newton_multinomial(design, data.a, n_classes, lam, config.max_iter, config.tol)
    return GroupModel(data.categories, v, theta=theta, feature_map=fm)


def fit_group_model_crossfit(
    test: Dataset,
    scores: np.ndarray,
    folds: int = 5,
    config: FitConfig = FitConfig(),
) -> GroupModel:
    """Nested cross-validation estimate of P(A | R) on the evaluation split.

    Outer stratified folds hold out each evaluation row exactly once; an
    inner stratified CV on the remaining rows picks the penalty before the
    outer-fold model predicts the held-out rows. Every row therefore receives
    one out-of-fold probability vector from a model that never saw it.
    """
    scores = np.asarray(scores, dtype=float)
    if len(scores) != test.n:
        raise ValueError("scores are not aligned with the evaluation rows")
    _check_categories(test.a, test.categories)
    class_counts = np.bincount(test.a, minlength=len(test.categories))
    if folds > class_counts.min():
        raise ValueError(
            f"{folds} folds exceed the smallest subgroup count {class_counts.min()}"
        )
    n_classes = len(test.categories)
    t = _logit(scores)[:, None]
    outer = stratified_folds(test.a, folds, config.seed, salt=202)
    oof = np.empty((test.n, n_classes))
    for f in range(folds):
        tr = outer != f
        fm = FeatureMap.fit(t[tr], config.r_transform, config.spline_knots)
        design_tr = np.concatenate([np.ones((int(tr.sum()), 1)), fm.apply(t[tr])], axis=1)
        codes_tr = test.a[tr]
        if config.reg is not None:
            lam = float(config.reg)
        else:
            inner = stratified_folds(codes_tr, config.folds, config.seed, salt=303 + f)
            losses = {
                lam: _multinomial_cv_loss(
                    design_tr, codes_tr, n_classes, lam, inner, config.folds,
                    config.max_iter, config.tol,
                )
                for lam in config.reg_grid
            }
            lam = _select_strength(losses)
        theta = _newton_multinomial(design_tr, codes_tr, n_classes, lam, config.max_iter, config.tol)
        design_te = np.concatenate([np.ones((int((~tr).sum()), 1)), fm.apply(t[~tr])], axis=1)
        oof[~tr] = _softmax_probs(design_te @ theta.T)
    return GroupModel(test.categories, "r", cross_fitted=True, oof_probabilities=oof)


def make_config(**overrides) -> FitConfig:
    return replace(FitConfig(), **overrides)

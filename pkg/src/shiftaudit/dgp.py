"""Synthetic data generating processes with structured subgroup heterogeneity.

Seven families are provided. In the causal-direction families (covariate,
outcome, complex, separable-complex) a latent fair coin U picks a Gaussian
component for X and subgroup membership A copies U with probability gamma_a;
the label follows a per-subgroup logistic link in x. In the anticausal
families (label, presentation, complex-anticausal) A is a fair coin, the
label prevalence depends on A, and X | A, Y is Gaussian with a cell-specific
mean.

Three Bernoulli selection mechanisms (on X, on Y, on Y and A jointly) can be
attached to any family; `sample_selected` draws from the conditional law
given selection.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import Dataset
from .rng import STREAM_A, STREAM_CHUNK, STREAM_S, STREAM_U, STREAM_X, STREAM_Y, substream


class Family(str, enum.Enum):
    COVARIATE_SHIFT = "covariate_shift"
    OUTCOME_SHIFT = "outcome_shift"
    COMPLEX_CAUSAL = "complex_causal"
    SEPARABLE_COMPLEX_CAUSAL = "separable_complex_causal"
    LABEL_SHIFT = "label_shift"
    PRESENTATION_SHIFT = "presentation_shift"
    COMPLEX_ANTICAUSAL = "complex_anticausal"


CAUSAL_FAMILIES = frozenset(
    {
        Family.COVARIATE_SHIFT,
        Family.OUTCOME_SHIFT,
        Family.COMPLEX_CAUSAL,
        Family.SEPARABLE_COMPLEX_CAUSAL,
    }
)
ANTICAUSAL_FAMILIES = frozenset(
    {Family.LABEL_SHIFT, Family.PRESENTATION_SHIFT, Family.COMPLEX_ANTICAUSAL}
)


class Selection(str, enum.Enum):
    NONE = "none"
    ON_X = "on_x"
    ON_Y = "on_y"
    ON_YA = "on_ya"


class Policy(str, enum.Enum):
    AGNOSTIC = "agnostic"
    AWARE = "aware"


@dataclass(frozen=True)
class CausalParams:
    mu0: float
    mu1: float
    gamma_a: float       # probability that A copies the latent component
    beta_a0: float
    beta_a1: float
    alpha_a0: float
    alpha_a1: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma_a <= 1.0:
            raise ValueError(f"gamma_a must be in [0,1], got {self.gamma_a}")


@dataclass(frozen=True)
class AnticausalParams:
    pi_y0: float         # label prevalence for A=1 (index convention as given)
    pi_y1: float         # label prevalence for A=0
    mu_a0y0: float
    mu_a0y1: float
    mu_a1y0: float
    mu_a1y1: float

    def __post_init__(self) -> None:
        for name in ("pi_y0", "pi_y1"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be a probability, got {p}")

    def prevalence(self, a: np.ndarray) -> np.ndarray:
        return np.where(a == 1, self.pi_y0, self.pi_y1)

    def mean(self, a: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.select(
            [(a == 0) & (y == 0), (a == 0) & (y == 1), (a == 1) & (y == 0), (a == 1) & (y == 1)],
            [self.mu_a0y0, self.mu_a0y1, self.mu_a1y0, self.mu_a1y1],
        )


@dataclass(frozen=True)
class DgpSpec:
    family: Family
    causal: Optional[CausalParams] = None
    anticausal: Optional[AnticausalParams] = None
    selection: Selection = Selection.NONE

    def __post_init__(self) -> None:
        causal_family = self.family in CAUSAL_FAMILIES
        if causal_family and (self.causal is None or self.anticausal is not None):
            raise ValueError(f"{self.family.value} requires causal parameters only")
        if not causal_family and (self.anticausal is None or self.causal is not None):
            raise ValueError(f"{self.family.value} requires anticausal parameters only")

    def to_json(self) -> dict:
        out = {"family": self.family.value, "selection": self.selection.value}
        if self.causal is not None:
            out["causal"] = vars(self.causal).copy()
        if self.anticausal is not None:
            out["anticausal"] = vars(self.anticausal).copy()
        return out

    @staticmethod
    def from_json(obj: dict) -> "DgpSpec":
        causal = CausalParams(**obj["causal"]) if "causal" in obj else None
        anticausal = AnticausalParams(**obj["anticausal"]) if "anticausal" in obj else None
        return DgpSpec(
            family=Family(obj["family"]),
            causal=causal,
            anticausal=anticausal,
            selection=Selection(obj.get("selection", "none")),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


_PRESETS = {
    Family.COVARIATE_SHIFT: CausalParams(-2.0, 0.0, 1.0, 0.5, 0.5, 0.0, 0.0),
    Family.OUTCOME_SHIFT: CausalParams(-2.0, 0.0, 0.0, 0.5, -1.0, 0.1, 0.0),
    Family.COMPLEX_CAUSAL: CausalParams(-2.0, 0.0, 1.0, 0.5, -1.0, 0.1, 0.0),
    Family.SEPARABLE_COMPLEX_CAUSAL: CausalParams(-2.0, 2.0, 1.0, 0.5, -1.0, 0.1, 0.0),
    Family.LABEL_SHIFT: AnticausalParams(0.5, 0.1, -1.0, 1.0, -1.0, 1.0),
    Family.PRESENTATION_SHIFT: AnticausalParams(0.5, 0.5, 1.0, 0.0, -1.0, 1.0),
    Family.COMPLEX_ANTICAUSAL: AnticausalParams(0.5, 0.1, 1.0, 0.0, -1.0, 1.0),
}


def preset(family: Family, selection: Selection = Selection.NONE) -> DgpSpec:
    """Return the standard parameterization of one of the seven families."""
    family = Family(family)
    params = _PRESETS[family]
    if isinstance(params, CausalParams):
        return DgpSpec(family, causal=params, selection=Selection(selection))
    return DgpSpec(family, anticausal=params, selection=Selection(selection))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -700.0, 700.0)))


def _causal_logit(p: CausalParams, x: np.ndarray, a: np.ndarray) -> np.ndarray:
    return np.where(a == 1, p.beta_a1 * x + p.alpha_a1, p.beta_a0 * x + p.alpha_a0)


def sample(spec: DgpSpec, n: int, seed: int) -> Dataset:
    """Draw n i.i.d. rows; bit-identical for fixed (spec, n, seed).

    Each variable consumes its own named substream, so e.g. the covariate
    draws do not depend on how many label draws preceded them. When a
    selection mechanism is configured the rows get an `s` flag but are not
    filtered; use `sample_selected` for the conditional law.
    """
    if n <= 0:
        raise ValueError(f"sample size must be positive, got {n}")
    if spec.causal is not None:
        p = spec.causal
        u = (substream(seed, STREAM_U).random(n) < 0.5).astype(np.int64)
        a_draws = substream(seed, STREAM_A).random((n, 2))
        copy_latent = a_draws[:, 0] < p.gamma_a
        coin = (a_draws[:, 1] < 0.5).astype(np.int64)
        a = np.where(copy_latent, u, coin)
        x = np.where(u == 1, p.mu1, p.mu0) + substream(seed, STREAM_X).standard_normal(n)
        y = (substream(seed, STREAM_Y).random(n) < _sigmoid(_causal_logit(p, x, a))).astype(np.int64)
    else:
        q = spec.anticausal
        a = (substream(seed, STREAM_A).random(n) < 0.5).astype(np.int64)
        y = (substream(seed, STREAM_Y).random(n) < q.prevalence(a)).astype(np.int64)
        x = q.mean(a, y) + substream(seed, STREAM_X).standard_normal(n)
    s = None
    if spec.selection is not Selection.NONE:
        prob = selection_probability(spec, x, y, a)
        s = (substream(seed, STREAM_S).random(n) < prob).astype(np.int64)
    return Dataset(x[:, None], a, y, s, categories=(0, 1))


def selection_probability(spec: DgpSpec, x, y, a) -> np.ndarray:
    """Bernoulli parameter of the selection mechanism, clamped into [0, 1].

    The x-driven mechanism's quadratic `1 - (4/25) x^2` goes negative beyond
    |x| = 2.5; clamping is the only valid Bernoulli reading.
    """
    if spec.selection is Selection.NONE:
        raise ValueError("spec has no selection mechanism")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    a = np.asarray(a)
    if spec.selection is Selection.ON_X:
        prob = 1.0 - (4.0 / 25.0) * x**2
    elif spec.selection is Selection.ON_Y:
        prob = 0.8 * y + 0.4 * (1 - y)
    else:
        prob = np.where(a == 1, 0.25 * y + 0.8 * (1 - y), 0.5 * y + 0.8 * (1 - y))
    return np.clip(prob, 0.0, 1.0)


def sample_selected(spec: DgpSpec, n_selected: int, seed: int) -> Dataset:
    """Rejection-sample the full process, keeping rows with S=1.

    Chunks are drawn from indexed substreams so the result is deterministic
    for fixed (spec, n_selected, seed). Aborts if the cumulative acceptance
    rate drops below 1e-3, which signals a degenerate mechanism.
    """
    if spec.selection is Selection.NONE:
        raise ValueError("sample_selected requires a selection mechanism")
    if n_selected <= 0:
        raise ValueError(f"sample size must be positive, got {n_selected}")
    kept: list[Dataset] = []
    total_kept = 0
    total_drawn = 0
    chunk_n = max(4096, 2 * n_selected)
    for chunk in range(10_000):
        sub_seed = substream(seed, STREAM_CHUNK, chunk).integers(0, 2**63 - 1)
        batch = sample(spec, chunk_n, int(sub_seed))
        accept = batch.s == 1
        total_drawn += batch.n
        total_kept += int(accept.sum())
        kept.append(batch.subset(accept))
        if total_kept >= n_selected:
            break
        if total_drawn >= 10 * chunk_n and total_kept < 1e-3 * total_drawn:
            raise RuntimeError(
                f"degenerate selection mechanism: acceptance rate "
                f"{total_kept / total_drawn:.2e} after {total_drawn} draws"
            )
    x = np.concatenate([b.x for b in kept])[:n_selected]
    a = np.concatenate([b.a for b in kept])[:n_selected]
    y = np.concatenate([b.y for b in kept])[:n_selected]
    return Dataset(x, a, y, None, categories=(0, 1))


def _norm_pdf(x: np.ndarray, mu: float) -> np.ndarray:
    return np.exp(-0.5 * (x - mu) ** 2) / math.sqrt(2.0 * math.pi)


def group_posterior(spec: DgpSpec, x) -> np.ndarray:
    """P(A | X = x) in closed form; columns follow the category order (0, 1)."""
    x = np.asarray(x, dtype=float)
    if spec.causal is not None:
        p = spec.causal
        f0, f1 = _norm_pdf(x, p.mu0), _norm_pdf(x, p.mu1)
        post_u1 = f1 / (f0 + f1)
        pa1 = p.gamma_a * post_u1 + (1.0 - p.gamma_a) * 0.5
    else:
        q = spec.anticausal
        like_a0 = q.pi_y1 * _norm_pdf(x, q.mu_a0y1) + (1 - q.pi_y1) * _norm_pdf(x, q.mu_a0y0)
        like_a1 = q.pi_y0 * _norm_pdf(x, q.mu_a1y1) + (1 - q.pi_y0) * _norm_pdf(x, q.mu_a1y0)
        pa1 = like_a1 / (like_a0 + like_a1)
    return np.column_stack([1.0 - pa1, pa1])


def bayes_score(spec: DgpSpec, x, a=None, policy: Policy = Policy.AWARE) -> np.ndarray:
    """Closed-form P(Y=1 | covariates) for the full (unselected) population.

    The aware variant conditions on (x, a); the agnostic variant integrates
    the aware score against the subgroup posterior given x.
    """
    x = np.asarray(x, dtype=float)
    policy = Policy(policy)
    if policy is Policy.AWARE:
        if a is None:
            raise ValueError("aware score requires subgroup codes")
        a = np.asarray(a)
        if spec.causal is not None:
            return _sigmoid(_causal_logit(spec.causal, x, a))
        q = spec.anticausal
        prev = q.prevalence(a)
        mu1 = np.where(a == 1, q.mu_a1y1, q.mu_a0y1)
        mu0 = np.where(a == 1, q.mu_a1y0, q.mu_a0y0)
        num = prev * _norm_pdf(x, mu1)
        return num / (num + (1.0 - prev) * _norm_pdf(x, mu0))
    post = group_posterior(spec, x)
    score0 = bayes_score(spec, x, np.zeros_like(x, dtype=np.int64), Policy.AWARE)
    score1 = bayes_score(spec, x, np.ones_like(x, dtype=np.int64), Policy.AWARE)
    return post[:, 0] * score0 + post[:, 1] * score1

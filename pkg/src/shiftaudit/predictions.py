"""Machine-readable tables of the theoretical predictions under test.

Three tables are transcribed:

* independence: whether Bayes-optimal prediction suffices for the
  sufficiency / separation criteria in each of the six shift settings.
* stability: whether {score, label} is independent of subgroup membership
  given a control variable (none, x, y, or the score), per setting group,
  covariate policy, and model optimality.
* selection: whether Bayes-optimality in a selected source population
  induces sufficiency / subgroup calibration / separation in the full
  population, per setting group and selection parent set.

Settings collapse into three groups for the stability and selection tables:
covariate shift, label shift, and everything else (the settings where the
label stays informed by subgroup membership after conditioning on x). The
separable family is grouped with covariate shift: when subgroups barely
overlap in x, membership is recoverable from x and population-optimal
scores behave like subgroup-optimal ones.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from .dgp import Family, Selection


class PropertyKind(str, enum.Enum):
    SUFFICIENCY = "sufficiency"
    SEPARATION = "separation"
    SUBGROUP_CALIBRATION = "subgroup_calibration"
    STABLE_GIVEN = "stable_given"


@dataclass(frozen=True)
class Prediction:
    table: str                      # "independence" | "stability" | "selection"
    setting: str                    # family (independence) or setting group
    policy: str                     # "agnostic" | "aware"
    property: PropertyKind
    holds: bool
    control: Optional[str] = None   # stability only: "none" | "x" | "y" | "r"
    optimal: bool = True            # stability only: optimal vs arbitrary model
    selection: Optional[str] = None # selection only: parents of the selection node

    @property
    def expected(self) -> str:
        return "holds" if self.holds else "fails"


GROUP_COVARIATE = "covariate_shift"
GROUP_LABEL = "label_shift"
GROUP_OTHER = "other"

_INDEPENDENCE_FAMILIES = (
    Family.COVARIATE_SHIFT,
    Family.OUTCOME_SHIFT,
    Family.COMPLEX_CAUSAL,
    Family.LABEL_SHIFT,
    Family.PRESENTATION_SHIFT,
    Family.COMPLEX_ANTICAUSAL,
)

# (sufficiency agnostic, sufficiency aware, separation agnostic, separation aware)
_INDEPENDENCE = {
    Family.COVARIATE_SHIFT: (True, True, False, False),
    Family.OUTCOME_SHIFT: (False, True, False, False),
    Family.COMPLEX_CAUSAL: (False, True, False, False),
    Family.LABEL_SHIFT: (False, True, True, False),
    Family.PRESENTATION_SHIFT: (False, True, False, False),
    Family.COMPLEX_ANTICAUSAL: (False, True, False, False),
}

# rows per group: control -> (agnostic optimal, agnostic arbitrary,
#                             aware optimal, aware arbitrary)
_STABILITY = {
    GROUP_COVARIATE: {
        "none": (False, False, False, False),
        "x": (True, True, True, False),
        "y": (False, False, False, False),
        "r": (True, False, True, False),
    },
    GROUP_LABEL: {
        "none": (False, False, False, False),
        "x": (False, False, False, False),
        "y": (True, True, False, False),
        "r": (False, False, True, False),
    },
    GROUP_OTHER: {
        "none": (False, False, False, False),
        "x": (False, False, False, False),
        "y": (False, False, False, False),
        "r": (False, False, True, False),
    },
}

_SELECTION_MECHANISMS = ("x", "a", "xa", "y", "xy", "ay", "xya")

# per (group, property, policy): tuple over the seven selection parent sets
_SELECTION = {
    (GROUP_COVARIATE, PropertyKind.SUFFICIENCY, "agnostic"):
        (True, True, True, True, False, False, False),
    (GROUP_LABEL, PropertyKind.SUFFICIENCY, "agnostic"):
        (False, False, False, False, False, False, False),
    (GROUP_OTHER, PropertyKind.SUFFICIENCY, "agnostic"):
        (False, False, False, False, False, False, False),
    (GROUP_COVARIATE, PropertyKind.SUFFICIENCY, "aware"):
        (True, True, True, True, False, False, False),
    (GROUP_LABEL, PropertyKind.SUFFICIENCY, "aware"):
        (True, True, True, True, False, False, False),
    (GROUP_OTHER, PropertyKind.SUFFICIENCY, "aware"):
        (True, True, True, True, False, False, False),
    (GROUP_COVARIATE, PropertyKind.SUBGROUP_CALIBRATION, "agnostic"):
        (True, True, True, False, False, False, False),
    (GROUP_LABEL, PropertyKind.SUBGROUP_CALIBRATION, "agnostic"):
        (False, False, False, False, False, False, False),
    (GROUP_OTHER, PropertyKind.SUBGROUP_CALIBRATION, "agnostic"):
        (False, False, False, False, False, False, False),
    (GROUP_COVARIATE, PropertyKind.SUBGROUP_CALIBRATION, "aware"):
        (True, True, True, False, False, False, False),
    (GROUP_LABEL, PropertyKind.SUBGROUP_CALIBRATION, "aware"):
        (True, True, True, False, False, False, False),
    (GROUP_OTHER, PropertyKind.SUBGROUP_CALIBRATION, "aware"):
        (True, True, True, False, False, False, False),
    (GROUP_COVARIATE, PropertyKind.SEPARATION, "agnostic"):
        (False, False, False, False, False, False, False),
    (GROUP_LABEL, PropertyKind.SEPARATION, "agnostic"):
        (True, False, False, True, True, False, False),
    (GROUP_OTHER, PropertyKind.SEPARATION, "agnostic"):
        (False, False, False, False, False, False, False),
    (GROUP_COVARIATE, PropertyKind.SEPARATION, "aware"):
        (False, False, False, False, False, False, False),
    (GROUP_LABEL, PropertyKind.SEPARATION, "aware"):
        (False, False, False, False, False, False, False),
    (GROUP_OTHER, PropertyKind.SEPARATION, "aware"):
        (False, False, False, False, False, False, False),
}


def setting_group(family: Family) -> str:
    family = Family(family)
    if family in (Family.COVARIATE_SHIFT, Family.SEPARABLE_COMPLEX_CAUSAL):
        return GROUP_COVARIATE
    if family is Family.LABEL_SHIFT:
        return GROUP_LABEL
    return GROUP_OTHER


def _policy_column(policy: str) -> str:
    """Stratified models use the subgroup-informed column of every table."""
    if policy in ("aware", "stratified"):
        return "aware"
    if policy == "agnostic":
        return "agnostic"
    raise ValueError(f"unknown policy {policy!r}")


def independence_table() -> list[Prediction]:
    out = []
    for family in _INDEPENDENCE_FAMILIES:
        suff_ag, suff_aw, sep_ag, sep_aw = _INDEPENDENCE[family]
        for prop, policy, holds in (
            (PropertyKind.SUFFICIENCY, "agnostic", suff_ag),
            (PropertyKind.SUFFICIENCY, "aware", suff_aw),
            (PropertyKind.SEPARATION, "agnostic", sep_ag),
            (PropertyKind.SEPARATION, "aware", sep_aw),
        ):
            out.append(Prediction("independence", family.value, policy, prop, holds))
    return out


def stability_table() -> list[Prediction]:
    out = []
    for group, by_control in _STABILITY.items():
        for control, flags in by_control.items():
            for (policy, optimal), holds in zip(
                (("agnostic", True), ("agnostic", False), ("aware", True), ("aware", False)),
                flags,
            ):
                out.append(
                    Prediction(
                        "stability", group, policy, PropertyKind.STABLE_GIVEN, holds,
                        control=control, optimal=optimal,
                    )
                )
    return out


def selection_table() -> list[Prediction]:
    out = []
    for (group, prop, policy), flags in _SELECTION.items():
        for mechanism, holds in zip(_SELECTION_MECHANISMS, flags):
            out.append(
                Prediction("selection", group, policy, prop, holds, selection=mechanism)
            )
    return out


def prediction_table() -> list[Prediction]:
    """All transcribed predictions (24 independence, 48 stability, 126 selection)."""
    return independence_table() + stability_table() + selection_table()


def stability_prediction(
    family: Family, policy: str, control: str, optimal: bool = True
) -> Prediction:
    group = setting_group(family)
    flags = _STABILITY[group][control]
    col = {"agnostic": 0, "aware": 2}[_policy_column(policy)] + (0 if optimal else 1)
    return Prediction(
        "stability", group, _policy_column(policy), PropertyKind.STABLE_GIVEN,
        flags[col], control=control, optimal=optimal,
    )


def independence_prediction(family: Family, policy: str, prop: PropertyKind) -> Prediction:
    family = Family(family)
    if family is Family.SEPARABLE_COMPLEX_CAUSAL:
        family = Family.COVARIATE_SHIFT
    suff_ag, suff_aw, sep_ag, sep_aw = _INDEPENDENCE[family]
    col = _policy_column(policy)
    holds = {
        (PropertyKind.SUFFICIENCY, "agnostic"): suff_ag,
        (PropertyKind.SUFFICIENCY, "aware"): suff_aw,
        (PropertyKind.SEPARATION, "agnostic"): sep_ag,
        (PropertyKind.SEPARATION, "aware"): sep_aw,
    }[(prop, col)]
    return Prediction("independence", family.value, col, prop, holds)


_SELECTION_NAME = {
    Selection.ON_X: "x",
    Selection.ON_Y: "y",
    Selection.ON_YA: "ay",
}


def selection_prediction(
    family: Family, selection: Selection, policy: str, prop: PropertyKind
) -> Prediction:
    group = setting_group(family)
    mechanism = _SELECTION_NAME[Selection(selection)]
    flags = _SELECTION[(group, prop, _policy_column(policy))]
    holds = flags[_SELECTION_MECHANISMS.index(mechanism)]
    return Prediction(
        "selection", group, _policy_column(policy), prop, holds, selection=mechanism
    )

"""Rule firing, coverage aggregation, surrogate class vote and rule fidelity."""

from __future__ import annotations

import enum
import operator
from collections import Counter
from dataclasses import dataclass
from typing import Iterable

from .model_io import NO_PREDICTION, Condition, PatientRecord, RuleSet

EQ_TOLERANCE = 1e-9


class Truth(enum.Enum):
    TRUE = "true"
    FALSE = "false"
    MISSING = "missing"


_COMPARE = {
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
    "==": lambda a, b: abs(a - b) <= EQ_TOLERANCE,
    "!=": lambda a, b: abs(a - b) > EQ_TOLERANCE,
}


def evaluate_condition(cond: Condition, record: PatientRecord) -> Truth:
    value = record.values.get(cond.attribute)
    if value is None:
        return Truth.MISSING
    return Truth.TRUE if _COMPARE[cond.operator](value, cond.threshold) else Truth.FALSE


@dataclass(frozen=True)
class ActivationResult:
    """Rules fired for one record.

    ``skipped`` lists ``(rule_id, attribute)`` for every attribute a rule
    needed but the record lacked; such rules never fire.
    """

    patient_id: str
    activated: tuple[str, ...]
    c_all: int
    skipped: tuple[tuple[str, str], ...] = ()


def activate_rules(ruleset: RuleSet, record: PatientRecord) -> ActivationResult:
    activated = []
    skipped = []
    c_all = 0
    for rule in ruleset.rules:
        fires = True
        missing = []
        for cond in rule.conditions:
            truth = evaluate_condition(cond, record)
            if truth is Truth.MISSING:
                if cond.attribute not in missing:
                    missing.append(cond.attribute)
                fires = False
            elif truth is Truth.FALSE:
                fires = False
        if missing:
            skipped.extend((rule.id, attr) for attr in missing)
        elif fires:
            activated.append(rule.id)
            c_all += rule.coverage
    return ActivationResult(record.id, tuple(activated), c_all, tuple(skipped))


@dataclass(frozen=True)
class Prediction:
    label: str
    support: float


def predict_class(ruleset: RuleSet, result: ActivationResult) -> Prediction:
    """Coverage-weighted vote among the activated rules.

    This is a rule-level surrogate, not the upstream model's risk estimate.
    Falls back to an unweighted vote when every activated rule has zero
    coverage; ties go to the lexicographically smallest label.
    """
    if not result.activated:
        return Prediction(NO_PREDICTION, 0.0)
    rules = [ruleset[rid] for rid in result.activated]
    votes: Counter = Counter()
    if result.c_all > 0:
        for rule in rules:
            votes[rule.predicted_class] += rule.coverage
        total = result.c_all
    else:
        for rule in rules:
            votes[rule.predicted_class] += 1
        total = len(rules)
    label, count = min(votes.items(), key=lambda kv: (-kv[1], kv[0]))
    return Prediction(label, count / total)


@dataclass(frozen=True)
class FidelityReport:
    """``matches / activations`` for one rule; ``fidelity`` is None when unused."""

    rule_id: str
    activations: int
    matches: int

    @property
    def fidelity(self) -> float | None:
        if self.activations == 0:
            return None
        return self.matches / self.activations


def rule_fidelity(ruleset: RuleSet, samples: Iterable[tuple[PatientRecord, str]]) -> list[FidelityReport]:
    """Per-rule agreement between each rule's class and the model labels of
    the samples that activate it."""
    activations = dict.fromkeys(ruleset.rule_ids, 0)
    matches = dict.fromkeys(ruleset.rule_ids, 0)
    for record, label in samples:
        for rid in activate_rules(ruleset, record).activated:
            activations[rid] += 1
            if ruleset[rid].predicted_class == label:
                matches[rid] += 1
    return [FidelityReport(rid, activations[rid], matches[rid]) for rid in ruleset.rule_ids]

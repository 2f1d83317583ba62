"""Factor relevance: coverage-weighted tf-idf over rules, inverted through a sigmoid.

Rules play the role of documents and factors the role of tokens. A factor's
occurrence count in a rule is the number of condition literals whose
attribute maps to it. The tf-idf mean over the rules in scope is pushed
through ``1 - sigmoid`` so that factors present in *every* rule get the
highest score (0.5) and rare factors drift toward 0.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Sequence

from .activation import ActivationResult, Prediction, activate_rules, predict_class
from .exceptions import EmptyScopeError, NoActivationError, UnmappedAttributeError, ValidationError
from .model_io import Clustering, PatientRecord, RuleSet

NORMALIZE_MODES = ("literal", "minmax2x")
JSON_SIGNIFICANT_DIGITS = 12
# Scores agreeing to this many decimals rank as ties (then by factor name).
RANK_DECIMALS = 12


# ---------------------------------------------------------------------------
# One function per step of the scoring chain
# ---------------------------------------------------------------------------


def term_frequency(n_ij: int, d_j: int) -> float:
    """Share of a rule's ``d_j`` condition literals that belong to the factor."""
    if d_j < 1:
        raise ValueError("a rule has at least one condition")
    if not 0 <= n_ij <= d_j:
        raise ValueError(f"occurrence count {n_ij} outside [0, {d_j}]")
    return n_ij / d_j


def rule_weight(c_j: int, c_all: int, s_all: int | None = None) -> float:
    """Relative coverage ``c_j / c_all`` of a rule.

    When the rules in scope cover nothing at all (``c_all == 0``) every rule
    gets the uniform weight ``1 / s_all``.
    """
    if c_j < 0 or c_all < c_j:
        raise ValueError(f"need 0 <= c_j <= c_all, got c_j={c_j}, c_all={c_all}")
    if c_all > 0:
        return c_j / c_all
    if not s_all:
        raise ValueError("zero total coverage needs the scope size for the uniform fallback")
    return 1.0 / s_all


def weighted_tf(w_j: float, n_ij: int, d_j: int) -> float:
    return w_j * term_frequency(n_ij, d_j)


def inverse_doc_freq(s_i: int, s_all: int, base: float = math.e) -> float | None:
    """``log(s_all / s_i)``; ``None`` marks a factor absent from every rule."""
    if s_all < 1 or not 0 <= s_i <= s_all:
        raise ValueError(f"need 0 <= s_i <= s_all and s_all >= 1, got s_i={s_i}, s_all={s_all}")
    if s_i == 0:
        return None
    if base == math.e:
        return math.log(s_all / s_i)
    return math.log(s_all / s_i, base)


def tfidf_rule(tf_ij: float, idf_i: float) -> float:
    return tf_ij * idf_i


def factor_relevance(per_rule_scores: Sequence[float]) -> float:
    """Mean of the per-rule tf-idf values over *all* rules in scope."""
    if len(per_rule_scores) == 0:
        raise EmptyScopeError("no rules in scope")
    return math.fsum(per_rule_scores) / len(per_rule_scores)


def invert_score(tfidf_i: float) -> float:
    """``1 - 1/(1 + exp(-x))``, evaluated as ``1/(1 + exp(x))``.

    The rewritten form stays accurate for large ``x`` where the literal
    subtraction cancels to 0.
    """
    if tfidf_i < 0:
        raise ValueError("tf-idf scores are nonnegative")
    try:
        return 1.0 / (1.0 + math.exp(tfidf_i))
    except OverflowError:
        return 0.0


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FactorStats:
    """Scoring trace of one factor.

    Per-rule tuples (``n``, ``tf``, ``tfidf_rules``) are aligned with the
    report's ``rules_in_scope``. ``tf`` holds the coverage-weighted term
    frequency. Inactive factors (absent from every rule in scope) carry
    ``idf = tfidf = None`` and score 0.
    """

    factor: str
    n: tuple[int, ...]
    s_i: int
    tf: tuple[float, ...]
    idf: float | None
    tfidf_rules: tuple[float, ...]
    tfidf: float | None
    literal_score: float
    score: float

    @property
    def active(self) -> bool:
        return self.s_i > 0


@dataclass(frozen=True)
class ExplanationReport:
    scope: str
    rules_in_scope: tuple[str, ...]
    weights: tuple[float, ...]
    c_all: int
    factor_scores: tuple[FactorStats, ...]
    clustering_name: str
    normalize: str = "literal"
    patient_id: str | None = None
    activation: ActivationResult | None = field(default=None, compare=False)
    prediction: Prediction | None = field(default=None, compare=False)
    log_base: float = field(default=math.e, repr=False)

    @property
    def s_all(self) -> int:
        return len(self.rules_in_scope)

    @property
    def factors(self) -> tuple[str, ...]:
        return tuple(fs.factor for fs in self.factor_scores)

    @property
    def mean_score(self) -> float:
        active = [fs.score for fs in self.factor_scores if fs.active]
        return math.fsum(active) / len(active) if active else 0.0

    def __getitem__(self, factor: str) -> FactorStats:
        for fs in self.factor_scores:
            if fs.factor == factor:
                return fs
        raise KeyError(factor)

    def scores(self) -> dict[str, float]:
        return {fs.factor: fs.score for fs in self.factor_scores}

    def to_dict(self) -> dict:
        """JSON-ready payload; reals are rounded to 12 significant digits."""
        out = {
            "scope": self.scope,
            "patient_id": self.patient_id,
            "clustering": self.clustering_name,
            "normalize": self.normalize,
            "s_all": self.s_all,
            "c_all": self.c_all,
            "rules": [
                {"id": rid, "w": json_number(w)} for rid, w in zip(self.rules_in_scope, self.weights)
            ],
            "factors": [
                {
                    "factor": fs.factor,
                    "score": json_number(fs.score),
                    "active": fs.active,
                    "s_i": fs.s_i,
                    "tfidf_i": json_number(fs.tfidf),
                }
                for fs in self.factor_scores
            ],
            "mean_score": json_number(self.mean_score),
        }
        if self.activation is not None:
            out["activation"] = {
                "activated": list(self.activation.activated),
                "c_all": self.activation.c_all,
                "skipped": [list(pair) for pair in self.activation.skipped],
            }
        if self.prediction is not None:
            out["prediction"] = {
                "label": self.prediction.label,
                "support": json_number(self.prediction.support),
                "surrogate": True,
            }
        return out


def json_number(value):
    if value is None:
        return None
    return float(f"{value:.{JSON_SIGNIFICANT_DIGITS}g}")


def _check_normalize(normalize):
    if normalize not in NORMALIZE_MODES:
        raise ValidationError(f"unknown normalization {normalize!r}; use one of {NORMALIZE_MODES}")


def explain(
    ruleset: RuleSet,
    clustering: Clustering,
    scope: Sequence[str] | None = None,
    normalize: str = "literal",
    log_base: float = math.e,
    *,
    patient_id: str | None = None,
) -> ExplanationReport:
    """Score every factor of ``clustering`` over the rules in ``scope``.

    Parameters
    ----------
    ruleset : RuleSet
    clustering : Clustering
        Must map every attribute used by the rules in scope.
    scope : sequence of str, optional
        Rule ids to explain over. Defaults to the whole rule set.
    normalize : {"literal", "minmax2x"}
        ``"literal"`` reports ``1 - sigmoid(tfidf)`` in ``(0, 0.5]``;
        ``"minmax2x"`` doubles it onto ``(0, 1]``.
    log_base : float
        Base of the idf logarithm. Only rescales tf-idf, so rankings do not
        depend on it.

    Returns
    -------
    ExplanationReport
        Factors sorted by score descending, ties by name.
    """
    _check_normalize(normalize)
    scope = ruleset.rule_ids if scope is None else tuple(scope)
    if not scope:
        raise EmptyScopeError("cannot explain over an empty set of rules")
    if len(set(scope)) != len(scope):
        raise ValidationError("scope lists a rule twice")
    unknown = [rid for rid in scope if rid not in ruleset]
    if unknown:
        raise ValidationError(f"unknown rule id {unknown[0]!r}")
    rules = [ruleset[rid] for rid in scope]
    unmapped = sorted({a for r in rules for a in r.attributes if a not in clustering.factor_of})
    if unmapped:
        raise UnmappedAttributeError(unmapped)

    s_all = len(rules)
    c_all = sum(r.coverage for r in rules)
    weights = tuple(rule_weight(r.coverage, c_all, s_all) for r in rules)

    counts = {f: [0] * s_all for f in clustering.factors}
    for j, rule in enumerate(rules):
        for factor, n in Counter(clustering.factor_of[a] for a in rule.attributes).items():
            counts[factor][j] = n

    stats = []
    for factor in clustering.factors:
        n = counts[factor]
        s_i = sum(1 for x in n if x > 0)
        tf = tuple(weighted_tf(w, n_ij, r.n_conditions) for w, n_ij, r in zip(weights, n, rules))
        idf = inverse_doc_freq(s_i, s_all, log_base)
        if idf is None:
            per_rule = (0.0,) * s_all
            tfidf = None
            literal = 0.0
        else:
            per_rule = tuple(tfidf_rule(t, idf) for t in tf)
            tfidf = factor_relevance(per_rule)
            literal = invert_score(tfidf)
        score = 2.0 * literal if normalize == "minmax2x" else literal
        stats.append(FactorStats(factor, tuple(n), s_i, tf, idf, per_rule, tfidf, literal, score))

    stats.sort(key=lambda fs: (-round(fs.score, RANK_DECIMALS), fs.factor))
    return ExplanationReport(
        scope="global" if patient_id is None else "local",
        rules_in_scope=tuple(scope),
        weights=weights,
        c_all=c_all,
        factor_scores=tuple(stats),
        clustering_name=clustering.name,
        normalize=normalize,
        patient_id=patient_id,
        log_base=log_base,
    )


def explain_global(ruleset: RuleSet, clustering: Clustering, normalize: str = "literal",
                   log_base: float = math.e) -> ExplanationReport:
    """Explain the model itself: every rule is in scope."""
    return explain(ruleset, clustering, None, normalize, log_base)


def explain_local(ruleset: RuleSet, clustering: Clustering, record: PatientRecord,
                  normalize: str = "literal", log_base: float = math.e) -> ExplanationReport:
    """Explain one prediction over the rules ``record`` activates.

    Raises
    ------
    NoActivationError
        If no rule fires for the record.
    """
    result = activate_rules(ruleset, record)
    if not result.activated:
        raise NoActivationError(record.id)
    report = explain(ruleset, clustering, result.activated, normalize, log_base, patient_id=record.id)
    return replace(report, activation=result, prediction=predict_class(ruleset, result))

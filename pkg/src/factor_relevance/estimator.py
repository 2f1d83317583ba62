"""scikit-learn style front end.

The rule set and clustering are hyper-parameters: the engine learns nothing
from data, so ``fit`` only resolves and validates them (applying the lenient
singleton fallback unless ``strict``). ``transform`` maps patient records to
a ``(n_records, n_factors)`` matrix of local relevance scores, which lets
the explainer sit inside a :class:`~sklearn.pipeline.Pipeline`.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_clustering, check_records, check_ruleset
from .activation import activate_rules, predict_class, rule_fidelity
from .exceptions import NoActivationError, ValidationError
from .model_io import validate_against
from .relevance import NORMALIZE_MODES, explain_global, explain_local
from .report import BatchResult, batch_profiles


def _remember_features(estimator, X):
    if X is None:
        return
    if hasattr(X, "columns"):
        names = np.asarray([str(c) for c in X.columns if str(c) != "id"], dtype=object)
        estimator.feature_names_in_ = names
        estimator.n_features_in_ = len(names)


class FactorRelevanceExplainer(TransformerMixin, BaseEstimator):
    """Relevance of semantic factors for a rule-based model.

    Parameters
    ----------
    ruleset : RuleSet, str or path
        Extracted rules (object, DSL text or ``.rules`` file).
    clustering : Clustering, optional
        Attribute-to-factor map. ``None`` uses one factor per attribute.
    normalize : {"literal", "minmax2x"}, default="literal"
    strict : bool, default=False
        Reject clusterings that leave rule attributes unmapped instead of
        giving those attributes singleton factors.

    Attributes
    ----------
    ruleset_ : RuleSet
    clustering_ : Clustering
        Validated clustering, extended with any auto-singletons.
    auto_singletons_ : tuple of str
    factors_ : ndarray of str
    """

    def __init__(self, ruleset=None, clustering=None, normalize="literal", strict=False):
        self.ruleset = ruleset
        self.clustering = clustering
        self.normalize = normalize
        self.strict = strict

    def fit(self, X=None, y=None):
        if self.ruleset is None:
            raise ValidationError("FactorRelevanceExplainer needs a ruleset")
        if self.normalize not in NORMALIZE_MODES:
            raise ValidationError(f"normalize must be one of {NORMALIZE_MODES}, got {self.normalize!r}")
        self.ruleset_ = check_ruleset(self.ruleset)
        validation = validate_against(
            self.ruleset_, check_clustering(self.clustering, self.ruleset_), strict=self.strict
        )
        self.clustering_ = validation.clustering
        self.auto_singletons_ = validation.auto_singletons
        self.factors_ = np.asarray(self.clustering_.factors, dtype=object)
        _remember_features(self, X)
        return self

    def _records(self, X):
        return check_records(X, getattr(self, "feature_names_in_", None))

    def transform(self, X):
        """Local scores per record; rows for non-activating records are zero."""
        check_is_fitted(self, "clustering_")
        records = self._records(X)
        out = np.zeros((len(records), len(self.factors_)))
        index = {f: k for k, f in enumerate(self.clustering_.factors)}
        for i, record in enumerate(records):
            try:
                rep = explain_local(self.ruleset_, self.clustering_, record, self.normalize)
            except NoActivationError:
                continue
            for fs in rep.factor_scores:
                out[i, index[fs.factor]] = fs.score
        return out

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "clustering_")
        return self.factors_.copy()

    def explain_global(self):
        check_is_fitted(self, "clustering_")
        return explain_global(self.ruleset_, self.clustering_, self.normalize)

    def explain_local(self, record):
        check_is_fitted(self, "clustering_")
        records = self._records(record)
        if len(records) != 1:
            raise ValidationError(f"explain_local takes one record, got {len(records)}")
        return explain_local(self.ruleset_, self.clustering_, records[0], self.normalize)

    def explain_batch(self, X, title="") -> BatchResult:
        check_is_fitted(self, "clustering_")
        return batch_profiles(self.ruleset_, self.clustering_, self._records(X), self.normalize, title)


class RuleSetClassifier(ClassifierMixin, BaseEstimator):
    """Coverage-weighted vote of the rules a record activates.

    A surrogate for inspecting the rule set, not the source model's risk
    estimate. Records that activate nothing are labeled ``"no-prediction"``.
    """

    def __init__(self, ruleset=None):
        self.ruleset = ruleset

    def fit(self, X=None, y=None):
        if self.ruleset is None:
            raise ValidationError("RuleSetClassifier needs a ruleset")
        self.ruleset_ = check_ruleset(self.ruleset)
        self.classes_ = np.asarray(self.ruleset_.class_labels, dtype=object)
        _remember_features(self, X)
        return self

    def _predictions(self, X):
        check_is_fitted(self, "ruleset_")
        records = check_records(X, getattr(self, "feature_names_in_", None))
        return [predict_class(self.ruleset_, activate_rules(self.ruleset_, r)) for r in records]

    def predict(self, X):
        return np.asarray([p.label for p in self._predictions(X)], dtype=object)

    def predict_support(self, X):
        """Winning share of activated coverage per record (0 when nothing fires)."""
        return np.asarray([p.support for p in self._predictions(X)])

    def fidelity(self, X, y):
        """Per-rule fidelity against model labels ``y``."""
        check_is_fitted(self, "ruleset_")
        records = check_records(X, getattr(self, "feature_names_in_", None))
        labels = [str(v) for v in y]
        if len(labels) != len(records):
            raise ValidationError(f"{len(records)} records but {len(labels)} labels")
        return rule_fidelity(self.ruleset_, zip(records, labels))

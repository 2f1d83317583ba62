import numpy as np
import pandas as pd
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import FunctionTransformer

from factor_relevance import (
    FactorRelevanceExplainer,
    PatientRecord,
    RuleSetClassifier,
    UnmappedAttributeError,
    ValidationError,
    explain_global,
)

from conftest import ORACLE_RULES


@pytest.fixture
def explainer(oracle_rules, oracle_clustering):
    return FactorRelevanceExplainer(oracle_rules, oracle_clustering).fit()


def test_params_and_clone(oracle_rules, oracle_clustering):
    est = FactorRelevanceExplainer(oracle_rules, oracle_clustering, normalize="minmax2x")
    params = est.get_params()
    assert params == {"ruleset": oracle_rules, "clustering": oracle_clustering,
                      "normalize": "minmax2x", "strict": False}
    twin = clone(est)
    assert twin.get_params()["ruleset"] == oracle_rules
    assert twin.set_params(normalize="literal").normalize == "literal"


def test_not_fitted(oracle_rules):
    with pytest.raises(NotFittedError):
        FactorRelevanceExplainer(oracle_rules).transform([{"A1": 1}])


def test_transform_records(explainer):
    X = [{"id": "a", "A1": 1, "A2": 1}, {"A1": -1}]
    out = explainer.transform(X)
    assert out.shape == (2, 3)
    np.testing.assert_allclose(out[0], [0.5, 0.4675543827703946, 0.0], atol=1e-12)
    assert not out[1].any()
    assert list(explainer.get_feature_names_out()) == ["F1", "F2", "F3"]


def test_transform_dataframe_and_array(oracle_rules, oracle_clustering):
    df = pd.DataFrame({"id": ["p", "q"], "A1": [1.0, 1.0], "A2": [1.0, np.nan]})
    est = FactorRelevanceExplainer(oracle_rules, oracle_clustering).fit(df)
    assert list(est.feature_names_in_) == ["A1", "A2"]
    from_df = est.transform(df)
    from_arr = est.transform(df[["A1", "A2"]].to_numpy())
    np.testing.assert_array_equal(from_df, from_arr)
    # q lacks A2: only r2 fires, F1 is in every rule in scope
    np.testing.assert_array_equal(from_df[1], [0.5, 0.0, 0.0])


def test_array_without_names(explainer):
    with pytest.raises(ValidationError, match="feature name"):
        explainer.transform(np.ones((2, 2)))


def test_explain_methods_agree_with_functions(explainer, oracle_rules, oracle_clustering):
    assert explainer.explain_global() == explain_global(oracle_rules, oracle_clustering)
    loc = explainer.explain_local({"id": "p", "A1": 1, "A2": 1})
    assert loc.patient_id == "p"
    batch = explainer.explain_batch([{"id": "p", "A1": 1}, {"id": "q", "A1": -1}])
    assert batch.no_activation == ("q",)


def test_lenient_and_strict(oracle_rules):
    from factor_relevance import parse_clustering

    partial = parse_clustering("F1: A1")
    est = FactorRelevanceExplainer(oracle_rules, partial).fit()
    assert est.auto_singletons_ == ("A2",)
    assert list(est.factors_) == ["F1", "A2"]
    with pytest.raises(UnmappedAttributeError):
        FactorRelevanceExplainer(oracle_rules, partial, strict=True).fit()


def test_identity_default_and_text_input():
    est = FactorRelevanceExplainer(ORACLE_RULES).fit()
    assert est.clustering_.name == "technical"
    assert list(est.factors_) == ["A1", "A2"]


def test_in_pipeline(oracle_rules, oracle_clustering):
    pipe = make_pipeline(
        FactorRelevanceExplainer(oracle_rules, oracle_clustering),
        FunctionTransformer(lambda m: m.max(axis=1, keepdims=True)),
    )
    out = pipe.fit_transform([{"A1": 1, "A2": 1}, {"A1": -1}])
    np.testing.assert_array_equal(out.ravel(), [0.5, 0.0])


def test_bad_params(oracle_rules):
    with pytest.raises(ValidationError):
        FactorRelevanceExplainer(oracle_rules, normalize="zscore").fit()
    with pytest.raises(ValidationError):
        FactorRelevanceExplainer().fit()


class TestClassifier:
    def test_predict(self, oracle_rules):
        clf = RuleSetClassifier(oracle_rules).fit()
        assert list(clf.classes_) == ["high", "low"]
        X = [{"A1": 1, "A2": 1}, {"A1": 1, "A2": -1}, {"A1": -1}]
        assert list(clf.predict(X)) == ["high", "low", "no-prediction"]
        np.testing.assert_allclose(clf.predict_support(X), [0.75, 1.0, 0.0])
        assert clf.score(X, ["high", "low", "low"]) == pytest.approx(2 / 3)

    def test_fidelity(self, oracle_rules):
        clf = RuleSetClassifier(oracle_rules).fit()
        reps = clf.fidelity([{"A1": 1, "A2": 1}, {"A1": 1, "A2": 1}, {"A1": 1}], ["high", "low", "low"])
        assert [(r.rule_id, r.activations, r.matches) for r in reps] == [("r1", 2, 1), ("r2", 3, 2)]
        with pytest.raises(ValidationError):
            clf.fidelity([{"A1": 1}], [])

    def test_records_accepted_directly(self, oracle_rules):
        clf = RuleSetClassifier(oracle_rules).fit()
        assert list(clf.predict(PatientRecord("p", {"A1": 1}))) == ["low"]

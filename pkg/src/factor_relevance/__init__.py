"""Factor relevance explanations for propositional rule-based models."""

__version__ = "0.1.0"

from .activation import (
    ActivationResult,
    FidelityReport,
    Prediction,
    Truth,
    activate_rules,
    evaluate_condition,
    predict_class,
    rule_fidelity,
)
from .estimator import FactorRelevanceExplainer, RuleSetClassifier
from .exceptions import (
    EmptyScopeError,
    FactorRelevanceError,
    NoActivationError,
    ParseError,
    UnmappedAttributeError,
    ValidationError,
)
from .model_io import (
    Clustering,
    Condition,
    PatientRecord,
    Rule,
    RuleSet,
    identity_clustering,
    load_clusterings,
    load_records,
    load_rules,
    parse_clustering,
    parse_clusterings,
    parse_labeled_samples,
    parse_record_csv,
    parse_record_json,
    parse_rules,
    serialize_clusterings,
    serialize_rules,
    validate_against,
)
from .relevance import (
    ExplanationReport,
    FactorStats,
    explain,
    explain_global,
    explain_local,
    factor_relevance,
    inverse_doc_freq,
    invert_score,
    rule_weight,
    term_frequency,
    tfidf_rule,
    weighted_tf,
)
from .report import (
    BatchResult,
    HeatmapSpec,
    RadarSpec,
    batch_profiles,
    format_text,
    rank_table,
    render_heatmap,
    render_radar,
)

__all__ = [
    "__version__",
    "ActivationResult",
    "BatchResult",
    "Clustering",
    "Condition",
    "EmptyScopeError",
    "ExplanationReport",
    "FactorRelevanceExplainer",
    "FactorRelevanceError",
    "FactorStats",
    "FidelityReport",
    "HeatmapSpec",
    "NoActivationError",
    "ParseError",
    "PatientRecord",
    "Prediction",
    "RadarSpec",
    "Rule",
    "RuleSet",
    "RuleSetClassifier",
    "Truth",
    "UnmappedAttributeError",
    "ValidationError",
    "activate_rules",
    "batch_profiles",
    "evaluate_condition",
    "explain",
    "explain_global",
    "explain_local",
    "factor_relevance",
    "format_text",
    "identity_clustering",
    "inverse_doc_freq",
    "invert_score",
    "load_clusterings",
    "load_records",
    "load_rules",
    "parse_clustering",
    "parse_clusterings",
    "parse_labeled_samples",
    "parse_record_csv",
    "parse_record_json",
    "parse_rules",
    "predict_class",
    "rank_table",
    "render_heatmap",
    "render_radar",
    "rule_fidelity",
    "rule_weight",
    "serialize_clusterings",
    "serialize_rules",
    "term_frequency",
    "tfidf_rule",
    "validate_against",
    "weighted_tf",
]

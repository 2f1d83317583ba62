"""Input coercion for the estimator API."""

from __future__ import annotations

import math
from collections.abc import Mapping
from pathlib import Path

import numpy as np

from .exceptions import ValidationError
from .model_io import (
    Clustering,
    PatientRecord,
    RuleSet,
    identity_clustering,
    load_rules,
    parse_clustering,
    parse_rules,
    record_from_mapping,
)


def check_ruleset(ruleset) -> RuleSet:
    """Accept a RuleSet, rule-DSL text or a path to a ``.rules`` file."""
    if isinstance(ruleset, RuleSet):
        return ruleset
    if isinstance(ruleset, Path):
        return load_rules(ruleset)
    if isinstance(ruleset, str):
        if "RULE" not in ruleset and Path(ruleset).is_file():
            return load_rules(ruleset)
        return parse_rules(ruleset)
    raise ValidationError(f"expected a RuleSet, rule text or path, got {type(ruleset).__name__}")


def check_clustering(clustering, ruleset: RuleSet) -> Clustering:
    if clustering is None:
        return identity_clustering(ruleset)
    if isinstance(clustering, Clustering):
        return clustering
    if isinstance(clustering, str):
        return parse_clustering(clustering)
    if isinstance(clustering, Mapping):
        return Clustering("custom", clustering)
    raise ValidationError(f"expected a Clustering, got {type(clustering).__name__}")


def _row_values(names, row):
    values = {}
    for name, value in zip(names, row):
        if value is None:
            continue
        value = float(value)
        if math.isnan(value):
            continue
        values[name] = value
    return values


def check_records(X, feature_names=None) -> list[PatientRecord]:
    """Coerce ``X`` to a list of :class:`PatientRecord`.

    Accepts a single record or mapping, a sequence of them, a pandas
    DataFrame (an ``id`` column, if present, names the rows; NaN means
    missing) or a 2-D array together with ``feature_names``.
    """
    if isinstance(X, (PatientRecord, Mapping)):
        X = [X]
    if hasattr(X, "columns") and hasattr(X, "itertuples"):
        columns = [str(c) for c in X.columns]
        has_id = "id" in columns
        names = [c for c in columns if c != "id"]
        data = X[names].to_numpy(dtype=float, na_value=np.nan)
        ids = X["id"].astype(str).tolist() if has_id else [str(i) for i in X.index]
        return [PatientRecord(rid, _row_values(names, row)) for rid, row in zip(ids, data)]
    if isinstance(X, np.ndarray):
        if X.ndim != 2:
            raise ValidationError(f"expected a 2-D array, got shape {X.shape}")
        if feature_names is None or len(feature_names) != X.shape[1]:
            raise ValidationError("array input needs one feature name per column")
        return [PatientRecord(f"row{i}", _row_values(feature_names, row)) for i, row in enumerate(X)]
    try:
        items = list(X)
    except TypeError:
        raise ValidationError(f"cannot interpret {type(X).__name__} as patient records") from None
    out = []
    for i, item in enumerate(items):
        if isinstance(item, PatientRecord):
            out.append(item)
        elif isinstance(item, Mapping):
            out.append(record_from_mapping(item, default_id=f"row{i}"))
        else:
            raise ValidationError(f"record {i} is a {type(item).__name__}, not a mapping")
    return out


def check_unique_ids(records) -> None:
    seen = set()
    for r in records:
        if r.id in seen:
            raise ValidationError(f"duplicate record id {r.id!r}")
        seen.add(r.id)

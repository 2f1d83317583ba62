import copy
import json
import math
import pickle

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factor_relevance import (
    Clustering,
    Condition,
    ParseError,
    PatientRecord,
    Rule,
    RuleSet,
    UnmappedAttributeError,
    ValidationError,
    identity_clustering,
    load_records,
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

from fuzzing import fuzz_factors, fuzz_rules


class TestParseRules:
    def test_two_conditions(self):
        rs = parse_rules("RULE r1 CLASS=high COVERAGE=3: BMI > 28.5 AND NODES_INVOLVED >= 4")
        assert len(rs) == 1
        rule = rs["r1"]
        assert rule.n_conditions == 2
        assert rule.coverage == 3
        assert rule.conditions[0] == Condition("BMI", ">", 28.5)
        assert rule.conditions[1] == Condition("NODES_INVOLVED", ">=", 4.0)
        assert rs.attribute_universe == ("BMI", "NODES_INVOLVED")
        assert rs.class_labels == ("high",)

    def test_interval_condition_repeats_attribute(self):
        rs = parse_rules("RULE r1 CLASS=high COVERAGE=3: BMI > 28.5 AND BMI <= 35")
        assert rs["r1"].attributes == ("BMI", "BMI")
        assert rs["r1"].n_conditions == 2

    def test_empty_condition_list(self):
        with pytest.raises(ParseError, match="empty condition list"):
            parse_rules("RULE r1 CLASS=high COVERAGE=3:")

    def test_duplicate_id(self):
        with pytest.raises(ParseError, match="duplicate rule id") as err:
            parse_rules("RULE r1 CLASS=a COVERAGE=1: X > 1\nRULE r1 CLASS=b COVERAGE=2: Y > 1\n")
        assert err.value.line == 2

    def test_non_finite_threshold(self):
        with pytest.raises(ParseError, match="non-finite"):
            parse_rules("RULE r1 CLASS=a COVERAGE=1: X > 1e999")

    @pytest.mark.parametrize("word", ["nan", "inf", "NaN"])
    def test_nan_inf_words_are_syntax_errors(self, word):
        with pytest.raises(ParseError, match="expected number"):
            parse_rules(f"RULE r1 CLASS=a COVERAGE=1: X > {word}")

    def test_syntax_error_position(self):
        with pytest.raises(ParseError) as err:
            parse_rules("# header\nRULE r1 CLASS=a COVERAGE=1: X => 3\n")
        assert (err.value.line, err.value.column) == (2, 31)
        assert "one of" in err.value.expected

    def test_comments_and_blank_lines(self):
        text = "\n# a comment\n  RULE r1 CLASS=a COVERAGE=0: X == 1 # trailing\n\r\n"
        rs = parse_rules(text)
        assert rs["r1"].coverage == 0
        assert rs["r1"].line == 3

    def test_empty_document(self):
        with pytest.raises(ParseError, match="no rules"):
            parse_rules("# nothing here\n")

    @pytest.mark.parametrize("text,expected", [
        ("RULE r1 CLASS=a COVERAGE=-1: X > 1", "coverage"),
        ("RULE r1 CLASS=a COVERAGE=1: x > 1", "attribute name"),
        ("RULE r1 CLASS=a COVERAGE=1: X > 1 AND", "condition"),
        ("RULE r1 CLASS=a COVERAGE=1: X > 1 OR Y > 2", "'AND'"),
        ("RULE r1 CLASS=a COVERAGE=1: X > 1.5.2", "number"),
        ("RULE r1 CLASS=no-prediction COVERAGE=1: X > 1", None),
        ("RULE r1 CLASS=a COVERAGE=1 X > 1", "':'"),
    ])
    def test_rejects(self, text, expected):
        with pytest.raises(ParseError) as err:
            parse_rules(text)
        if expected:
            assert expected in (err.value.expected or "")

    def test_case_sensitive_keywords(self):
        with pytest.raises(ParseError):
            parse_rules("rule r1 CLASS=a COVERAGE=1: X > 1")


class TestSerialize:
    def test_round_trip_examples(self):
        for text in [
            "RULE r1 CLASS=high COVERAGE=3: BMI > 28.5 AND NODES_INVOLVED >= 4",
            "RULE r1 CLASS=high COVERAGE=3: BMI > 28.5 AND BMI <= 35",
        ]:
            rs = parse_rules(text)
            assert parse_rules(serialize_rules(rs)) == rs

    def test_zero_coverage(self):
        rs = parse_rules("RULE r1 CLASS=a COVERAGE=0: X != 0")
        assert "COVERAGE=0" in serialize_rules(rs)

    def test_canonical_operators(self):
        rs = RuleSet((Rule("r", (Condition("X", ">=", 1), Condition("Y", "<=", 2)), "a", 1),))
        text = serialize_rules(rs)
        assert ">=" in text and "<=" in text and "=>" not in text and "=<" not in text
        assert text == "RULE r CLASS=a COVERAGE=1: X >= 1 AND Y <= 2\n"

    @settings(max_examples=200)
    @given(st.lists(
        st.tuples(
            st.lists(
                st.tuples(
                    st.from_regex(r"[A-Z][A-Z0-9_]{0,6}", fullmatch=True),
                    st.sampled_from(["<", "<=", ">", ">=", "==", "!="]),
                    st.floats(allow_nan=False, allow_infinity=False),
                ),
                min_size=1, max_size=5,
            ),
            st.from_regex(r"[a-z][a-z0-9_]{0,5}", fullmatch=True),
            st.integers(0, 10**12),
        ),
        min_size=1, max_size=6,
    ))
    def test_round_trip_property(self, specs):
        rules = tuple(
            Rule(f"r{i}", tuple(Condition(*c) for c in conds), label, cov)
            for i, (conds, label, cov) in enumerate(specs)
        )
        rs = RuleSet(rules)
        assert parse_rules(serialize_rules(rs)) == rs


class TestClusteringParser:
    def test_smoker_factor(self):
        c = parse_clustering("SMOKER: SMOKER, FORMER_SMOKER, CURRENT_SMOKER")
        assert c.factors == ("SMOKER",)
        assert c.attributes_of("SMOKER") == ("SMOKER", "FORMER_SMOKER", "CURRENT_SMOKER")

    def test_rt_technique_factor(self):
        c = parse_clustering("RT_TECHNIQUE: IMRT_CHM, IMRT_TOMOTHERAPY, IMRT_X3D, IMRT_VMAT")
        assert len(c.attributes_of("RT_TECHNIQUE")) == 4

    def test_attribute_in_two_factors(self):
        with pytest.raises(ParseError, match="two factors"):
            parse_clustering("WEIGHT: BMI\nBODY: BMI, HEIGHT\n")

    def test_empty_factor(self):
        with pytest.raises(ParseError, match="no attributes"):
            parse_clustering("WEIGHT:\n")

    def test_multiple_sections(self):
        text = """
[clustering clinical]
SMOKER: SMOKER, FORMER_SMOKER
BMI: BMI

[clustering technical]
SMOKER: SMOKER
FORMER_SMOKER: FORMER_SMOKER
BMI: BMI
"""
        found = parse_clusterings(text)
        assert list(found) == ["clinical", "technical"]
        assert parse_clustering(text, "technical").factors == ("SMOKER", "FORMER_SMOKER", "BMI")
        with pytest.raises(ParseError, match="several"):
            parse_clustering(text)
        with pytest.raises(ParseError, match="no clustering named"):
            parse_clustering(text, "patient")
        assert parse_clusterings(serialize_clusterings(found.values())) == found

    def test_duplicate_section_and_empty_section(self):
        with pytest.raises(ParseError, match="duplicate clustering"):
            parse_clusterings("[clustering a]\nF: X\n[clustering a]\nG: Y\n")
        with pytest.raises(ParseError, match="declares no factors"):
            parse_clusterings("[clustering a]\n[clustering b]\nF: X\n")

    def test_default_section_name(self):
        assert parse_clustering("F: X").name == "default"
        assert parse_clustering("F: X", default_name="clinical").name == "clinical"


class TestRecords:
    def test_json(self):
        r = parse_record_json('{"id": "p7", "BMI": 30, "SMOKER": 1, "AGE": null}')
        assert r == PatientRecord("p7", {"BMI": 30.0, "SMOKER": 1.0})

    @pytest.mark.parametrize("text", ['{"bmi": 3}', '{"BMI": "x"}', '{"BMI": true}', "[1]", '{"BMI": NaN}'])
    def test_json_rejects(self, text):
        with pytest.raises((ValidationError, ParseError)):
            parse_record_json(text)

    def test_csv(self):
        r = parse_record_csv("id=p1, BMI=30.5\nSMOKER=1\n")
        assert r == PatientRecord("p1", {"BMI": 30.5, "SMOKER": 1.0})
        with pytest.raises(ParseError):
            parse_record_csv("BMI=abc")
        with pytest.raises(ParseError):
            parse_record_csv("BMI 3")

    def test_load_records(self, tmp_path):
        (tmp_path / "b.json").write_text(json.dumps({"BMI": 30}))
        (tmp_path / "a.csv").write_text("BMI=20\n")
        (tmp_path / "skip.txt").write_text("ignored")
        recs = load_records(tmp_path)
        assert [r.id for r in recs] == ["a", "b"]
        lst = tmp_path / "many.json"
        lst.write_text(json.dumps([{"BMI": 1}, {"id": "z", "BMI": 2}]))
        assert [r.id for r in load_records(lst)] == ["many-0", "z"]

    def test_labeled_samples(self):
        samples = parse_labeled_samples("id,BMI,SMOKER,MODEL_LABEL\np1,30,,high\n,20,1,low\n")
        assert samples[0] == (PatientRecord("p1", {"BMI": 30.0}), "high")
        assert samples[1][0].values == {"BMI": 20.0, "SMOKER": 1.0}
        with pytest.raises(ParseError, match="MODEL_LABEL"):
            parse_labeled_samples("BMI\n3\n")


class TestIdentityAndValidation:
    def test_identity_single(self):
        rs = parse_rules("RULE r CLASS=a COVERAGE=1: BMI > 1")
        c = identity_clustering(rs)
        assert c.name == "technical"
        assert dict(c.factor_of) == {"BMI": "BMI"}

    def test_identity_three(self):
        rs = parse_rules("RULE r CLASS=a COVERAGE=1: C > 1 AND A > 1\nRULE s CLASS=a COVERAGE=1: B > 1")
        c = identity_clustering(rs)
        assert c.factors == ("A", "B", "C")
        assert all(c.attributes_of(f) == (f,) for f in c.factors)

    @given(st.lists(st.from_regex(r"[A-Z][A-Z0-9_]{0,4}", fullmatch=True), min_size=1, max_size=12))
    def test_identity_factor_count(self, attrs):
        rs = RuleSet((Rule("r", tuple(Condition(a, ">", 0) for a in attrs), "a", 1),))
        assert len(identity_clustering(rs).factors) == len(set(attrs))

    def test_validate_complete(self):
        rs = parse_rules("RULE r CLASS=a COVERAGE=1: BMI > 1")
        report = validate_against(rs, parse_clustering("W: BMI"), strict=True)
        assert report.auto_singletons == () and report.ok

    def test_validate_strict_missing(self):
        rs = parse_rules("RULE r CLASS=a COVERAGE=1: BMI > 1 AND TUMOR_SIZE > 2")
        with pytest.raises(UnmappedAttributeError, match="TUMOR_SIZE") as err:
            validate_against(rs, parse_clustering("W: BMI"), strict=True)
        assert err.value.attributes == ("TUMOR_SIZE",)

    def test_validate_lenient_missing(self):
        rs = parse_rules("RULE r CLASS=a COVERAGE=1: BMI > 1 AND TUMOR_SIZE > 2")
        report = validate_against(rs, parse_clustering("W: BMI"), strict=False)
        assert report.auto_singletons == ("TUMOR_SIZE",)
        assert report.clustering.factors == ("W", "TUMOR_SIZE")
        assert report.clustering.factor_of["TUMOR_SIZE"] == "TUMOR_SIZE"


def test_types_are_immutable_and_copyable():
    rs = parse_rules("RULE r CLASS=a COVERAGE=1: BMI > 1")
    c = identity_clustering(rs)
    with pytest.raises(Exception):
        rs.rules = ()
    with pytest.raises(TypeError):
        c.factor_of["X"] = "Y"
    assert pickle.loads(pickle.dumps(rs)) == rs
    assert copy.deepcopy(c) == c
    assert copy.deepcopy(PatientRecord("p", {"A": 1})) == PatientRecord("p", {"A": 1})


def test_clustering_constructor_checks():
    with pytest.raises(ValidationError, match="no attributes"):
        Clustering("c", {"A": "F"}, ("F", "G"))
    with pytest.raises(ValidationError):
        Clustering("bad name", {"A": "F"})
    with pytest.raises(ValidationError):
        Condition("A", ">", math.nan)


# ---------------------------------------------------------------------------
# Fuzzing against the grammar recognizers in oracle.py
# ---------------------------------------------------------------------------

def test_fuzz_rules_small():
    _, bad = fuzz_rules(2000, seed=11)
    assert not bad, bad[:3]


def test_fuzz_factors_small():
    _, bad = fuzz_factors(2000, seed=11)
    assert not bad, bad[:3]

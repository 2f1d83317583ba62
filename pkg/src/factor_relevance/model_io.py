"""Rule sets, clusterings and patient records: types, parsers and serializers.

Rule DSL, one rule per line::

    # comment
    RULE r1 CLASS=high COVERAGE=3: BMI > 28.5 AND NODES_INVOLVED >= 4

Clustering files carry one or more named sections::

    [clustering clinical]
    SMOKER: SMOKER, FORMER_SMOKER, CURRENT_SMOKER

Lines appearing before any section header belong to an implicit section
whose name is given by the caller (``"default"`` unless overridden).
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

from .exceptions import ParseError, UnmappedAttributeError, ValidationError

OPERATORS = ("<", "<=", ">", ">=", "==", "!=")
NO_PREDICTION = "no-prediction"

ATTRIBUTE_RE = re.compile(r"[A-Z][A-Z0-9_]*")
RULE_ID_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.\-]*")
LABEL_RE = re.compile(r"[A-Za-z0-9_][A-Za-z0-9_.+\-]*")
CLUSTERING_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_\-]*")
_UINT_RE = re.compile(r"[0-9]+")
_NUMBER_RE = re.compile(r"[+-]?(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][+-]?[0-9]+)?")
_OP_RE = re.compile(r"<=|>=|==|!=|<|>")
_WS_RE = re.compile(r"[ \t]+")


def _is_attribute(name) -> bool:
    return isinstance(name, str) and ATTRIBUTE_RE.fullmatch(name) is not None


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Condition:
    """Threshold test ``attribute <operator> threshold``."""

    attribute: str
    operator: str
    threshold: float

    def __post_init__(self):
        if not _is_attribute(self.attribute):
            raise ValidationError(f"invalid attribute name {self.attribute!r}")
        if self.operator not in OPERATORS:
            raise ValidationError(f"invalid operator {self.operator!r}")
        if isinstance(self.threshold, bool) or not isinstance(self.threshold, (int, float)):
            raise ValidationError(f"threshold must be a real number, got {self.threshold!r}")
        if not math.isfinite(self.threshold):
            raise ValidationError(f"non-finite threshold for {self.attribute}")
        object.__setattr__(self, "threshold", float(self.threshold))

    def __str__(self):
        return f"{self.attribute} {self.operator} {_format_number(self.threshold)}"


@dataclass(frozen=True)
class Rule:
    """A conjunction of conditions entailing ``predicted_class``.

    ``coverage`` is the number of training samples covered by the rule.
    """

    id: str
    conditions: tuple[Condition, ...]
    predicted_class: str
    coverage: int
    line: int | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "conditions", tuple(self.conditions))
        if not isinstance(self.id, str) or not RULE_ID_RE.fullmatch(self.id):
            raise ValidationError(f"invalid rule id {self.id!r}")
        if not self.conditions:
            raise ValidationError(f"rule {self.id!r} has an empty condition list")
        if not isinstance(self.predicted_class, str) or not LABEL_RE.fullmatch(self.predicted_class):
            raise ValidationError(f"invalid class label {self.predicted_class!r}")
        if self.predicted_class == NO_PREDICTION:
            raise ValidationError(f"class label {NO_PREDICTION!r} is reserved")
        if isinstance(self.coverage, bool) or not isinstance(self.coverage, int) or self.coverage < 0:
            raise ValidationError(f"coverage must be a nonnegative integer, got {self.coverage!r}")

    @property
    def n_conditions(self) -> int:
        return len(self.conditions)

    @property
    def attributes(self) -> tuple[str, ...]:
        return tuple(c.attribute for c in self.conditions)

    def __str__(self):
        body = " AND ".join(str(c) for c in self.conditions)
        return f"RULE {self.id} CLASS={self.predicted_class} COVERAGE={self.coverage}: {body}"


@dataclass(frozen=True)
class RuleSet:
    """Ordered, non-empty collection of rules with unique ids."""

    rules: tuple[Rule, ...]
    attribute_universe: tuple[str, ...] = field(init=False, compare=False)
    class_labels: tuple[str, ...] = field(init=False, compare=False)
    _by_id: Mapping[str, Rule] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        rules = tuple(self.rules)
        if not rules:
            raise ValidationError("a rule set needs at least one rule")
        by_id = {}
        for rule in rules:
            if rule.id in by_id:
                raise ValidationError(f"duplicate rule id {rule.id!r}")
            by_id[rule.id] = rule
        object.__setattr__(self, "rules", rules)
        object.__setattr__(self, "_by_id", MappingProxyType(by_id))
        object.__setattr__(
            self, "attribute_universe", tuple(sorted({a for r in rules for a in r.attributes}))
        )
        object.__setattr__(self, "class_labels", tuple(sorted({r.predicted_class for r in rules})))

    def __len__(self):
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    def __getitem__(self, rule_id: str) -> Rule:
        return self._by_id[rule_id]

    def __contains__(self, rule_id):
        return rule_id in self._by_id

    def __reduce__(self):
        return (RuleSet, (self.rules,))

    @property
    def rule_ids(self) -> tuple[str, ...]:
        return tuple(r.id for r in self.rules)

    @property
    def total_coverage(self) -> int:
        return sum(r.coverage for r in self.rules)


@dataclass(frozen=True, eq=True)
class Clustering:
    """Total map from model attributes to semantic factors.

    ``factors`` keeps the declaration order of the source file; when omitted
    it is derived from the insertion order of ``factor_of``.
    """

    name: str
    factor_of: Mapping[str, str]
    factors: tuple[str, ...] = None

    __hash__ = None

    def __post_init__(self):
        if not isinstance(self.name, str) or not CLUSTERING_NAME_RE.fullmatch(self.name):
            raise ValidationError(f"invalid clustering name {self.name!r}")
        mapping = dict(self.factor_of)
        for attr, factor in mapping.items():
            if not _is_attribute(attr):
                raise ValidationError(f"invalid attribute name {attr!r}")
            if not _is_attribute(factor):
                raise ValidationError(f"invalid factor name {factor!r}")
        used = list(dict.fromkeys(mapping.values()))
        if self.factors is None:
            factors = tuple(used)
        else:
            factors = tuple(self.factors)
            if len(set(factors)) != len(factors):
                raise ValidationError("duplicate factor in factor list")
            empty = [f for f in factors if f not in set(used)]
            if empty:
                raise ValidationError(f"factor {empty[0]!r} has no attributes")
            missing = [f for f in used if f not in set(factors)]
            if missing:
                raise ValidationError(f"factor {missing[0]!r} missing from factor list")
        object.__setattr__(self, "factor_of", MappingProxyType(mapping))
        object.__setattr__(self, "factors", factors)

    def __reduce__(self):
        return (Clustering, (self.name, dict(self.factor_of), self.factors))

    def attributes_of(self, factor: str) -> tuple[str, ...]:
        return tuple(a for a, f in self.factor_of.items() if f == factor)

    def __eq__(self, other):
        if not isinstance(other, Clustering):
            return NotImplemented
        return (
            self.name == other.name
            and dict(self.factor_of) == dict(other.factor_of)
            and self.factors == other.factors
        )


@dataclass(frozen=True)
class PatientRecord:
    """Attribute values for one input."""

    id: str
    values: Mapping[str, float]

    __hash__ = None

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise ValidationError(f"invalid record id {self.id!r}")
        clean = {}
        for attr, value in dict(self.values).items():
            if not _is_attribute(attr):
                raise ValidationError(f"invalid attribute name {attr!r} in record {self.id!r}")
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValidationError(f"value of {attr} in record {self.id!r} is not a number")
            if not math.isfinite(value):
                raise ValidationError(f"non-finite value for {attr} in record {self.id!r}")
            clean[attr] = float(value)
        object.__setattr__(self, "values", MappingProxyType(clean))

    def __reduce__(self):
        return (PatientRecord, (self.id, dict(self.values)))

    def __eq__(self, other):
        if not isinstance(other, PatientRecord):
            return NotImplemented
        return self.id == other.id and dict(self.values) == dict(other.values)


@dataclass(frozen=True)
class ValidationReport:
    clustering: Clustering
    auto_singletons: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.auto_singletons


# ---------------------------------------------------------------------------
# Rule DSL
# ---------------------------------------------------------------------------


class _LineScanner:
    def __init__(self, text, lineno, source):
        self.text = text
        self.pos = 0
        self.lineno = lineno
        self.source = source

    def error(self, message, expected=None, pos=None):
        col = (self.pos if pos is None else pos) + 1
        return ParseError(message, self.lineno, col, expected, self.source)

    def skip_ws(self):
        m = _WS_RE.match(self.text, self.pos)
        if m:
            self.pos = m.end()
            return True
        return False

    def require_ws(self, expected):
        if not self.skip_ws():
            raise self.error("missing whitespace", expected)

    def at_end(self):
        return self.pos >= len(self.text) or self.text[self.pos] == "#"

    def literal(self, word, expected=None):
        if not self.text.startswith(word, self.pos):
            raise self.error(f"unexpected {self.peek()}", expected or repr(word))
        self.pos += len(word)

    def token(self, regex, expected, boundary=None):
        m = regex.match(self.text, self.pos)
        if not m:
            raise self.error(f"unexpected {self.peek()}", expected)
        end = m.end()
        if boundary is not None and end < len(self.text) and not boundary(self.text[end]):
            raise self.error(f"unexpected {self.peek(end)}", expected, pos=end)
        self.pos = end
        return m.group()

    def peek(self, pos=None):
        pos = self.pos if pos is None else pos
        if pos >= len(self.text):
            return "end of line"
        return repr(self.text[pos])


def _ends_token(ch):
    return ch in " \t#"


def _iter_lines(text):
    if not isinstance(text, str):
        raise ParseError("document must be text")
    for lineno, line in enumerate(text.split("\n"), start=1):
        yield lineno, line[:-1] if line.endswith("\r") else line


def _parse_number(scanner):
    start = scanner.pos
    raw = scanner.token(_NUMBER_RE, "number", boundary=_ends_token)
    value = float(raw)
    if not math.isfinite(value):
        raise scanner.error("non-finite threshold", pos=start)
    return value


def _parse_condition(scanner):
    attr = scanner.token(ATTRIBUTE_RE, "attribute name")
    scanner.skip_ws()
    if scanner.text.startswith("=>", scanner.pos) or scanner.text.startswith("=<", scanner.pos):
        raise scanner.error("invalid operator", "one of " + " ".join(OPERATORS))
    op = scanner.token(_OP_RE, "one of " + " ".join(OPERATORS))
    scanner.skip_ws()
    return Condition(attr, op, _parse_number(scanner))


def _parse_rule_line(scanner):
    s = scanner
    s.literal("RULE", "'RULE'")
    s.require_ws("rule id")
    rule_id = s.token(RULE_ID_RE, "rule id", boundary=_ends_token)
    s.require_ws("'CLASS='")
    s.literal("CLASS=")
    label = s.token(LABEL_RE, "class label", boundary=_ends_token)
    if label == NO_PREDICTION:
        raise s.error(f"class label {NO_PREDICTION!r} is reserved")
    s.require_ws("'COVERAGE='")
    s.literal("COVERAGE=")
    coverage = int(s.token(_UINT_RE, "nonnegative integer coverage", boundary=lambda ch: ch in " \t:"))
    s.skip_ws()
    s.literal(":")
    s.skip_ws()
    if s.at_end():
        raise s.error(f"rule {rule_id!r} has an empty condition list", "condition")
    conditions = [_parse_condition(s)]
    while True:
        had_ws = s.skip_ws()
        if s.at_end():
            break
        if not had_ws:
            raise s.error(f"unexpected {s.peek()}", "'AND'")
        s.literal("AND", "'AND' or end of line")
        s.require_ws("condition")
        conditions.append(_parse_condition(s))
    return Rule(rule_id, tuple(conditions), label, coverage, line=s.lineno)


def parse_rules(text: str, source: str | None = None) -> RuleSet:
    """Parse a rule-DSL document into a validated :class:`RuleSet`.

    Raises
    ------
    ParseError
        With line and column of the first problem: syntax errors, duplicate
        rule ids, empty condition lists, non-finite thresholds, or a
        document with no rules at all.
    """
    rules = []
    seen = {}
    for lineno, line in _iter_lines(text):
        scanner = _LineScanner(line, lineno, source)
        scanner.skip_ws()
        if scanner.at_end():
            continue
        start = scanner.pos
        rule = _parse_rule_line(scanner)
        if rule.id in seen:
            raise ParseError(
                f"duplicate rule id {rule.id!r} (first defined on line {seen[rule.id]})",
                lineno, start + 1, source=source,
            )
        seen[rule.id] = lineno
        rules.append(rule)
    if not rules:
        raise ParseError("document contains no rules", source=source)
    return RuleSet(tuple(rules))


def _format_number(value: float) -> str:
    text = repr(float(value))
    if text.endswith(".0"):
        text = text[:-2]
    return text


def serialize_rules(ruleset: RuleSet) -> str:
    """Canonical DSL text; ``parse_rules`` of the result equals ``ruleset``."""
    return "".join(str(rule) + "\n" for rule in ruleset.rules)


def load_rules(path) -> RuleSet:
    path = Path(path)
    return parse_rules(path.read_text(encoding="utf-8"), source=str(path))


# ---------------------------------------------------------------------------
# Clustering files
# ---------------------------------------------------------------------------

_SECTION_RE = re.compile(r"\[[ \t]*clustering[ \t]+([^\s\]]*)[ \t]*\]")


def parse_clusterings(text: str, default_name: str = "default", source: str | None = None) -> dict:
    """Parse every named section of a clustering document.

    Returns a dict ``name -> Clustering`` in file order.
    """
    sections: dict[str, dict] = {}
    order: dict[str, list] = {}
    header_line: dict[str, int] = {}
    current = None
    for lineno, line in _iter_lines(text):
        s = _LineScanner(line, lineno, source)
        s.skip_ws()
        if s.at_end():
            continue
        if line[s.pos] == "[":
            m = _SECTION_RE.match(line, s.pos)
            if not m:
                raise s.error("malformed section header", "'[clustering <name>]'")
            name = m.group(1)
            if not CLUSTERING_NAME_RE.fullmatch(name):
                raise s.error(f"invalid clustering name {name!r}", "clustering name", pos=m.start(1))
            if name in sections:
                raise s.error(f"duplicate clustering {name!r} (first on line {header_line[name]})")
            s.pos = m.end()
            s.skip_ws()
            if not s.at_end():
                raise s.error(f"unexpected {s.peek()}", "end of line")
            current = name
            sections[name] = {}
            order[name] = []
            header_line[name] = lineno
            continue
        if current is None:
            current = default_name
            if current in sections:  # pragma: no cover - header names are checked above
                raise s.error(f"duplicate clustering {current!r}")
            sections[current] = {}
            order[current] = []
            header_line[current] = lineno
        factor_pos = s.pos
        factor = s.token(ATTRIBUTE_RE, "factor name", boundary=lambda ch: ch in " \t:")
        if factor in order[current]:
            raise s.error(f"factor {factor!r} declared twice in clustering {current!r}", pos=factor_pos)
        s.skip_ws()
        s.literal(":")
        s.skip_ws()
        if s.at_end():
            raise s.error(f"factor {factor!r} has no attributes", "attribute name")
        mapping = sections[current]
        while True:
            attr_pos = s.pos
            attr = s.token(ATTRIBUTE_RE, "attribute name", boundary=lambda ch: ch in " \t,#")
            if attr in mapping:
                raise s.error(
                    f"attribute {attr!r} assigned to two factors ({mapping[attr]} and {factor})",
                    pos=attr_pos,
                )
            mapping[attr] = factor
            s.skip_ws()
            if s.at_end():
                break
            s.literal(",", "',' or end of line")
            s.skip_ws()
        order[current].append(factor)
    out = {}
    for name, mapping in sections.items():
        if not mapping:
            raise ParseError(f"clustering {name!r} declares no factors", header_line[name], source=source)
        out[name] = Clustering(name, mapping, tuple(order[name]))
    return out


def parse_clustering(text: str, name: str | None = None, default_name: str = "default",
                     source: str | None = None) -> Clustering:
    """Parse one clustering; ``name`` selects a section of a multi-section file."""
    found = parse_clusterings(text, default_name=default_name, source=source)
    if not found:
        raise ParseError("document contains no clustering", source=source)
    if name is None:
        if len(found) > 1:
            raise ParseError(
                "document holds several clusterings (" + ", ".join(found) + "); pick one by name",
                source=source,
            )
        return next(iter(found.values()))
    if name not in found:
        raise ParseError(f"no clustering named {name!r}", source=source)
    return found[name]


def serialize_clusterings(clusterings: Iterable[Clustering]) -> str:
    blocks = []
    for c in clusterings:
        lines = [f"[clustering {c.name}]"]
        for factor in c.factors:
            lines.append(f"{factor}: " + ", ".join(c.attributes_of(factor)))
        blocks.append("\n".join(lines) + "\n")
    return "\n".join(blocks)


def load_clusterings(path, default_name: str | None = None) -> dict:
    path = Path(path)
    return parse_clusterings(
        path.read_text(encoding="utf-8"), default_name=default_name or path.stem, source=str(path)
    )


def identity_clustering(ruleset: RuleSet) -> Clustering:
    """One singleton factor per attribute, named after it."""
    return Clustering("technical", {a: a for a in ruleset.attribute_universe})


def validate_against(ruleset: RuleSet, clustering: Clustering, strict: bool = False) -> ValidationReport:
    """Check that ``clustering`` covers every attribute of ``ruleset``.

    In strict mode unmapped attributes raise :class:`UnmappedAttributeError`.
    Otherwise each one gets a singleton factor of its own name, appended to
    the factor list, and is listed in the report.
    """
    missing = tuple(a for a in ruleset.attribute_universe if a not in clustering.factor_of)
    if not missing:
        return ValidationReport(clustering)
    if strict:
        raise UnmappedAttributeError(missing)
    taken = set(clustering.factors)
    clash = [a for a in missing if a in taken]
    if clash:
        raise ValidationError(
            f"cannot add singleton factor {clash[0]!r}: a factor with that name already exists"
        )
    mapping = dict(clustering.factor_of)
    mapping.update({a: a for a in missing})
    extended = Clustering(clustering.name, mapping, clustering.factors + missing)
    return ValidationReport(extended, missing)


# ---------------------------------------------------------------------------
# Patient records and labeled samples
# ---------------------------------------------------------------------------


def record_from_mapping(obj, default_id: str = "anonymous") -> PatientRecord:
    """Build a record from a flat JSON-style object.

    The optional lowercase ``id`` key names the record; ``null`` values mark
    missing attributes.
    """
    if not isinstance(obj, Mapping):
        raise ValidationError("a patient record must be a JSON object")
    values = {}
    record_id = default_id
    for key, value in obj.items():
        if key == "id":
            if isinstance(value, bool) or not isinstance(value, (str, int)) or value == "":
                raise ValidationError("record id must be a non-empty string")
            record_id = str(value)
            continue
        if value is None:
            continue
        values[key] = value
    return PatientRecord(record_id, values)


def parse_record_json(text: str, default_id: str = "anonymous") -> PatientRecord:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    return record_from_mapping(obj, default_id)


def parse_record_csv(text: str, default_id: str = "anonymous") -> PatientRecord:
    """Parse ``ATTR=value`` pairs separated by commas and/or newlines."""
    values = {}
    record_id = default_id
    for lineno, line in _iter_lines(text):
        line = line.split("#", 1)[0]
        for item in line.split(","):
            item = item.strip()
            if not item:
                continue
            key, sep, raw = item.partition("=")
            key, raw = key.strip(), raw.strip()
            if not sep:
                raise ParseError(f"expected ATTR=value, got {item!r}", lineno)
            if key == "id":
                record_id = raw
                continue
            if key in values:
                raise ParseError(f"attribute {key!r} given twice", lineno)
            try:
                values[key] = float(raw)
            except ValueError:
                raise ParseError(f"value of {key!r} is not a number: {raw!r}", lineno) from None
    return PatientRecord(record_id, values)


def load_records(path) -> list[PatientRecord]:
    """Load records from a ``.json``/``.csv`` file or a directory of them.

    A JSON file may hold a single object or a list of objects. Record ids
    default to the file stem (suffixed with the list index for lists).
    """
    path = Path(path)
    if path.is_dir():
        out = []
        for child in sorted(path.iterdir()):
            if child.suffix in (".json", ".csv") and child.is_file():
                out.extend(load_records(child))
        return out
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".csv":
        return [parse_record_csv(text, default_id=path.stem)]
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno, source=str(path)) from None
    if isinstance(obj, list):
        return [record_from_mapping(o, default_id=f"{path.stem}-{i}") for i, o in enumerate(obj)]
    return [record_from_mapping(obj, default_id=path.stem)]


LABEL_COLUMN = "MODEL_LABEL"


def parse_labeled_samples(text: str) -> list[tuple[PatientRecord, str]]:
    """Parse a labeled-sample CSV (attribute columns plus ``MODEL_LABEL``).

    An optional ``id`` column names the rows; empty cells are missing values.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError("empty sample file") from None
    if LABEL_COLUMN not in header:
        raise ParseError(f"missing {LABEL_COLUMN} column", 1)
    if len(set(header)) != len(header):
        raise ParseError("duplicate column name", 1)
    samples = []
    for rowno, row in enumerate(reader, start=2):
        if not any(cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", rowno)
        values = {}
        label = None
        record_id = f"row{rowno - 1}"
        for key, cell in zip(header, row):
            cell = cell.strip()
            if key == LABEL_COLUMN:
                label = cell
            elif key == "id":
                record_id = cell or record_id
            elif cell:
                try:
                    values[key] = float(cell)
                except ValueError:
                    raise ParseError(f"value of {key!r} is not a number: {cell!r}", rowno) from None
        if not label:
            raise ParseError("empty model label", rowno)
        try:
            samples.append((PatientRecord(record_id, values), label))
        except ValidationError as exc:
            raise ParseError(str(exc), rowno) from None
    return samples

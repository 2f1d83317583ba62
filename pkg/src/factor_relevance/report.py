"""Ranked tables and deterministic SVG renderings of explanation reports."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence
from xml.sax.saxutils import escape, quoteattr

from ._validation import check_unique_ids
from .exceptions import NoActivationError, ValidationError
from .model_io import Clustering, PatientRecord, RuleSet
from .relevance import ExplanationReport, explain_local, json_number


def _fmt(x: float) -> str:
    s = f"{x:.6f}"
    return "0.000000" if s == "-0.000000" else s


def axis_max_for(normalize: str) -> float:
    return 1.0 if normalize == "minmax2x" else 0.5


# ---------------------------------------------------------------------------
# Rank table
# ---------------------------------------------------------------------------


class RankRow(NamedTuple):
    factor: str
    score: float
    active: bool
    above_mean: bool


def rank_table(report: ExplanationReport, top_k: int | None = None) -> list[RankRow]:
    """Rows in report order, flagging factors scoring above the active mean."""
    mean = report.mean_score
    rows = [RankRow(fs.factor, fs.score, fs.active, fs.active and fs.score > mean) for fs in report.factor_scores]
    if top_k is not None:
        if top_k < 0:
            raise ValueError("top_k must be nonnegative")
        rows = rows[:top_k]
    return rows


def format_text(report: ExplanationReport, top_k: int | None = None) -> str:
    if report.scope == "global":
        lines = ["scope: global"]
    else:
        lines = [f"scope: local (patient {report.patient_id})"]
    lines += [
        f"clustering: {report.clustering_name}",
        f"normalize: {report.normalize}",
        f"rules in scope: {report.s_all} (total coverage {report.c_all})",
    ]
    if report.prediction is not None:
        lines.append(
            f"surrogate class: {report.prediction.label} (support {_fmt(report.prediction.support)})"
        )
    lines.append(f"mean active score: {_fmt(report.mean_score)}")
    lines.append("")
    rows = rank_table(report, top_k)
    width = max([len("factor")] + [len(r.factor) for r in rows])
    lines.append(f"{'rank':>4}  {'factor':<{width}}  {'score':>8}  flag")
    for i, row in enumerate(rows, start=1):
        flag = "inactive" if not row.active else ("above mean" if row.above_mean else "")
        lines.append(f"{i:>4}  {row.factor:<{width}}  {_fmt(row.score):>8}  {flag}".rstrip())
    return "\n".join(lines) + "\n"


def report_json(report: ExplanationReport, **extra) -> str:
    payload = report.to_dict()
    payload.update(extra)
    return json.dumps(payload, indent=2, sort_keys=False) + "\n"


# ---------------------------------------------------------------------------
# Radar chart
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RadarSpec:
    axes: tuple[str, ...]
    values: tuple[float, ...]
    title: str = ""
    axis_max: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.axes) != len(self.values):
            raise ValidationError(f"{len(self.axes)} axes but {len(self.values)} values")
        if len(self.axes) < 3:
            raise ValidationError("a radar chart needs at least 3 axes")
        if not (math.isfinite(self.axis_max) and self.axis_max > 0):
            raise ValidationError("axis_max must be positive")
        for axis, v in zip(self.axes, self.values):
            if not 0.0 <= v <= self.axis_max:
                raise ValidationError(f"value {v} of {axis!r} outside [0, {self.axis_max}]")

    @classmethod
    def from_report(cls, report: ExplanationReport, title: str | None = None) -> "RadarSpec":
        if title is None:
            title = "global" if report.scope == "global" else f"patient {report.patient_id}"
            title += f" ({report.clustering_name})"
        return cls(
            report.factors,
            tuple(fs.score for fs in report.factor_scores),
            title,
            axis_max_for(report.normalize),
        )


_RADAR_SIZE = 520
_RADAR_RADIUS = 170.0
_RADAR_RINGS = 4


def render_radar(spec: RadarSpec) -> str:
    """One labeled spoke per axis, concentric grid rings and the score polygon."""
    cx = cy = _RADAR_SIZE / 2
    cy += 10
    n = len(spec.axes)
    angles = [-math.pi / 2 + 2 * math.pi * i / n for i in range(n)]

    def point(angle, r):
        return cx + r * math.cos(angle), cy + r * math.sin(angle)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_RADAR_SIZE}" height="{_RADAR_SIZE}" '
        f'viewBox="0 0 {_RADAR_SIZE} {_RADAR_SIZE}" font-family="sans-serif">',
        f'<rect x="0" y="0" width="{_RADAR_SIZE}" height="{_RADAR_SIZE}" fill="white"/>',
    ]
    if spec.title:
        out.append(f'<text x="{_fmt(cx)}" y="24" text-anchor="middle" font-size="15">{escape(spec.title)}</text>')
    out.append('<g class="grid" fill="none" stroke="#cccccc" stroke-width="1">')
    for k in range(1, _RADAR_RINGS + 1):
        r = _RADAR_RADIUS * k / _RADAR_RINGS
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in (point(a, r) for a in angles))
        out.append(f'<polygon points="{pts}"/>')
    out.append("</g>")
    out.append('<g class="ring-labels" font-size="9" fill="#888888">')
    for k in range(1, _RADAR_RINGS + 1):
        out.append(
            f'<text x="{_fmt(cx + 3)}" y="{_fmt(cy - _RADAR_RADIUS * k / _RADAR_RINGS - 2)}">'
            f"{_fmt(spec.axis_max * k / _RADAR_RINGS)}</text>"
        )
    out.append("</g>")
    out.append('<g class="spokes" stroke="#999999" stroke-width="1">')
    for axis, a in zip(spec.axes, angles):
        x, y = point(a, _RADAR_RADIUS)
        out.append(
            f'<line x1="{_fmt(cx)}" y1="{_fmt(cy)}" x2="{_fmt(x)}" y2="{_fmt(y)}" data-axis={quoteattr(axis)}/>'
        )
    out.append("</g>")
    out.append('<g class="labels" font-size="11" fill="#222222">')
    for axis, a in zip(spec.axes, angles):
        x, y = point(a, _RADAR_RADIUS + 16)
        c = math.cos(a)
        anchor = "middle" if abs(c) < 1e-9 else ("start" if c > 0 else "end")
        out.append(f'<text x="{_fmt(x)}" y="{_fmt(y + 4)}" text-anchor="{anchor}">{escape(axis)}</text>')
    out.append("</g>")
    pts = [point(a, _RADAR_RADIUS * v / spec.axis_max) for a, v in zip(angles, spec.values)]
    out.append(
        '<polygon class="scores" points="'
        + " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)
        + '" fill="#d6604d" fill-opacity="0.35" stroke="#b2182b" stroke-width="2"/>'
    )
    out.append('<g class="points" fill="#b2182b">')
    for axis, v, (x, y) in zip(spec.axes, spec.values, pts):
        out.append(
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="3"><title>{escape(axis)}: {_fmt(v)}</title></circle>'
        )
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Heatmap
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HeatmapSpec:
    rows: tuple[str, ...]
    cols: tuple[str, ...]
    cells: tuple[tuple[float, ...], ...]
    vmin: float = 0.0
    vmax: float = 0.5
    title: str = ""

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "cols", tuple(self.cols))
        object.__setattr__(self, "cells", tuple(tuple(float(v) for v in row) for row in self.cells))
        if not self.rows or not self.cols:
            raise ValidationError("heatmap needs at least one row and one column")
        if len(self.cells) != len(self.rows) or any(len(r) != len(self.cols) for r in self.cells):
            raise ValidationError(
                f"cell matrix does not match {len(self.rows)} rows x {len(self.cols)} columns"
            )
        if not self.vmax > self.vmin:
            raise ValidationError("color scale needs vmax > vmin")
        for row in self.cells:
            for v in row:
                if not self.vmin <= v <= self.vmax:
                    raise ValidationError(f"cell value {v} outside [{self.vmin}, {self.vmax}]")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.cols)


_LOW = (255, 255, 255)
_HIGH = (178, 24, 43)


def _color(t: float) -> str:
    rgb = (round(lo + (hi - lo) * t) for lo, hi in zip(_LOW, _HIGH))
    return "#" + "".join(f"{c:02x}" for c in rgb)


def render_heatmap(spec: HeatmapSpec) -> str:
    """Profiles as rows, factors as columns, linear white-to-red scale with legend."""
    cell_w, cell_h = 36, 24
    left = 16 + 7 * max(len(r) for r in spec.rows)
    top = 40 + 6 * max(len(c) for c in spec.cols)
    grid_w = cell_w * len(spec.cols)
    grid_h = cell_h * len(spec.rows)
    legend_h = 60
    width = left + grid_w + 20
    height = top + grid_h + legend_h
    span = spec.vmax - spec.vmin

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">',
        "<defs>",
        '<linearGradient id="scale" x1="0" y1="0" x2="1" y2="0">',
        f'<stop offset="0" stop-color="{_color(0.0)}"/>',
        f'<stop offset="1" stop-color="{_color(1.0)}"/>',
        "</linearGradient>",
        "</defs>",
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if spec.title:
        out.append(f'<text x="{left}" y="18" font-size="14">{escape(spec.title)}</text>')
    out.append('<g class="col-labels" font-size="10">')
    for j, col in enumerate(spec.cols):
        x = left + cell_w * j + cell_w / 2
        y = top - 6
        out.append(f'<text x="{_fmt(x)}" y="{y}" transform="rotate(-60 {_fmt(x)} {y})">{escape(col)}</text>')
    out.append("</g>")
    out.append('<g class="row-labels" font-size="10" text-anchor="end">')
    for i, row in enumerate(spec.rows):
        out.append(f'<text x="{left - 6}" y="{top + cell_h * i + cell_h / 2 + 4:.0f}">{escape(row)}</text>')
    out.append("</g>")
    out.append('<g class="cells" stroke="#ffffff" stroke-width="1">')
    for i, (row, values) in enumerate(zip(spec.rows, spec.cells)):
        for j, (col, v) in enumerate(zip(spec.cols, values)):
            out.append(
                f'<rect x="{left + cell_w * j}" y="{top + cell_h * i}" width="{cell_w}" height="{cell_h}" '
                f'fill="{_color((v - spec.vmin) / span)}"><title>{escape(row)} / {escape(col)}: {_fmt(v)}</title></rect>'
            )
    out.append("</g>")
    ly = top + grid_h + 20
    bar_w = min(grid_w, 240)
    out.append('<g class="legend" font-size="10">')
    out.append(f'<rect x="{left}" y="{ly}" width="{bar_w}" height="12" fill="url(#scale)" stroke="#999999"/>')
    out.append(f'<text x="{left}" y="{ly + 26}" text-anchor="start">{_fmt(spec.vmin)}</text>')
    out.append(f'<text x="{left + bar_w}" y="{ly + 26}" text-anchor="end">{_fmt(spec.vmax)}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Batch of profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BatchResult:
    """Per-profile local reports plus the profile x factor score matrix.

    Profiles that activate no rule map to ``None`` in ``reports``, show as
    all-zero heatmap rows and are listed in ``no_activation``.
    """

    reports: dict
    heatmap: HeatmapSpec
    no_activation: tuple[str, ...]
    clustering_name: str
    normalize: str

    def to_dict(self) -> dict:
        return {
            "clustering": self.clustering_name,
            "normalize": self.normalize,
            "title": self.heatmap.title,
            "profiles": list(self.heatmap.rows),
            "factors": list(self.heatmap.cols),
            "matrix": [[json_number(v) for v in row] for row in self.heatmap.cells],
            "no_activation": list(self.no_activation),
            "reports": {
                pid: (rep.to_dict() if rep is not None else None) for pid, rep in self.reports.items()
            },
        }


def batch_profiles(
    ruleset: RuleSet,
    clustering: Clustering,
    records: Sequence[PatientRecord],
    normalize: str = "literal",
    title: str = "",
) -> BatchResult:
    if not records:
        raise ValidationError("batch needs at least one record")
    check_unique_ids(records)
    factors = clustering.factors
    reports = {}
    rows = []
    missing = []
    for record in records:
        try:
            rep = explain_local(ruleset, clustering, record, normalize)
        except NoActivationError:
            reports[record.id] = None
            missing.append(record.id)
            rows.append((0.0,) * len(factors))
            continue
        reports[record.id] = rep
        scores = rep.scores()
        rows.append(tuple(scores[f] for f in factors))
    heatmap = HeatmapSpec(
        tuple(r.id for r in records), factors, tuple(rows), 0.0, axis_max_for(normalize), title
    )
    return BatchResult(reports, heatmap, tuple(missing), clustering.name, normalize)

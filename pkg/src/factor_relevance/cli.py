"""Command-line front end.

Exit status: 0 on success, 1 on parse or validation errors, 2 when a local
explanation is requested for a record that activates no rule.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import __version__
from .activation import rule_fidelity
from .exceptions import FactorRelevanceError, NoActivationError
from .model_io import (
    identity_clustering,
    load_clusterings,
    load_records,
    load_rules,
    parse_labeled_samples,
    validate_against,
)
from .relevance import NORMALIZE_MODES, explain_global, explain_local, json_number
from .report import (
    HeatmapSpec,
    RadarSpec,
    axis_max_for,
    batch_profiles,
    format_text,
    render_heatmap,
    render_radar,
    report_json,
)

EXIT_OK, EXIT_INVALID, EXIT_NO_ACTIVATION = 0, 1, 2


class _Context:
    def __init__(self, args, stdout, stderr):
        self.args = args
        self.stdout = stdout
        self.stderr = stderr
        self.written: list[str] = []

    def warn(self, msg):
        print(f"warning: {msg}", file=self.stderr)

    @property
    def out(self) -> Path:
        path = Path(self.args.out)
        path.mkdir(parents=True, exist_ok=True)
        return path

    def write(self, name, text):
        path = self.out / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        self.written.append(str(path))

    def meta(self):
        return {"meta": {"version": __version__}} if getattr(self.args, "stamp", False) else {}

    def emit_json(self, payload):
        payload = dict(payload, **self.meta())
        self.stdout.write(json.dumps(payload, indent=2) + "\n")


def _load_model(ctx):
    args = ctx.args
    ruleset = load_rules(args.rules)
    if args.factors:
        found = load_clusterings(args.factors)
        if args.clustering:
            if args.clustering not in found:
                raise FactorRelevanceError(
                    f"no clustering named {args.clustering!r} in {args.factors} "
                    f"(available: {', '.join(found)})"
                )
            clustering = found[args.clustering]
        else:
            clustering = next(iter(found.values()))
    elif args.clustering not in (None, "technical"):
        raise FactorRelevanceError(f"clustering {args.clustering!r} requested but no --factors file given")
    else:
        clustering = identity_clustering(ruleset)
    report = validate_against(ruleset, clustering, strict=args.strict)
    for attr in report.auto_singletons:
        ctx.warn(f"attribute {attr} has no factor in {clustering.name!r}; using a singleton factor")
    return ruleset, report.clustering, report.auto_singletons


def _write_report(ctx, stem, report):
    ctx.write(f"{stem}.report.json", report_json(report, **ctx.meta()))
    ctx.write(f"{stem}.report.txt", format_text(report, ctx.args.top_k))
    if len(report.factor_scores) >= 3:
        ctx.write(f"{stem}.radar.svg", render_radar(RadarSpec.from_report(report)))
    else:
        ctx.warn(f"radar chart skipped for {stem}: needs at least 3 factors, have {len(report.factor_scores)}")


def _emit_report(ctx, report):
    if ctx.args.format == "json":
        ctx.emit_json({"report": report.to_dict(), "files": ctx.written})
    else:
        ctx.stdout.write(format_text(report, ctx.args.top_k))


def cmd_validate(ctx):
    ruleset, clustering, singletons = _load_model(ctx)
    payload = {
        "valid": True,
        "rules": len(ruleset),
        "attributes": len(ruleset.attribute_universe),
        "clustering": clustering.name,
        "factors": len(clustering.factors),
        "auto_singletons": list(singletons),
    }
    if ctx.args.format == "json":
        ctx.emit_json(payload)
    else:
        ctx.stdout.write(
            f"ok: {payload['rules']} rules over {payload['attributes']} attributes, "
            f"clustering {clustering.name!r} with {payload['factors']} factors"
            + (f", {len(singletons)} auto-singleton(s)" if singletons else "")
            + "\n"
        )
    return EXIT_OK


def cmd_explain_global(ctx):
    ruleset, clustering, _ = _load_model(ctx)
    report = explain_global(ruleset, clustering, ctx.args.normalize)
    _write_report(ctx, "global", report)
    _emit_report(ctx, report)
    return EXIT_OK


def cmd_explain_local(ctx):
    ruleset, clustering, _ = _load_model(ctx)
    records = load_records(ctx.args.patient)
    if len(records) != 1:
        raise FactorRelevanceError(f"{ctx.args.patient} holds {len(records)} records; use 'batch'")
    record = records[0]
    try:
        report = explain_local(ruleset, clustering, record, ctx.args.normalize)
    except NoActivationError as exc:
        print(f"error: {exc}", file=ctx.stderr)
        if ctx.args.format == "json":
            ctx.emit_json({"error": "no_activation", "patient_id": exc.patient_id, "detail": str(exc)})
        return EXIT_NO_ACTIVATION
    _write_report(ctx, record.id, report)
    _emit_report(ctx, report)
    return EXIT_OK


def cmd_batch(ctx):
    ruleset, clustering, _ = _load_model(ctx)
    records = load_records(ctx.args.patients)
    result = batch_profiles(ruleset, clustering, records, ctx.args.normalize, title=ctx.args.name)
    for pid, rep in result.reports.items():
        if rep is not None:
            _write_report(ctx, pid, rep)
    for pid in result.no_activation:
        ctx.warn(f"patient {pid} activates no rule; zero row in heatmap")
    ctx.write(f"{ctx.args.name}.heatmap.svg", render_heatmap(result.heatmap))
    ctx.write(f"{ctx.args.name}.batch.json", json.dumps(dict(result.to_dict(), **ctx.meta()), indent=2) + "\n")
    if ctx.args.format == "json":
        ctx.emit_json({
            "profiles": list(result.heatmap.rows),
            "factors": list(result.heatmap.cols),
            "shape": list(result.heatmap.shape),
            "no_activation": list(result.no_activation),
            "files": ctx.written,
        })
    else:
        rows, cols = result.heatmap.shape
        ctx.stdout.write(f"{rows} profiles x {cols} factors; {len(result.no_activation)} without activation\n")
        for path in ctx.written:
            ctx.stdout.write(f"wrote {path}\n")
    return EXIT_OK


def fidelity_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rule_id", "activations", "matches", "fidelity"])
    for r in reports:
        writer.writerow([r.rule_id, r.activations, r.matches,
                         "undefined" if r.fidelity is None else f"{r.fidelity:.6f}"])
    return buf.getvalue()


def cmd_fidelity(ctx):
    ruleset = load_rules(ctx.args.rules)
    samples = parse_labeled_samples(Path(ctx.args.samples).read_text(encoding="utf-8"))
    reports = rule_fidelity(ruleset, samples)
    text = fidelity_csv(reports)
    ctx.write("fidelity.csv", text)
    if ctx.args.format == "json":
        ctx.emit_json({
            "samples": len(samples),
            "rules": [
                {"rule_id": r.rule_id, "activations": r.activations, "matches": r.matches,
                 "fidelity": json_number(r.fidelity)}
                for r in reports
            ],
            "files": ctx.written,
        })
    else:
        ctx.stdout.write(text)
    return EXIT_OK


def cmd_render(ctx):
    """Re-render SVG from a saved ``*.report.json`` or ``*.batch.json``."""
    src = Path(ctx.args.input)
    try:
        payload = json.loads(src.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FactorRelevanceError(f"{src}: {exc}") from None
    stem = src.name.split(".")[0]
    mode = payload.get("normalize", "literal")
    if "matrix" in payload:
        spec = HeatmapSpec(payload["profiles"], payload["factors"], payload["matrix"], 0.0, axis_max_for(mode),
                           payload.get("title", ""))
        name = f"{stem}.heatmap.svg"
        svg = render_heatmap(spec)
    elif "factors" in payload:
        if payload.get("scope") == "local":
            title = f"patient {payload.get('patient_id')}"
        else:
            title = "global"
        title += f" ({payload.get('clustering')})"
        spec = RadarSpec(
            [f["factor"] for f in payload["factors"]],
            [f["score"] for f in payload["factors"]],
            title,
            axis_max_for(mode),
        )
        name = f"{stem}.radar.svg"
        svg = render_radar(spec)
    else:
        raise FactorRelevanceError(f"{src} is neither a report nor a batch result")
    ctx.write(name, svg)
    if ctx.args.format == "json":
        ctx.emit_json({"files": ctx.written})
    else:
        ctx.stdout.write(f"wrote {ctx.written[0]}\n")
    return EXIT_OK


def cmd_serve(ctx):  # pragma: no cover - blocking
    from .service import ServiceConfig, serve

    args = ctx.args
    config = ServiceConfig.load(
        args.config,
        rules=args.rules,
        factors=args.factors,
        clustering=args.clustering,
        normalize=args.normalize,
        strict=False if args.lenient else None,
        host=args.host,
        port=args.port,
    )
    serve(config)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="factor-relevance",
        description="Explain rule-based predictions by scoring semantic factors.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    output = argparse.ArgumentParser(add_help=False)
    output.add_argument("--out", default=".", help="output directory (default: current directory)")
    output.add_argument("--format", choices=("text", "json"), default="text")
    output.add_argument("--stamp", action="store_true", help="record the package version in JSON outputs")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--rules", required=True, help="rule-DSL file")
    model.add_argument("--factors", help="clustering file (default: one factor per attribute)")
    model.add_argument("--clustering", help="clustering name inside --factors")
    model.add_argument("--strict", action="store_true", help="fail on attributes without a factor")

    scoring = argparse.ArgumentParser(add_help=False)
    scoring.add_argument("--normalize", choices=NORMALIZE_MODES, default="literal")
    scoring.add_argument("--top-k", type=int, default=None, help="rows shown in text tables")

    p = sub.add_parser("validate", parents=[model, output], help="check rules and clustering")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("explain-global", parents=[model, scoring, output], help="explain the whole rule set")
    p.set_defaults(func=cmd_explain_global)

    p = sub.add_parser("explain-local", parents=[model, scoring, output], help="explain one patient")
    p.add_argument("--patient", required=True, help="patient record (.json object or .csv ATTR=value)")
    p.set_defaults(func=cmd_explain_local)

    p = sub.add_parser("batch", parents=[model, scoring, output], help="explain many patients plus heatmap")
    p.add_argument("--patients", required=True, help="directory of records or a JSON list file")
    p.add_argument("--name", default="batch", help="stem of the batch output files")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("fidelity", parents=[output], help="per-rule fidelity on labeled samples")
    p.add_argument("--rules", required=True)
    p.add_argument("--samples", required=True, help="CSV with attribute columns and MODEL_LABEL")
    p.set_defaults(func=cmd_fidelity)

    p = sub.add_parser("render", parents=[output], help="render SVG from a saved report or batch JSON")
    p.add_argument("input")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--rules")
    p.add_argument("--factors")
    p.add_argument("--clustering")
    p.add_argument("--normalize", choices=NORMALIZE_MODES)
    p.add_argument("--lenient", action="store_true", help="auto-assign singleton factors instead of failing")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    ctx = _Context(args, stdout, stderr)
    try:
        return args.func(ctx)
    except (FactorRelevanceError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

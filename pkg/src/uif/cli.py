"""Command-line front end: ``uif``, ``analyze`` and ``synth`` subcommands.

Exit codes: 0 success, 1 degenerate analysis input, 2 I/O or schema error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .analysis import (
    RatioKind,
    demographic_ratios,
    load_ratio_table,
    longitudinal_correlation,
    overall_report,
    per_discipline_correlations,
    plot_data,
    ratio_regression,
    ratio_table_report,
    regression_report,
    resolve_disciplines,
    select_by_p,
    size_correlations,
    top_k_report,
)
from .ingest import (
    DedupPolicy,
    FilterSpec,
    dump_journal_table,
    dump_journal_table_json,
    filter_events,
    join_with_citation,
    load_citation_table,
    load_demographics,
    load_discipline_map,
    load_journal_table,
    parse_usage_log,
    tally_downloads,
)
from .metrics import RankKey, attach_uif, rank_journals
from .model import AnalysisError, AnalysisReport, InputError, RequestType, UIFError
from .stats import DEFAULT_SEED
from .synth import Planted, generate

REPORTS = ("overall", "disciplines", "regression", "ratios", "longitudinal", "topk", "plot", "size")


class CliError(Exception):
    def __init__(self, message: str, code: int = 2):
        super().__init__(message)
        self.code = code


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise CliError(f"{path}: no such file") from None
    except UnicodeDecodeError:
        raise CliError(f"{path}: not valid UTF-8") from None
    except OSError as exc:
        raise CliError(f"{path}: {exc.strerror or exc}") from None


def _digest(text: str) -> str:
    return "sha256:" + hashlib.sha256(text.encode("utf-8")).hexdigest()


class Inputs:
    """Reads input files once and remembers their digests for report metadata."""

    def __init__(self) -> None:
        self.digests: dict[str, str] = {}

    def read(self, path: str) -> str:
        text = _read(path)
        self.digests[path] = _digest(text)
        return text


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated years, got {text!r}") from None


def _request_types(text: str) -> list[RequestType]:
    try:
        return [RequestType(t.strip()) for t in text.split(",") if t.strip()]
    except ValueError:
        choices = ", ".join(m.value for m in RequestType)
        raise argparse.ArgumentTypeError(f"request types must be among {choices}") from None


DEDUP_CHOICES = {
    "count-all": DedupPolicy.COUNT_ALL,
    "once-per-user-article-day": DedupPolicy.ONCE_PER_USER_ARTICLE_DAY,
}


def _add_filter_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--log", help="usage log TSV")
    p.add_argument("--citations", help="citation table TSV (journal_key, year, if_value, citable_items)")
    p.add_argument("--year", type=int, default=2004, help="metric year (default: 2004)")
    p.add_argument("--pub-window", type=_int_list, help="accepted publication years (default: year-1,year-2)")
    p.add_argument("--request-types", type=_request_types, help="accepted request types (default: FullText)")
    p.add_argument("--dedup", choices=sorted(DEDUP_CHOICES), default="count-all")
    p.add_argument("--reject-file", help="write rejected-line diagnostics here instead of stderr")


def _filter_spec(args: argparse.Namespace) -> FilterSpec:
    kwargs = {"metric_year": args.year, "dedup_policy": DEDUP_CHOICES[args.dedup]}
    if args.pub_window:
        kwargs["publication_window"] = frozenset(args.pub_window)
    if args.request_types:
        kwargs["request_types"] = frozenset(args.request_types)
    try:
        return FilterSpec(**kwargs)
    except ValueError as exc:
        raise CliError(f"invalid filter: {exc}") from None


def _run_pipeline(args: argparse.Namespace, inputs: Inputs):
    if not args.log or not args.citations:
        raise CliError("--log and --citations are both required")
    spec = _filter_spec(args)
    log_text = inputs.read(args.log)
    cit_text = inputs.read(args.citations)
    citations = load_citation_table(cit_text, source_name=args.citations)
    if args.reject_file:
        with open(args.reject_file, "w", encoding="utf-8") as sink:
            events, stats = parse_usage_log(log_text, diagnostics=sink, source_name=args.log)
    else:
        events, stats = parse_usage_log(log_text, diagnostics=sys.stderr, source_name=args.log)
    kept = filter_events(events, spec)
    stats = stats.with_filtered(len(kept))
    tally = tally_downloads(kept)
    joined = join_with_citation(tally, citations, spec.metric_year)
    records, zero_citable = attach_uif(joined.records)
    excluded = list(joined.excluded) + [(j, "ZeroCitableItems") for j in zero_citable]
    ranked = [rj.record for rj in rank_journals(records, RankKey.BY_UIF)]
    return spec, stats, tally, citations, ranked, sorted(excluded, key=lambda e: e[0])


def _base_metadata(inputs: Inputs, spec: FilterSpec | None = None, **extra) -> dict:
    meta = {"tool": "uif", "version": __version__, "inputs": dict(sorted(inputs.digests.items()))}
    if spec is not None:
        meta["filter"] = spec.as_dict()
    meta.update(extra)
    return meta


def _write(out: Path | None, name: str, text: str) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        (out / name).write_text(text, encoding="utf-8")


def _out_dir(path: str | None) -> Path | None:
    if path is None:
        return None
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"{path}: cannot create output directory ({exc.strerror})") from None
    return out


def cmd_uif(args: argparse.Namespace) -> int:
    inputs = Inputs()
    spec, stats, tally, _, records, excluded = _run_pipeline(args, inputs)
    print(stats.funnel(), file=sys.stderr)
    print(f"journals tallied: {len(tally)}; joined: {len(records)}; excluded: {len(excluded)}", file=sys.stderr)
    meta = _base_metadata(inputs, spec)
    out = _out_dir(args.out)
    if args.format == "json":
        _write(out, "uif_table.json", dump_journal_table_json(records, meta))
    else:
        _write(out, "uif_table.tsv", dump_journal_table(records))
    if out is not None:
        lines = ["journal_key\tdownloads\treason"]
        lines += [f"{j}\t{tally[j]}\t{getattr(r, 'value', r)}" for j, r in excluded]
        _write(out, "excluded.tsv", "\n".join(lines) + "\n")
        lines = ["journal_key\tdownloads"] + [f"{j}\t{n}" for j, n in tally.items()]
        _write(out, "tally.tsv", "\n".join(lines) + "\n")
        _write(out, "ingest_stats.json", json.dumps({**stats.as_dict(), "metadata": meta}, indent=2) + "\n")
    return 0


def _load_records(args: argparse.Namespace, inputs: Inputs):
    if args.table:
        records = load_journal_table(inputs.read(args.table), source_name=args.table)
        citations = None
        if args.citations:
            citations = load_citation_table(inputs.read(args.citations), source_name=args.citations)
        return None, records, citations
    spec, stats, _, citations, records, _ = _run_pipeline(args, inputs)
    print(stats.funnel(), file=sys.stderr)
    return spec, records, citations


def _discipline_map(paths: Sequence[str], inputs: Inputs):
    codes = journals = None
    for path in paths:
        text = inputs.read(path)
        header = next((l for l in text.splitlines() if l.strip() and not l.startswith("#")), "")
        cols = [c.strip() for c in header.split("\t")]
        if cols[:2] == ["code", "discipline"]:
            codes = (text, path)
        elif cols[:2] == ["journal_key", "code"]:
            journals = (text, path)
        else:
            raise CliError(f"{path}: header must be 'code<TAB>discipline' or 'journal_key<TAB>code'")
    if journals is None:
        raise CliError("--discipline-map needs a journal_key<TAB>code file")
    return load_discipline_map(
        codes[0] if codes else None, journals[0],
        codes_name=codes[1] if codes else "<bundled codes>", journals_name=journals[1],
    )


def cmd_analyze(args: argparse.Namespace) -> int:
    inputs = Inputs()
    wanted = []
    for chunk in args.report or ["overall"]:
        wanted += [r.strip() for r in chunk.split(",") if r.strip()]
    unknown = sorted(set(wanted) - set(REPORTS))
    if unknown:
        raise CliError(f"unknown report(s) {unknown}; choose from {', '.join(REPORTS)}")
    needs_records = any(r in wanted for r in ("overall", "disciplines", "longitudinal", "topk", "plot", "size"))
    needs_records = needs_records or ("regression" in wanted and args.discipline_map)
    spec, records, citations = (None, None, None)
    if needs_records:
        if not args.table and not args.log:
            raise CliError("supply --table, or --log with --citations")
        spec, records, citations = _load_records(args, inputs)
    dmap = _discipline_map(args.discipline_map, inputs) if args.discipline_map else None
    demographics = None
    if args.demographics:
        demographics = load_demographics(inputs.read(args.demographics), source_name=args.demographics)
    literal_ratios, supplied_corr = (None, None)
    if args.ratios:
        literal_ratios, supplied_corr = load_ratio_table(inputs.read(args.ratios), source_name=args.ratios)

    reports: dict[str, AnalysisReport] = {}
    disc_report = None
    if dmap is not None and records is not None and any(r in wanted for r in ("disciplines", "regression", "size")):
        disc_report = per_discipline_correlations(records, dmap, seed=args.seed)
    for name in wanted:
        if name == "overall":
            reports[name] = overall_report(records, seed=args.seed)
        elif name == "disciplines":
            if disc_report is None:
                raise CliError("the disciplines report needs --discipline-map")
            reports[name] = disc_report
        elif name == "longitudinal":
            if citations is None:
                raise CliError("the longitudinal report needs --citations")
            uif = {r.journal_key: r.uif_value for r in records if r.uif_value is not None}
            reports[name] = longitudinal_correlation(uif, citations, seed=args.seed)
        elif name == "topk":
            reports[name] = top_k_report(records, args.k, RankKey(args.by))
        elif name == "plot":
            reports[name] = plot_data(records)
        elif name == "size":
            if disc_report is None:
                raise CliError("the size report needs --discipline-map")
            reports[name] = size_correlations(
                disc_report, dmap=dmap, basis=args.size_basis, demographics=demographics, seed=args.seed
            )
        elif name in ("regression", "ratios"):
            ratios = literal_ratios
            if ratios is None:
                if demographics is None:
                    raise CliError(f"the {name} report needs --ratios or --demographics")
                ratios = [demographic_ratios(d, strict=False) for d in demographics]
            if name == "ratios":
                reports[name] = ratio_table_report(ratios)
                continue
            corr = disc_report or supplied_corr
            if corr is None:
                raise CliError("regression needs --discipline-map (with journal data) or a --ratios file with rho/n/p_value")
            if args.select:
                selected = resolve_disciplines(args.select.split(","), [r["discipline"] for r in corr.rows])
            elif args.select_p is not None:
                selected = select_by_p(corr, args.select_p)
            else:
                raise CliError("regression needs an explicit --select list or --select-p threshold")
            result = ratio_regression(corr, ratios, selected, RatioKind(args.which))
            reports[name] = regression_report(result, args.which, selected)

    meta = _base_metadata(inputs, spec, seed=args.seed)
    out = _out_dir(args.out)
    for name, report in reports.items():
        report = report.with_metadata(**meta)
        if name == "plot":
            print(f"plot: {report.metadata['excluded_zero_values']} journals excluded (zero UIF or IF)", file=sys.stderr)
        text = report.to_json() if args.format == "json" else report.to_tsv()
        if out is None and len(reports) > 1:
            sys.stdout.write(f"# report: {name}\n")
        _write(out, f"{name}.{args.format}", text)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    bundle = generate(
        args.seed,
        n_journals=args.journals,
        planted=Planted(args.planted),
        metric_year=args.year,
        malformed=args.malformed,
    )
    out = _out_dir(args.out or ".")
    _write(out, "usage_log.tsv", bundle.usage_log)
    _write(out, "citations.tsv", bundle.citations)
    _write(out, "journal_codes.tsv", bundle.journal_codes)
    _write(out, "manifest.json", bundle.manifest_json())
    print(
        f"wrote {bundle.manifest['total_events']} events for "
        f"{len(bundle.manifest['tallies'])} journals to {out}",
        file=sys.stderr,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uif",
        description="Journal Usage Impact Factors from usage logs, compared with citation Impact Factors.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("uif", help="compute the joined UIF/IF journal table")
    _add_filter_flags(p)
    p.add_argument("--format", choices=("tsv", "json"), default="tsv")
    p.add_argument("--out", help="output directory (default: table to stdout)")
    p.set_defaults(func=cmd_uif)

    p = sub.add_parser("analyze", help="correlation, regression, longitudinal and ranking reports")
    _add_filter_flags(p)
    p.add_argument("--table", help="joined table written by 'uif' (instead of --log)")
    p.add_argument("--report", action="append", help=f"comma-separated, from: {', '.join(REPORTS)}")
    p.add_argument("--discipline-map", nargs="+", metavar="TSV",
                   help="journal_key/code TSV, optionally with a code/discipline TSV (bundled table otherwise)")
    p.add_argument("--demographics", help="enrollment/FTEF TSV")
    p.add_argument("--ratios", help="literal ratio table (discipline, student, faculty, all[, rho, n, p_value])")
    p.add_argument("--which", choices=[k.value for k in RatioKind], default="all")
    p.add_argument("--select", help="comma-separated disciplines (unique prefixes accepted)")
    p.add_argument("--select-p", type=float, help="select disciplines with p-value <= this threshold")
    p.add_argument("--size-basis", choices=("post-join", "pre-join"), default="post-join")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--by", choices=[k.value for k in RankKey], default="uif")
    p.add_argument("--format", choices=("tsv", "json"), default="tsv")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"Monte-Carlo seed (default: {DEFAULT_SEED})")
    p.add_argument("--out", help="output directory (default: stdout)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synth", help="write a seeded synthetic log, citation table and manifest")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--journals", type=int, default=50)
    p.add_argument("--planted", choices=[m.value for m in Planted], default="negative")
    p.add_argument("--year", type=int, default=2004)
    p.add_argument("--malformed", type=int, default=0, help="number of deliberately broken lines")
    p.add_argument("--out", help="output directory (default: current directory)")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"uif: error: {exc}", file=sys.stderr)
        return exc.code
    except InputError as exc:
        print(f"uif: error: {exc}", file=sys.stderr)
        return 2
    except AnalysisError as exc:
        print(f"uif: {exc.reason}: {exc}", file=sys.stderr)
        return 1
    except UIFError as exc:
        print(f"uif: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

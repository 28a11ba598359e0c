"""Read usage logs and citation tables, filter, tally and join.

The filtering protocol keeps full-text downloads made in the metric year
for articles published in the two preceding years; both windows are
configurable through :class:`FilterSpec`.
"""

from __future__ import annotations

import enum
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from importlib import resources
from types import MappingProxyType
from typing import IO, Callable, Iterable, Iterator, Mapping, NamedTuple, Union

from .model import (
    BadField,
    BadNumeric,
    CoverageWindow,
    DemographicsRecord,
    DisciplineMap,
    DuplicateKey,
    EmptyKey,
    EventRejected,
    FieldMissing,
    JournalYearRecord,
    RequestType,
    SchemaMismatch,
    UnreadableStream,
    UsageEvent,
    canonical_journal_key,
    read_tsv_rows,
    validate_event,
)

DEFAULT_LOG_COLUMNS = (
    "timestamp",
    "user_key",
    "journal_key",
    "article_key",
    "request_type",
    "publication_year",
)

Source = Union[str, bytes, IO[str], IO[bytes], Iterable[str]]
Sink = Union[Callable[[str], object], IO[str], None]


@dataclass(frozen=True)
class LogSchema:
    """Declared column order of a usage log. The header must match it exactly."""

    columns: tuple[str, ...] = DEFAULT_LOG_COLUMNS
    delimiter: str = "\t"

    def __post_init__(self) -> None:
        missing = set(DEFAULT_LOG_COLUMNS) - set(self.columns)
        if missing:
            raise ValueError(f"schema lacks required columns {sorted(missing)}")


@dataclass(frozen=True)
class IngestStats:
    lines_read: int = 0
    events_parsed: int = 0
    events_rejected: int = 0
    events_after_filter: int | None = None
    rejection_breakdown: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "rejection_breakdown", MappingProxyType(dict(sorted(self.rejection_breakdown.items())))
        )

    def merge(self, other: IngestStats) -> IngestStats:
        """Combine counters of two independently parsed chunks."""
        after = None
        if self.events_after_filter is not None or other.events_after_filter is not None:
            after = (self.events_after_filter or 0) + (other.events_after_filter or 0)
        return IngestStats(
            self.lines_read + other.lines_read,
            self.events_parsed + other.events_parsed,
            self.events_rejected + other.events_rejected,
            after,
            Counter(self.rejection_breakdown) + Counter(other.rejection_breakdown),
        )

    def with_filtered(self, n: int) -> IngestStats:
        return replace(self, events_after_filter=n)

    def as_dict(self) -> dict:
        return {
            "lines_read": self.lines_read,
            "events_parsed": self.events_parsed,
            "events_rejected": self.events_rejected,
            "events_after_filter": self.events_after_filter,
            "rejection_breakdown": dict(self.rejection_breakdown),
        }

    def funnel(self) -> str:
        parts = [
            f"lines read: {self.lines_read}",
            f"events parsed: {self.events_parsed}",
            f"events rejected: {self.events_rejected}",
        ]
        if self.events_after_filter is not None:
            parts.append(f"events after filter: {self.events_after_filter}")
        for reason, count in self.rejection_breakdown.items():
            parts.append(f"  rejected {reason}: {count}")
        return "\n".join(parts)


def _lines(source: Source) -> Iterator[str]:
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise UnreadableStream(f"input is not UTF-8: {exc}") from None
    if isinstance(source, str):
        yield from io.StringIO(source)
        return
    try:
        for line in source:
            if isinstance(line, bytes):
                line = line.decode("utf-8")
            yield line
    except UnicodeDecodeError as exc:
        raise UnreadableStream(f"input is not UTF-8: {exc}") from None
    except OSError as exc:
        raise UnreadableStream(str(exc)) from None


def _emit(sink: Sink, message: str) -> None:
    if sink is None:
        return
    if callable(sink):
        sink(message)
    else:
        sink.write(message + "\n")


def parse_timestamp(raw: str) -> datetime:
    """ISO-8601 to an aware UTC datetime; naive stamps are taken as UTC."""
    text = raw.strip()
    if not text:
        raise FieldMissing("timestamp is empty")
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(text)
    except ValueError:
        raise BadField(f"timestamp {raw!r} is not ISO-8601") from None
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _parse_event(
    parts: list[str],
    schema: LogSchema,
    coverage: CoverageWindow | None,
    aliases: Mapping[str, RequestType] | None,
) -> UsageEvent:
    if len(parts) != len(schema.columns):
        raise BadField(f"expected {len(schema.columns)} fields, got {len(parts)}")
    raw = dict(zip(schema.columns, (p.strip() for p in parts)))
    for name in DEFAULT_LOG_COLUMNS:
        if not raw[name]:
            raise FieldMissing(f"{name} is empty")
    ts = parse_timestamp(raw["timestamp"])
    try:
        pub_year = int(raw["publication_year"])
    except ValueError:
        raise BadField(f"publication_year {raw['publication_year']!r} is not an integer") from None
    try:
        journal = canonical_journal_key(raw["journal_key"])
    except EmptyKey as exc:
        raise FieldMissing(str(exc)) from None
    event = UsageEvent(
        timestamp=ts,
        user_key=raw["user_key"],
        journal_key=journal,
        article_key=raw["article_key"],
        request_type=raw["request_type"],  # normalized by validate_event
        publication_year=pub_year,
    )
    return validate_event(event, coverage=coverage, aliases=aliases)


def parse_usage_log(
    source: Source,
    schema: LogSchema | None = None,
    *,
    coverage: CoverageWindow | None = None,
    aliases: Mapping[str, RequestType] | None = None,
    diagnostics: Sink = None,
    source_name: str = "<log>",
) -> tuple[list[UsageEvent], IngestStats]:
    """Parse a headered TSV usage log.

    Malformed lines are skipped and counted by reason; each one is also
    reported to ``diagnostics`` (a callable or writable text stream) as
    ``<source>:<line>: <reason>: <detail>``. A header that differs from the
    declared schema raises :class:`SchemaMismatch`.
    """
    schema = schema or LogSchema()
    events: list[UsageEvent] = []
    rejected: Counter[str] = Counter()
    lines_read = 0
    header_seen = False
    for lineno, line in enumerate(_lines(source), 1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split(schema.delimiter)
        if not header_seen:
            header = tuple(p.strip() for p in parts)
            if header != schema.columns:
                raise SchemaMismatch(
                    f"header {list(header)} does not match schema {list(schema.columns)}",
                    source=source_name,
                    line=lineno,
                )
            header_seen = True
            continue
        lines_read += 1
        try:
            events.append(_parse_event(parts, schema, coverage, aliases))
        except EventRejected as exc:
            rejected[exc.reason] += 1
            _emit(diagnostics, f"{source_name}:{lineno}: {exc.reason}: {exc}")
    n_rej = sum(rejected.values())
    return events, IngestStats(lines_read, len(events), n_rej, None, rejected)


class DedupPolicy(str, enum.Enum):
    COUNT_ALL = "CountAll"
    ONCE_PER_USER_ARTICLE_DAY = "OncePerUserArticleDay"


@dataclass(frozen=True)
class FilterSpec:
    """Which events count as usage for a metric year.

    ``publication_window`` defaults to the two years before ``metric_year``.
    """

    metric_year: int
    request_types: frozenset[RequestType] = frozenset({RequestType.FULL_TEXT})
    publication_window: frozenset[int] | None = None
    dedup_policy: DedupPolicy = DedupPolicy.COUNT_ALL

    def __post_init__(self) -> None:
        window = self.publication_window
        if window is None:
            window = {self.metric_year - 1, self.metric_year - 2}
        object.__setattr__(self, "publication_window", frozenset(int(y) for y in window))
        object.__setattr__(self, "request_types", frozenset(RequestType(t) for t in self.request_types))
        object.__setattr__(self, "dedup_policy", DedupPolicy(self.dedup_policy))
        if not self.publication_window:
            raise ValueError("publication_window must not be empty")
        if not self.request_types:
            raise ValueError("request_types must not be empty")
        if self.metric_year <= max(self.publication_window):
            raise ValueError("metric_year must come after every publication year")

    def accepts(self, e: UsageEvent) -> bool:
        return (
            e.request_type in self.request_types
            and e.timestamp.year == self.metric_year
            and e.publication_year in self.publication_window
        )

    def as_dict(self) -> dict:
        return {
            "metric_year": self.metric_year,
            "request_types": sorted(t.value for t in self.request_types),
            "publication_window": sorted(self.publication_window),
            "dedup_policy": self.dedup_policy.value,
        }


def filter_events(events: Iterable[UsageEvent], spec: FilterSpec) -> list[UsageEvent]:
    """Keep events satisfying ``spec``, ordered by timestamp then input order."""
    kept = sorted(
        (e for e in events if spec.accepts(e)),
        key=lambda e: e.timestamp,
    )
    if spec.dedup_policy is DedupPolicy.COUNT_ALL:
        return kept
    seen: set[tuple] = set()
    out = []
    for e in kept:
        key = (e.user_key, e.journal_key, e.article_key, e.timestamp.date())
        if key not in seen:
            seen.add(key)
            out.append(e)
    return out


def tally_downloads(events: Iterable[UsageEvent]) -> dict[str, int]:
    counts = Counter(e.journal_key for e in events)
    return dict(sorted(counts.items()))


class CitationEntry(NamedTuple):
    if_value: float | None
    citable_items: int


CitationMap = Mapping[tuple[str, int], CitationEntry]


def _read_text(source: Source) -> str:
    return "".join(_lines(source))


def _number(raw: str, kind: type, what: str, source: str, lineno: int):
    text = raw.replace(",", "").strip()
    try:
        value = kind(text)
    except ValueError:
        raise BadNumeric(f"{what} {raw!r} is not a number", source=source, line=lineno) from None
    if isinstance(value, float) and not math.isfinite(value):
        raise BadNumeric(f"{what} {raw!r} is not finite", source=source, line=lineno)
    if value < 0:
        raise BadNumeric(f"{what} {raw!r} is negative", source=source, line=lineno)
    return value


def load_citation_table(source: Source, source_name: str = "<citations>") -> dict[tuple[str, int], CitationEntry]:
    """Read ``journal_key, year, if_value, citable_items`` rows.

    An empty ``if_value`` cell means no IF was published for that year.
    """
    out: dict[tuple[str, int], CitationEntry] = {}
    cols = ("journal_key", "year", "if_value", "citable_items")
    for lineno, row in read_tsv_rows(_read_text(source), cols, source_name):
        try:
            journal = canonical_journal_key(row["journal_key"])
        except EmptyKey as exc:
            raise SchemaMismatch(str(exc), source=source_name, line=lineno) from None
        year = _number(row["year"], int, "year", source_name, lineno)
        if_value = None
        if row["if_value"]:
            if_value = _number(row["if_value"], float, "if_value", source_name, lineno)
        citable = _number(row["citable_items"], int, "citable_items", source_name, lineno)
        key = (journal, year)
        if key in out:
            raise DuplicateKey(f"duplicate row for {journal} {year}", source=source_name, line=lineno)
        out[key] = CitationEntry(if_value, citable)
    return out


class JoinFailure(str, enum.Enum):
    NO_CITATION_ROW = "NoCitationRow"
    NO_IF = "NoIF"
    ZERO_IF = "ZeroIF"
    ZERO_CITABLE = "ZeroCitableItems"


@dataclass(frozen=True)
class JoinResult:
    records: tuple[JournalYearRecord, ...]
    excluded: tuple[tuple[str, JoinFailure], ...]


def join_with_citation(
    tally: Mapping[str, int], citations: CitationMap, year: int
) -> JoinResult:
    """Merge a download tally with the citation rows for ``year``.

    Only journals with a citation row and a non-zero IF survive; the rest
    are returned in ``excluded`` with the reason. Records come back sorted
    by journal key and without ``uif_value``.
    """
    records = []
    excluded = []
    for journal in sorted(tally):
        entry = citations.get((journal, year))
        if entry is None:
            excluded.append((journal, JoinFailure.NO_CITATION_ROW))
        elif entry.if_value is None:
            excluded.append((journal, JoinFailure.NO_IF))
        elif entry.if_value <= 0:
            excluded.append((journal, JoinFailure.ZERO_IF))
        else:
            records.append(
                JournalYearRecord(journal, year, tally[journal], entry.citable_items, entry.if_value)
            )
    return JoinResult(tuple(records), tuple(excluded))


JOURNAL_TABLE_COLUMNS = ("journal_key", "metric_year", "downloads", "citable_items", "if_value", "uif_value")


def _num_text(v: float | None) -> str:
    return "" if v is None else repr(float(v))


def dump_journal_table(records: Iterable[JournalYearRecord]) -> str:
    """Serialize records as TSV. Floats keep full precision so reloading is lossless."""
    lines = ["\t".join(JOURNAL_TABLE_COLUMNS)]
    for r in records:
        lines.append(
            "\t".join(
                [r.journal_key, str(r.metric_year), str(r.downloads), str(r.citable_items),
                 _num_text(r.if_value), _num_text(r.uif_value)]
            )
        )
    return "\n".join(lines) + "\n"


def dump_journal_table_json(records: Iterable[JournalYearRecord], metadata: Mapping | None = None) -> str:
    rows = [
        {c: getattr(r, c) for c in JOURNAL_TABLE_COLUMNS}
        for r in records
    ]
    return json.dumps({"columns": list(JOURNAL_TABLE_COLUMNS), "rows": rows,
                       "metadata": dict(metadata or {})}, indent=2) + "\n"


def load_journal_table(source: Source, source_name: str = "<table>") -> list[JournalYearRecord]:
    """Read a joined table written by :func:`dump_journal_table`.

    ``uif_value`` is recomputed from downloads and citable items rather than
    trusted from the file.
    """
    out = []
    seen = set()
    cols = ("journal_key", "metric_year", "downloads", "citable_items", "if_value")
    for lineno, row in read_tsv_rows(_read_text(source), cols, source_name):
        journal = canonical_journal_key(row["journal_key"])
        year = _number(row["metric_year"], int, "metric_year", source_name, lineno)
        if (journal, year) in seen:
            raise DuplicateKey(f"duplicate row for {journal} {year}", source=source_name, line=lineno)
        seen.add((journal, year))
        downloads = _number(row["downloads"], int, "downloads", source_name, lineno)
        citable = _number(row["citable_items"], int, "citable_items", source_name, lineno)
        if_value = _number(row["if_value"], float, "if_value", source_name, lineno) if row["if_value"] else None
        uif = downloads / citable if citable > 0 else None
        out.append(JournalYearRecord(journal, year, downloads, citable, if_value, uif))
    return out


def load_demographics(source: Source, source_name: str = "<demographics>") -> list[DemographicsRecord]:
    """Read enrollment/FTEF rows. A ``-`` cell reads as zero."""
    cols = ("discipline", "ugrad_students", "grad_students", "ftef_low", "ftef_high", "ftef_grad")
    out = []
    for lineno, row in read_tsv_rows(_read_text(source), cols, source_name):
        nums = []
        for c in cols[1:]:
            cell = row[c]
            nums.append(0.0 if cell in ("-", "") else _number(cell, float, c, source_name, lineno))
        out.append(DemographicsRecord(row["discipline"], *nums))
    return out


def bundled_text(name: str) -> str:
    return resources.files("uif.data").joinpath(name).read_text("utf-8")


def load_discipline_map(
    codes: Source | None = None,
    journal_codes: Source | None = None,
    codes_name: str = "<codes>",
    journals_name: str = "<journal codes>",
) -> DisciplineMap:
    """Build a :class:`DisciplineMap` from ``code<TAB>discipline`` and
    ``journal_key<TAB>code`` tables. Without ``codes`` the bundled CSU
    classification table is used."""
    codes_text = bundled_text("isi_codes.tsv") if codes is None else _read_text(codes)
    code_map: dict[str, set[str]] = {}
    for _, row in read_tsv_rows(codes_text, ("code", "discipline"), codes_name):
        code_map.setdefault(row["code"].upper(), set()).add(row["discipline"])
    journal_map: dict[str, set[str]] = {}
    if journal_codes is not None:
        for lineno, row in read_tsv_rows(_read_text(journal_codes), ("journal_key", "code"), journals_name):
            try:
                journal = canonical_journal_key(row["journal_key"])
            except EmptyKey as exc:
                raise SchemaMismatch(str(exc), source=journals_name, line=lineno) from None
            journal_map.setdefault(journal, set()).add(row["code"].upper())
    return DisciplineMap(code_map, journal_map)

"""Domain types shared across the pipeline.

Everything here is immutable and free of I/O. Construction runs the
invariant checks; violations raise subclasses of :class:`UIFError`.
"""

from __future__ import annotations

import csv
import enum
import json
import math
import re
import string
from dataclasses import dataclass, field
from datetime import datetime
from importlib import resources
from types import MappingProxyType
from typing import Any, Iterable, Mapping, Sequence


class UIFError(Exception):
    """Base class for every error raised by this package."""

    reason = "Error"


class EventRejected(UIFError):
    """A usage event failed validation. ``reason`` names the invariant."""


class FieldMissing(EventRejected):
    reason = "FieldMissing"


class BadField(EventRejected):
    reason = "BadField"


class BadEnumValue(EventRejected):
    reason = "BadEnumValue"


class YearInconsistent(EventRejected):
    reason = "YearInconsistent"


class OutOfCoverage(EventRejected):
    reason = "OutOfCoverage"


class EmptyKey(UIFError):
    reason = "EmptyKey"


class InputError(UIFError):
    """Fatal problem with an input file (maps to exit code 2)."""

    def __init__(self, message: str, *, source: str | None = None, line: int | None = None):
        self.source = source
        self.line = line
        where = ""
        if source is not None:
            where = f"{source}:{line}: " if line is not None else f"{source}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class UnreadableStream(InputError):
    reason = "UnreadableStream"


class SchemaMismatch(InputError):
    reason = "SchemaMismatch"


class DuplicateKey(InputError):
    reason = "DuplicateKey"


class BadNumeric(InputError):
    reason = "BadNumeric"


class AnalysisError(UIFError):
    """Degenerate input for a computation (maps to exit code 1)."""


class ZeroDenominator(AnalysisError):
    reason = "ZeroDenominator"


class MissingKeyValue(AnalysisError):
    reason = "MissingKeyValue"


class NonFiniteValue(AnalysisError):
    reason = "NonFiniteValue"


class LengthMismatch(AnalysisError):
    reason = "LengthMismatch"


class TooFewObservations(AnalysisError):
    reason = "TooFewObservations"


class DegenerateVariance(AnalysisError):
    reason = "DegenerateVariance"


class DegenerateX(AnalysisError):
    reason = "DegenerateX"


class EmptyMap(AnalysisError):
    reason = "EmptyMap"


class MissingDiscipline(AnalysisError):
    reason = "MissingDiscipline"


class RequestType(str, enum.Enum):
    FULL_TEXT = "FullText"
    ABSTRACT = "Abstract"
    HOLDINGS = "Holdings"
    CITATION_DATA = "CitationData"
    OTHER = "Other"


def load_request_aliases(text: str | None = None) -> Mapping[str, RequestType]:
    """Read the alias table (``alias<TAB>request_type``).

    With no argument the bundled ``request_aliases.tsv`` is used. Aliases are
    matched case-insensitively; canonical member values always resolve.
    """
    if text is None:
        text = resources.files("uif.data").joinpath("request_aliases.tsv").read_text("utf-8")
    table: dict[str, RequestType] = {m.value.lower(): m for m in RequestType}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.rstrip("\r\n").split("\t")
        if parts == ["alias", "request_type"]:
            continue
        if len(parts) != 2:
            raise SchemaMismatch("alias table rows need 2 columns", line=lineno)
        try:
            target = RequestType(parts[1].strip())
        except ValueError:
            raise SchemaMismatch(f"unknown request type {parts[1]!r}", line=lineno) from None
        table[parts[0].strip().lower()] = target
    return MappingProxyType(table)


_DEFAULT_ALIASES: Mapping[str, RequestType] | None = None


def default_aliases() -> Mapping[str, RequestType]:
    global _DEFAULT_ALIASES
    if _DEFAULT_ALIASES is None:
        _DEFAULT_ALIASES = load_request_aliases()
    return _DEFAULT_ALIASES


def parse_request_type(raw: str, aliases: Mapping[str, RequestType] | None = None) -> RequestType:
    if isinstance(raw, RequestType):
        return raw
    table = default_aliases() if aliases is None else aliases
    try:
        return table[raw.strip().lower()]
    except KeyError:
        raise BadEnumValue(f"unknown request type {raw!r}") from None


_ISSN = re.compile(r"^\d{4}-\d{3}[\dXx]$")
_WS = re.compile(r"\s+")
_TRAILING = string.punctuation + string.whitespace


def canonical_journal_key(raw: str) -> str:
    """Normalize a journal identifier for joining.

    ISSNs (``####-###X``) pass through; anything else is uppercased with
    whitespace collapsed and trailing punctuation removed.

    >>> canonical_journal_key("  J Fam   Violence.")
    'J FAM VIOLENCE'
    """
    s = raw.strip()
    if _ISSN.match(s):
        return s.upper()
    s = _WS.sub(" ", s.upper()).rstrip(_TRAILING)
    if not s:
        raise EmptyKey(f"journal key {raw!r} is empty after normalization")
    return s


@dataclass(frozen=True)
class UsageEvent:
    """One service request from a linking-server log."""

    timestamp: datetime
    user_key: str
    journal_key: str
    article_key: str
    request_type: RequestType
    publication_year: int


@dataclass(frozen=True)
class CoverageWindow:
    """Inclusive time span the log declares to cover."""

    start: datetime
    end: datetime

    def __contains__(self, ts: datetime) -> bool:
        return self.start <= ts <= self.end


def validate_event(
    e: UsageEvent,
    coverage: CoverageWindow | None = None,
    aliases: Mapping[str, RequestType] | None = None,
) -> UsageEvent:
    """Return ``e`` (with request_type normalized) or raise :class:`EventRejected`."""
    for name in ("user_key", "journal_key", "article_key"):
        value = getattr(e, name)
        if value is None or (isinstance(value, str) and not value.strip()):
            raise FieldMissing(f"{name} is empty")
    if e.timestamp is None:
        raise FieldMissing("timestamp is empty")
    if not isinstance(e.timestamp, datetime):
        raise BadField(f"timestamp {e.timestamp!r} is not a datetime")
    if e.request_type is None:
        raise FieldMissing("request_type is empty")
    rtype = parse_request_type(e.request_type, aliases)
    if e.publication_year is None:
        raise FieldMissing("publication_year is empty")
    if isinstance(e.publication_year, bool) or not isinstance(e.publication_year, int):
        raise BadField(f"publication_year {e.publication_year!r} is not an integer")
    if e.publication_year > e.timestamp.year:
        raise YearInconsistent(
            f"publication_year {e.publication_year} after download year {e.timestamp.year}"
        )
    if coverage is not None and e.timestamp not in coverage:
        raise OutOfCoverage(f"timestamp {e.timestamp.isoformat()} outside coverage window")
    if rtype is e.request_type:
        return e
    return UsageEvent(
        e.timestamp, e.user_key, e.journal_key, e.article_key, rtype, e.publication_year
    )


@dataclass(frozen=True)
class JournalYearRecord:
    """Per-journal facts for one metric year.

    ``downloads`` and ``citable_items`` are the numerator and shared
    denominator of the usage impact factor; ``if_value`` is the published
    citation impact factor, if any.
    """

    journal_key: str
    metric_year: int
    downloads: int
    citable_items: int
    if_value: float | None = None
    uif_value: float | None = None

    def __post_init__(self) -> None:
        if self.downloads < 0:
            raise ValueError(f"{self.journal_key}: downloads must be >= 0")
        if self.citable_items < 0:
            raise ValueError(f"{self.journal_key}: citable_items must be >= 0")
        if self.if_value is not None and not (self.if_value >= 0 and math.isfinite(self.if_value)):
            raise ValueError(f"{self.journal_key}: if_value must be finite and >= 0")
        if self.uif_value is not None:
            if self.citable_items == 0:
                raise ValueError(f"{self.journal_key}: uif_value requires citable_items > 0")
            if self.uif_value != self.downloads / self.citable_items:
                raise ValueError(f"{self.journal_key}: uif_value != downloads / citable_items")


@dataclass(frozen=True)
class DisciplineMap:
    """Journal -> classification codes -> disciplines (many-to-many)."""

    code_to_discipline: Mapping[str, frozenset[str]]
    journal_to_codes: Mapping[str, frozenset[str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "code_to_discipline",
            MappingProxyType({c: frozenset(d) for c, d in self.code_to_discipline.items()}),
        )
        object.__setattr__(
            self,
            "journal_to_codes",
            MappingProxyType({j: frozenset(c) for j, c in self.journal_to_codes.items()}),
        )

    @property
    def disciplines(self) -> list[str]:
        return sorted({d for ds in self.code_to_discipline.values() for d in ds})

    @property
    def unmapped_codes(self) -> frozenset[str]:
        """Codes used by some journal that resolve to no discipline."""
        used = {c for cs in self.journal_to_codes.values() for c in cs}
        return frozenset(c for c in used if not self.code_to_discipline.get(c))

    def codes_for(self, discipline: str) -> frozenset[str]:
        return frozenset(c for c, ds in self.code_to_discipline.items() if discipline in ds)

    def disciplines_of(self, journal_key: str) -> frozenset[str]:
        out: set[str] = set()
        for code in self.journal_to_codes.get(journal_key, ()):
            out.update(self.code_to_discipline.get(code, ()))
        return frozenset(out)

    def journals_in(self, discipline: str) -> frozenset[str]:
        codes = self.codes_for(discipline)
        return frozenset(j for j, cs in self.journal_to_codes.items() if cs & codes)


@dataclass(frozen=True)
class DemographicsRecord:
    """Enrollment and FTEF counts for one discipline."""

    discipline: str
    undergrad_students: float
    grad_students: float
    ftef_low: float
    ftef_high: float
    ftef_grad: float

    def __post_init__(self) -> None:
        for name in ("undergrad_students", "grad_students", "ftef_low", "ftef_high", "ftef_grad"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{self.discipline}: {name} must be finite and >= 0")

    @property
    def ftef_undergrad(self) -> float:
        return self.ftef_low + self.ftef_high


class ReportKind(str, enum.Enum):
    OVERALL = "OverallCorrelation"
    DISCIPLINES = "DisciplineCorrelations"
    REGRESSION = "RatioRegression"
    LONGITUDINAL = "Longitudinal"
    RANKING = "Ranking"
    PLOT = "PlotData"
    SIZE = "SizeCorrelation"
    RATIOS = "Ratios"


# Sort key documented per kind; rows are stored already in this order.
SORT_KEYS = {
    ReportKind.OVERALL: "single row",
    ReportKind.DISCIPLINES: "p_value ascending (unflagged first), then discipline",
    ReportKind.REGRESSION: "single row",
    ReportKind.LONGITUDINAL: "year ascending",
    ReportKind.RANKING: "rank ascending, then journal_key",
    ReportKind.PLOT: "journal_key ascending",
    ReportKind.SIZE: "variable name",
    ReportKind.RATIOS: "discipline ascending",
}


def _fmt(value: Any, digits: int) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        if not math.isfinite(value):
            return str(value)
        # float formatting rounds half-to-even on the stored binary value
        out = f"{value:.{digits}f}"
        return "0." + "0" * digits if out == "-0." + "0" * digits else out
    if isinstance(value, enum.Enum):
        return str(value.value)
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, frozenset, set)):
        items = sorted(value) if isinstance(value, (set, frozenset)) else value
        return [_jsonable(v) for v in items]
    return value


@dataclass(frozen=True)
class AnalysisReport:
    """Tabular analysis output plus provenance metadata.

    Correlation rows carry ``rho``, ``n`` and ``p_value`` together; rows
    whose correlation could not be computed carry a ``status`` flag and
    empty cells instead.
    """

    kind: ReportKind
    columns: tuple[str, ...]
    rows: tuple[Mapping[str, Any], ...]
    metadata: Mapping[str, Any] = field(default_factory=dict)
    digits: int = 3

    def __post_init__(self) -> None:
        object.__setattr__(self, "columns", tuple(self.columns))
        rows = []
        for row in self.rows:
            extra = set(row) - set(self.columns)
            if extra:
                raise ValueError(f"row has unknown columns {sorted(extra)}")
            if row.get("rho") is not None:
                if row.get("n") is None or row.get("p_value") is None:
                    raise ValueError("correlation rows need rho, n and p_value together")
                if row["n"] < 3:
                    raise ValueError("rho reported with n < 3")
            rows.append(MappingProxyType({c: row.get(c) for c in self.columns}))
        object.__setattr__(self, "rows", tuple(rows))
        object.__setattr__(self, "metadata", MappingProxyType(dict(self.metadata)))

    def column(self, name: str) -> list[Any]:
        return [r[name] for r in self.rows]

    def with_metadata(self, **extra: Any) -> AnalysisReport:
        merged = {**self.metadata, **extra}
        return AnalysisReport(self.kind, self.columns, self.rows, merged, self.digits)

    def to_tsv(self, digits: int | None = None) -> str:
        digits = self.digits if digits is None else digits
        lines = ["\t".join(self.columns)]
        for row in self.rows:
            lines.append("\t".join(_fmt(row[c], digits) for c in self.columns))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = {
            "kind": self.kind.value,
            "sort_key": SORT_KEYS[self.kind],
            "columns": list(self.columns),
            "rows": [_jsonable(dict(r)) for r in self.rows],
            "metadata": _jsonable(dict(self.metadata)),
        }
        return json.dumps(payload, indent=2, allow_nan=False) + "\n"


def read_tsv_rows(
    text: str, required: Sequence[str], source: str | None = None
) -> Iterable[tuple[int, dict[str, str]]]:
    """Yield ``(line_number, row)`` for a headered TSV, skipping ``#`` comments.

    The header must contain every column in ``required``.
    """
    reader = csv.reader(text.splitlines(), delimiter="\t", quoting=csv.QUOTE_NONE)
    header: list[str] | None = None
    for lineno, parts in enumerate(reader, 1):
        if not parts or (len(parts) == 1 and not parts[0].strip()) or parts[0].startswith("#"):
            continue
        if header is None:
            header = [p.strip() for p in parts]
            missing = [c for c in required if c not in header]
            if missing:
                raise SchemaMismatch(
                    f"header {header} lacks columns {missing}", source=source, line=lineno
                )
            continue
        if len(parts) != len(header):
            raise SchemaMismatch(
                f"expected {len(header)} columns, got {len(parts)}", source=source, line=lineno
            )
        yield lineno, {h: p.strip() for h, p in zip(header, parts)}

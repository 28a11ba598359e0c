"""Studies built from metrics and stats: overall and per-discipline
correlations, graduate/undergraduate ratios and their regression against
the per-discipline correlations, year-over-year baselines, and rankings."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

from .ingest import CitationMap, Source, _read_text, _number
from .metrics import RankKey, rank_journals
from .model import (
    AnalysisError,
    AnalysisReport,
    BadNumeric,
    DegenerateVariance,
    DemographicsRecord,
    DisciplineMap,
    EmptyMap,
    JournalYearRecord,
    MissingDiscipline,
    MissingKeyValue,
    ReportKind,
    TooFewObservations,
    ZeroDenominator,
    read_tsv_rows,
)
from .stats import DEFAULT_SEED, CorrelationResult, RegressionResult, ols_regression, spearman

CORRELATION_COLUMNS = ("n", "rho", "p_value", "method", "status")


class Status(str, enum.Enum):
    OK = "ok"
    NO_JOURNALS = "NoJournals"
    TOO_FEW = "TooFew"
    DEGENERATE = "DegenerateVariance"


def _correlation_cells(x: Sequence[float], y: Sequence[float], seed: int) -> dict[str, Any]:
    n = len(x)
    if n == 0:
        return {"n": 0, "status": Status.NO_JOURNALS}
    if n < 3:
        return {"n": n, "status": Status.TOO_FEW}
    try:
        res = spearman(x, y, rng=seed)
    except DegenerateVariance:
        return {"n": n, "status": Status.DEGENERATE}
    return {"n": res.n, "rho": res.rho, "p_value": res.p_value, "method": res.method, "status": Status.OK}


def _require_values(records: Sequence[JournalYearRecord]) -> None:
    for r in records:
        if r.uif_value is None or r.if_value is None:
            raise MissingKeyValue(f"{r.journal_key} lacks a UIF or IF value")


def correlate_all(records: Iterable[JournalYearRecord], *, seed: int = DEFAULT_SEED) -> CorrelationResult:
    records = list(records)
    _require_values(records)
    return spearman(
        [r.uif_value for r in records], [r.if_value for r in records], rng=seed
    )


def overall_report(records: Iterable[JournalYearRecord], *, seed: int = DEFAULT_SEED) -> AnalysisReport:
    res = correlate_all(records, seed=seed)
    row = {"n": res.n, "rho": res.rho, "p_value": res.p_value, "method": res.method, "status": Status.OK}
    return AnalysisReport(ReportKind.OVERALL, CORRELATION_COLUMNS, (row,), {"seed": seed})


def per_discipline_correlations(
    records: Iterable[JournalYearRecord],
    dmap: DisciplineMap,
    *,
    seed: int = DEFAULT_SEED,
) -> AnalysisReport:
    """Spearman(UIF, IF) within every discipline of ``dmap``.

    A journal counts toward each discipline any of its codes belongs to.
    Disciplines that cannot yield a correlation get a status flag and no
    rho. Rows: computed ones by ascending p-value, then flagged ones; ties
    by discipline name.
    """
    records = list(records)
    _require_values(records)
    if not dmap.code_to_discipline or not dmap.journal_to_codes:
        raise EmptyMap("discipline map has no codes or no journal assignments")
    rows = []
    for discipline in dmap.disciplines:
        members = dmap.journals_in(discipline)
        subset = [r for r in records if r.journal_key in members]
        cells = _correlation_cells([r.uif_value for r in subset], [r.if_value for r in subset], seed)
        rows.append({"discipline": discipline, **cells})
    rows.sort(key=lambda r: (r.get("p_value") is None, r.get("p_value") or 0.0, r["discipline"]))
    return AnalysisReport(
        ReportKind.DISCIPLINES,
        ("discipline",) + CORRELATION_COLUMNS,
        tuple(rows),
        {"seed": seed, "unmapped_codes": sorted(dmap.unmapped_codes)},
    )


@dataclass(frozen=True)
class RatioSet:
    """Graduate over undergraduate ratios for one discipline.

    A ratio is ``None`` when its undergraduate denominator is zero.
    """

    discipline: str
    ratio_all: float | None
    ratio_student: float | None
    ratio_faculty: float | None

    def __post_init__(self) -> None:
        for name in ("ratio_all", "ratio_student", "ratio_faculty"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{self.discipline}: {name} must be finite and >= 0")

    def get(self, which: RatioKind | str) -> float | None:
        return getattr(self, RatioKind(which).attr)


class RatioKind(str, enum.Enum):
    ALL = "all"
    STUDENT = "student"
    FACULTY = "faculty"

    @property
    def attr(self) -> str:
        return f"ratio_{self.value}"


def demographic_ratios(d: DemographicsRecord, *, strict: bool = True) -> RatioSet:
    """Student, faculty and combined graduate/undergraduate ratios.

    Undergraduate FTEF is the sum of the low and high divisions. With
    ``strict`` a zero denominator raises :class:`ZeroDenominator`; otherwise
    that ratio is left as ``None``.
    """
    parts = {
        "student": (d.grad_students, d.undergrad_students),
        "faculty": (d.ftef_grad, d.ftef_undergrad),
        "all": (d.grad_students + d.ftef_grad, d.undergrad_students + d.ftef_undergrad),
    }
    out: dict[str, float | None] = {}
    for name, (num, den) in parts.items():
        if den > 0:
            out[name] = num / den
        elif strict:
            raise ZeroDenominator(f"{d.discipline}: {name} ratio has no undergraduate denominator")
        else:
            out[name] = None
    return RatioSet(d.discipline, out["all"], out["student"], out["faculty"])


def resolve_disciplines(tokens: Iterable[str], names: Iterable[str]) -> list[str]:
    """Match user tokens to discipline names: exact (case-insensitive) first,
    then a unique prefix, so ``Physical`` finds ``Physical Sciences``."""
    names = sorted(set(names))
    out = []
    for token in tokens:
        t = token.strip().lower()
        if not t:
            continue
        exact = [n for n in names if n.lower() == t]
        hits = exact or [n for n in names if n.lower().startswith(t)]
        if len(hits) != 1:
            detail = "no match" if not hits else f"ambiguous: {hits}"
            raise MissingDiscipline(f"discipline {token!r}: {detail}")
        out.append(hits[0])
    return out


def select_by_p(correlations: AnalysisReport, threshold: float) -> list[str]:
    """Disciplines whose correlation p-value is at or below ``threshold``."""
    return sorted(
        r["discipline"]
        for r in correlations.rows
        if r.get("p_value") is not None and r["p_value"] <= threshold
    )


def ratio_regression(
    correlations: AnalysisReport,
    ratios: Iterable[RatioSet],
    selected: Iterable[str],
    which: RatioKind | str = RatioKind.ALL,
) -> RegressionResult:
    """Regress per-discipline rho on one graduate/undergraduate ratio over
    exactly the ``selected`` disciplines."""
    which = RatioKind(which)
    rho_by = {r["discipline"]: r.get("rho") for r in correlations.rows}
    ratio_by = {r.discipline: r.get(which) for r in ratios}
    points = []
    for name in selected:
        if rho_by.get(name) is None:
            raise MissingDiscipline(f"no correlation for {name!r}")
        if ratio_by.get(name) is None:
            raise MissingDiscipline(f"no {which.value} ratio for {name!r}")
        points.append((ratio_by[name], rho_by[name]))
    return ols_regression(points)


def regression_report(
    result: RegressionResult, which: RatioKind | str, selected: Sequence[str]
) -> AnalysisReport:
    row = {
        "which": RatioKind(which).value,
        "n": result.n,
        "slope": result.slope,
        "intercept": result.intercept,
        "r_squared": result.r_squared,
        "disciplines": ";".join(selected),
    }
    return AnalysisReport(
        ReportKind.REGRESSION,
        ("which", "n", "slope", "intercept", "r_squared", "disciplines"),
        (row,),
        {"x": f"{RatioKind(which).value} graduate/undergraduate ratio", "y": "rho(UIF, IF)"},
        digits=4,
    )


def ratio_table_report(ratios: Iterable[RatioSet]) -> AnalysisReport:
    rows = [
        {"discipline": r.discipline, "student": r.ratio_student, "faculty": r.ratio_faculty, "all": r.ratio_all}
        for r in sorted(ratios, key=lambda r: r.discipline)
    ]
    return AnalysisReport(ReportKind.RATIOS, ("discipline", "student", "faculty", "all"), tuple(rows))


def longitudinal_correlation(
    uif: Mapping[str, float],
    if_series: CitationMap,
    *,
    years: Iterable[int] | None = None,
    seed: int = DEFAULT_SEED,
) -> AnalysisReport:
    """One Spearman row per citation year, over journals that have a UIF
    and a non-zero IF in that year. ``n`` varies with the overlap."""
    by_year: dict[int, dict[str, float]] = {}
    for (journal, year), entry in if_series.items():
        by_year.setdefault(year, {})
        if entry.if_value is not None and entry.if_value > 0:
            by_year[year][journal] = entry.if_value
    wanted = sorted(by_year) if years is None else sorted(set(years))
    if not wanted:
        raise AnalysisError("no citation years supplied")
    rows = []
    for year in wanted:
        ifs = by_year.get(year, {})
        shared = sorted(j for j in ifs if j in uif)
        cells = _correlation_cells([uif[j] for j in shared], [ifs[j] for j in shared], seed)
        rows.append({"year": year, **cells})
    return AnalysisReport(
        ReportKind.LONGITUDINAL, ("year",) + CORRELATION_COLUMNS, tuple(rows), {"seed": seed}
    )


def top_k_report(
    records: Iterable[JournalYearRecord], k: int, key: RankKey | str = RankKey.BY_UIF
) -> AnalysisReport:
    """First ``k`` rows of the display ranking."""
    if k < 1:
        raise ValueError("k must be >= 1")
    key = RankKey(key)
    rows = [
        {
            "rank": rj.rank,
            "journal_key": rj.record.journal_key,
            "uif_value": rj.record.uif_value,
            "if_value": rj.record.if_value,
        }
        for rj in rank_journals(records, key)[:k]
    ]
    return AnalysisReport(
        ReportKind.RANKING,
        ("rank", "journal_key", "uif_value", "if_value"),
        tuple(rows),
        {"ranked_by": key.value, "k": k},
    )


def plot_data(records: Iterable[JournalYearRecord]) -> AnalysisReport:
    """log10 UIF / log10 IF pairs for a log-log scatter; zero values dropped."""
    rows, dropped = [], 0
    for r in sorted(records, key=lambda r: r.journal_key):
        if not r.uif_value or not r.if_value:
            dropped += 1
            continue
        rows.append(
            {"journal_key": r.journal_key, "log10_uif": math.log10(r.uif_value), "log10_if": math.log10(r.if_value)}
        )
    return AnalysisReport(
        ReportKind.PLOT,
        ("journal_key", "log10_uif", "log10_if"),
        tuple(rows),
        {"excluded_zero_values": dropped},
        digits=6,
    )


class SizeBasis(str, enum.Enum):
    POST_JOIN = "post-join"
    PRE_JOIN = "pre-join"


def size_correlations(
    correlations: AnalysisReport,
    *,
    dmap: DisciplineMap | None = None,
    basis: SizeBasis | str = SizeBasis.POST_JOIN,
    demographics: Iterable[DemographicsRecord] | None = None,
    seed: int = DEFAULT_SEED,
) -> AnalysisReport:
    """Correlate per-discipline rho with discipline size.

    ``journal_count`` uses the report's ``n`` (post-join) or the number of
    journals the map assigns to the discipline (pre-join, needs ``dmap``).
    ``enrollment`` uses total students from ``demographics`` when given.
    """
    basis = SizeBasis(basis)
    computed = [r for r in correlations.rows if r.get("rho") is not None]
    rows = []
    if basis is SizeBasis.POST_JOIN:
        sizes = {r["discipline"]: r["n"] for r in computed}
    else:
        if dmap is None:
            raise AnalysisError("pre-join discipline sizes need a discipline map")
        sizes = {r["discipline"]: len(dmap.journals_in(r["discipline"])) for r in computed}
    rows.append({"variable": "journal_count", **_paired(computed, sizes, seed)})
    if demographics is not None:
        enrolled = {d.discipline: d.undergrad_students + d.grad_students for d in demographics}
        rows.append({"variable": "enrollment", **_paired(computed, enrolled, seed)})
    return AnalysisReport(
        ReportKind.SIZE, ("variable",) + CORRELATION_COLUMNS, tuple(rows), {"size_basis": basis.value, "seed": seed}
    )


def _paired(rows: Sequence[Mapping[str, Any]], values: Mapping[str, float], seed: int) -> dict[str, Any]:
    keep = [r for r in rows if r["discipline"] in values]
    return _correlation_cells([r["rho"] for r in keep], [values[r["discipline"]] for r in keep], seed)


def load_ratio_table(
    source: Source, source_name: str = "<ratios>"
) -> tuple[list[RatioSet], AnalysisReport | None]:
    """Read literal ratios (``discipline, student, faculty, all``).

    If the file also has ``rho, n, p_value`` columns those are returned as a
    discipline-correlation report, so a printed table can drive the
    regression on its own.
    """
    text = _read_text(source)
    ratios, corr_rows = [], []
    has_corr = None
    for lineno, row in read_tsv_rows(text, ("discipline", "student", "faculty", "all"), source_name):
        if has_corr is None:
            has_corr = all(c in row for c in ("rho", "n", "p_value"))
        vals = {
            c: (None if row[c] in ("", "-") else _number(row[c], float, c, source_name, lineno))
            for c in ("student", "faculty", "all")
        }
        ratios.append(RatioSet(row["discipline"], vals["all"], vals["student"], vals["faculty"]))
        if has_corr:
            corr_rows.append(_supplied_correlation(row, source_name, lineno))
    if not has_corr:
        return ratios, None
    return ratios, _supplied_report(corr_rows, source_name)


def load_correlation_table(source: Source, source_name: str = "<correlations>") -> AnalysisReport:
    """Read precomputed per-discipline correlations (``discipline, rho, n, p_value``)."""
    rows = [
        _supplied_correlation(row, source_name, lineno)
        for lineno, row in read_tsv_rows(_read_text(source), ("discipline", "rho", "n", "p_value"), source_name)
    ]
    return _supplied_report(rows, source_name)


def _supplied_correlation(row: Mapping[str, str], source: str, lineno: int) -> dict[str, Any]:
    try:
        rho = float(row["rho"])
    except ValueError:
        raise BadNumeric(f"rho {row['rho']!r} is not a number", source=source, line=lineno) from None
    n = _number(row["n"], int, "n", source, lineno)
    p = _number(row["p_value"], float, "p_value", source, lineno)
    if n < 3:
        raise TooFewObservations(f"{source}:{lineno}: supplied correlation with n < 3")
    return {"discipline": row["discipline"], "n": n, "rho": rho, "p_value": p, "method": None, "status": Status.OK}


def _supplied_report(rows: list[dict[str, Any]], source: str) -> AnalysisReport:
    rows.sort(key=lambda r: (r["p_value"], r["discipline"]))
    return AnalysisReport(
        ReportKind.DISCIPLINES, ("discipline",) + CORRELATION_COLUMNS, tuple(rows), {"supplied_by": source}
    )

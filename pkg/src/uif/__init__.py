"""Usage Impact Factors for journals, computed from usage-event logs and
compared against citation Impact Factors."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    AnalysisReport,
    DemographicsRecord,
    DisciplineMap,
    JournalYearRecord,
    RequestType,
    UsageEvent,
    canonical_journal_key,
    validate_event,
)
from .ingest import (  # noqa: E402
    FilterSpec,
    filter_events,
    join_with_citation,
    load_citation_table,
    parse_usage_log,
    tally_downloads,
)
from .metrics import compute_if, compute_uif, rank_journals  # noqa: E402
from .stats import ols_regression, rank_with_ties, spearman  # noqa: E402

__all__ = [
    "AnalysisReport",
    "DemographicsRecord",
    "DisciplineMap",
    "FilterSpec",
    "JournalYearRecord",
    "RequestType",
    "UsageEvent",
    "canonical_journal_key",
    "compute_if",
    "compute_uif",
    "filter_events",
    "join_with_citation",
    "load_citation_table",
    "ols_regression",
    "parse_usage_log",
    "rank_journals",
    "rank_with_ties",
    "spearman",
    "tally_downloads",
    "validate_event",
]

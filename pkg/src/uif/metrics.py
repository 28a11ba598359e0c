"""Impact factor arithmetic and display ranking."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Iterable

from .model import JournalYearRecord, MissingKeyValue, ZeroDenominator


def _ratio(numerator: int, citable_items: int, what: str) -> float:
    if numerator < 0 or citable_items < 0:
        raise ValueError(f"{what} and citable_items must be non-negative")
    if citable_items == 0:
        raise ZeroDenominator(f"no citable items; {what} ratio undefined")
    return numerator / citable_items


def compute_uif(downloads: int, citable_items: int) -> float:
    """Usage impact factor: downloads in year y of items from y-1 and y-2,
    divided by the citable-item count for those years."""
    return _ratio(downloads, citable_items, "downloads")


def compute_if(citations: int, citable_items: int) -> float:
    """Citation impact factor with the same denominator as :func:`compute_uif`.
    Usable for local citation samples."""
    return _ratio(citations, citable_items, "citations")


def attach_uif(
    records: Iterable[JournalYearRecord],
) -> tuple[list[JournalYearRecord], list[str]]:
    """Fill in ``uif_value``; journals without citable items are split off."""
    done, skipped = [], []
    for r in records:
        try:
            done.append(replace(r, uif_value=compute_uif(r.downloads, r.citable_items)))
        except ZeroDenominator:
            skipped.append(r.journal_key)
    return done, skipped


class RankKey(str, enum.Enum):
    BY_UIF = "uif"
    BY_IF = "if"

    @property
    def attr(self) -> str:
        return "uif_value" if self is RankKey.BY_UIF else "if_value"


@dataclass(frozen=True)
class RankedJournal:
    rank: int
    record: JournalYearRecord


def rank_journals(records: Iterable[JournalYearRecord], key: RankKey | str) -> list[RankedJournal]:
    """Descending competition ranking ("1, 1, 3"), ties broken by journal key
    for ordering only."""
    key = RankKey(key)
    records = list(records)
    for r in records:
        if getattr(r, key.attr) is None:
            raise MissingKeyValue(f"{r.journal_key} has no {key.attr}")
    ordered = sorted(records, key=lambda r: (-getattr(r, key.attr), r.journal_key))
    out: list[RankedJournal] = []
    for i, r in enumerate(ordered, 1):
        if out and getattr(out[-1].record, key.attr) == getattr(r, key.attr):
            rank = out[-1].rank
        else:
            rank = i
        out.append(RankedJournal(rank, r))
    return out

import pytest
from hypothesis import given, strategies as st

from uif.ingest import FilterSpec, filter_events, join_with_citation, load_citation_table, parse_usage_log, tally_downloads
from uif.metrics import RankKey, attach_uif, compute_if, compute_uif, rank_journals
from uif.model import JournalYearRecord, MissingKeyValue, ZeroDenominator


def test_compute_uif():
    assert compute_uif(0, 7) == 0.0
    assert compute_uif(10, 4) == 2.5
    with pytest.raises(ZeroDenominator):
        compute_uif(3, 0)


def test_compute_if():
    assert compute_if(0, 5) == 0.0
    assert compute_if(21, 12) == 1.75
    with pytest.raises(ZeroDenominator):
        compute_if(21, 0)


def test_uif_end_to_end_seven_over_three():
    # 7 qualifying downloads for J; 4 distractors that must be filtered out
    rows = [f"2004-0{m}-01T00:00:00Z\tu{m}\tJ\ta{m}\tFullText\t{2002 + m % 2}" for m in range(1, 8)]
    rows += [
        "2004-08-01T00:00:00Z\tu\tJ\tx\tAbstract\t2003",
        "2005-01-01T00:00:00Z\tu\tJ\tx\tFullText\t2003",
        "2004-08-01T00:00:00Z\tu\tJ\tx\tFullText\t2001",
        "2004-08-01T00:00:00Z\tu\tJ\tx\tHoldings\t2002",
    ]
    log = "timestamp\tuser_key\tjournal_key\tarticle_key\trequest_type\tpublication_year\n" + "\n".join(rows)
    events, _ = parse_usage_log(log)
    tally = tally_downloads(filter_events(events, FilterSpec(2004)))
    cit = load_citation_table("journal_key\tyear\tif_value\tcitable_items\nJ\t2004\t1.2\t3\n")
    records, skipped = attach_uif(join_with_citation(tally, cit, 2004).records)
    assert skipped == []
    assert records[0].downloads == 7
    assert records[0].uif_value == 7 / 3
    assert round(records[0].uif_value, 3) == 2.333


def test_attach_uif_splits_zero_citable():
    done, skipped = attach_uif([JournalYearRecord("A", 2004, 3, 0, 1.0), JournalYearRecord("B", 2004, 3, 2, 1.0)])
    assert [r.journal_key for r in done] == ["B"]
    assert skipped == ["A"]


@given(st.integers(0, 10_000), st.integers(1, 1000), st.integers(0, 50))
def test_uif_scaling(d, c, k):
    assert compute_uif(k * d, c) == pytest.approx(k * compute_uif(d, c), rel=1e-12)


@given(st.integers(0, 10_000), st.integers(0, 10_000), st.integers(1, 1000))
def test_uif_monotone(d1, d2, c):
    if d1 < d2:
        assert compute_uif(d1, c) < compute_uif(d2, c)


def rec(key, uif, if_value=1.0):
    return JournalYearRecord(key, 2004, int(round(uif * 1000)), 1000, if_value, int(round(uif * 1000)) / 1000)


def test_rank_printed_values():
    ranked = rank_journals([rec("C", 6.017), rec("A", 6.759), rec("B", 6.720)], RankKey.BY_UIF)
    assert [(r.rank, r.record.journal_key) for r in ranked] == [(1, "A"), (2, "B"), (3, "C")]


def test_rank_competition_ties():
    ranked = rank_journals([rec("Z", 5.0), rec("Y", 4.0), rec("A", 5.0)], "uif")
    assert [(r.rank, r.record.journal_key) for r in ranked] == [(1, "A"), (1, "Z"), (3, "Y")]


def test_rank_empty_and_missing():
    assert rank_journals([], RankKey.BY_IF) == []
    with pytest.raises(MissingKeyValue):
        rank_journals([JournalYearRecord("A", 2004, 1, 1, None, 1.0)], RankKey.BY_IF)


@given(st.lists(st.integers(0, 30), min_size=1, max_size=25))
def test_rank_is_permutation_and_transform_invariant(values):
    records = [rec(f"J{i:02d}", v / 10) for i, v in enumerate(values)]
    ranked = rank_journals(records, RankKey.BY_UIF)
    assert sorted(r.record.journal_key for r in ranked) == sorted(r.journal_key for r in records)
    # a strictly increasing transform of the key (here x -> x*2 + 1) leaves ranks alone
    transformed = [rec(r.journal_key, r.uif_value * 2 + 1) for r in records]
    again = rank_journals(transformed, RankKey.BY_UIF)
    assert [(r.rank, r.record.journal_key) for r in ranked] == [(r.rank, r.record.journal_key) for r in again]

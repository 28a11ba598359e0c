import json

import pytest

from uif.cli import main
from uif.ingest import FilterSpec, filter_events, join_with_citation, load_citation_table, parse_usage_log, tally_downloads
from uif.analysis import correlate_all
from uif.metrics import attach_uif
from uif.synth import generate


def pipeline(bundle, year=2004):
    events, stats = parse_usage_log(bundle.usage_log)
    tally = tally_downloads(filter_events(events, FilterSpec(year)))
    joined = join_with_citation(tally, load_citation_table(bundle.citations), year)
    records, _ = attach_uif(joined.records)
    return stats, tally, joined, records


def test_same_seed_same_bytes():
    a, b = generate(7, n_journals=12), generate(7, n_journals=12)
    assert (a.usage_log, a.citations, a.journal_codes, a.manifest_json()) == (
        b.usage_log, b.citations, b.journal_codes, b.manifest_json()
    )
    assert generate(8, n_journals=12).usage_log != a.usage_log


def test_manifest_tallies_round_trip():
    bundle = generate(3, n_journals=15)
    stats, tally, joined, records = pipeline(bundle)
    assert tally == bundle.manifest["tallies"]
    assert stats.events_rejected == 0
    assert dict(joined.excluded) == {"SYNTH UNCITED": "NoCitationRow", "SYNTH ZERO IF": "ZeroIF"}
    expected = bundle.manifest["expected_uif"]
    assert {r.journal_key: r.uif_value for r in records} == pytest.approx(expected, abs=0)


def test_identical_planting_gives_unit_rho():
    _, _, _, records = pipeline(generate(11, n_journals=20, planted="identical"))
    assert correlate_all(records).rho == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("planted, sign", [("negative", -1), ("positive", 1)])
def test_planted_sign_recovered(planted, sign):
    _, _, _, records = pipeline(generate(42, n_journals=50, planted=planted))
    res = correlate_all(records)
    assert res.rho * sign > 0 and res.p_value < 0.05


def test_malformed_lines_are_counted():
    bundle = generate(5, n_journals=10, malformed=4)
    stats, tally, _, _ = pipeline(bundle)
    assert bundle.manifest["malformed_lines"] == 4
    assert dict(stats.rejection_breakdown) == {"BadField": 4}
    assert tally == bundle.manifest["tallies"]


def test_too_few_journals():
    with pytest.raises(ValueError):
        generate(1, n_journals=2)


def test_cli_synth_writes_bundle(tmp_path, capsys):
    assert main(["synth", "--seed", "42", "--journals", "10", "--out", str(tmp_path)]) == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["citations.tsv", "journal_codes.tsv", "manifest.json", "usage_log.tsv"]
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seed"] == 42 and manifest["n_journals"] == 10
    assert (tmp_path / "usage_log.tsv").read_text() == generate(42, n_journals=10).usage_log

"""Seeded synthetic usage logs with a matching citation table.

Journals get a planted relationship between usage and citation impact
(negative, positive, or identical values) so that the downstream
correlation has a known sign. Every journal also receives distractor
events that the default filter must drop; the manifest records the
qualifying tallies as ground truth.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

import numpy as np

from .ingest import DEFAULT_LOG_COLUMNS, bundled_text
from .model import read_tsv_rows

SYNTH_VERSION = 1


class Planted(str, enum.Enum):
    NEGATIVE = "negative"
    POSITIVE = "positive"
    IDENTICAL = "identical"


@dataclass(frozen=True)
class SynthBundle:
    usage_log: str
    citations: str
    journal_codes: str
    manifest: dict

    def manifest_json(self) -> str:
        return json.dumps(self.manifest, indent=2, sort_keys=True) + "\n"


FULLTEXT_SPELLINGS = ("FullText", "FullText", "FullText", "download-pdf", "html")


def _timestamp(rng: np.random.Generator, year: int) -> datetime:
    start = datetime(year, 1, 1, tzinfo=timezone.utc)
    span = (datetime(year + 1, 1, 1, tzinfo=timezone.utc) - start).total_seconds()
    return start + timedelta(seconds=int(rng.integers(0, int(span))))


def generate(
    seed: int,
    n_journals: int = 50,
    planted: Planted | str = Planted.NEGATIVE,
    metric_year: int = 2004,
    history_years: int = 8,
    malformed: int = 0,
    noise: float = 0.5,
) -> SynthBundle:
    """Build a deterministic log/citation/discipline-code bundle for ``seed``.

    Two extra journals are always added outside the planted set: one with
    usage but no citation row and one whose IF is zero, so the join's side
    list is exercised.
    """
    planted = Planted(planted)
    if n_journals < 3:
        raise ValueError("need at least 3 journals")
    rng = np.random.default_rng(seed)
    window = (metric_year - 2, metric_year - 1)
    names = [f"SYNTH JOURNAL {i:03d}" for i in range(1, n_journals + 1)]
    extras = {"SYNTH UNCITED": "NoCitationRow", "SYNTH ZERO IF": "ZeroIF"}

    citable = rng.integers(5, 41, size=n_journals)
    log_uif = rng.normal(0.0, 0.6, size=n_journals)
    downloads = np.maximum(1, np.rint(np.exp(log_uif) * citable)).astype(int)
    uif = downloads / citable
    if planted is Planted.IDENTICAL:
        if_values = [float(u) for u in uif]
    else:
        sign = -1.0 if planted is Planted.NEGATIVE else 1.0
        raw = np.exp(sign * np.log(uif) + noise * rng.normal(size=n_journals))
        if_values = [max(0.001, round(float(v), 3)) for v in raw]

    users = [f"u{h:08x}" for h in rng.integers(0, 2**32, size=max(20, n_journals * 4))]
    events: list[tuple[datetime, int, list[str]]] = []
    distractors = {"Abstract": 0, "OutOfWindowPublication": 0, "OtherYear": 0, "Holdings": 0}

    def add(ts: datetime, journal: str, article: str, rtype: str, pub: int) -> None:
        user = users[int(rng.integers(0, len(users)))]
        row = [ts.strftime("%Y-%m-%dT%H:%M:%SZ"), user, journal, article, rtype, str(pub)]
        events.append((ts, len(events), row))

    tallies: dict[str, int] = {}
    all_journals = [(n, int(c), int(d)) for n, c, d in zip(names, citable, downloads)]
    all_journals += [(name, 10, int(rng.integers(3, 15))) for name in extras]
    for name, n_items, n_down in all_journals:
        tallies[name] = n_down
        articles = [f"{name.split()[-1]}-{window[i % 2]}-{i:03d}" for i in range(n_items)]
        for _ in range(n_down):
            a = int(rng.integers(0, n_items))
            rtype = FULLTEXT_SPELLINGS[int(rng.integers(0, len(FULLTEXT_SPELLINGS)))]
            add(_timestamp(rng, metric_year), name, articles[a], rtype, int(articles[a].split("-")[1]))
        for _ in range(max(1, n_down // 2)):
            kind = int(rng.integers(0, 4))
            a = articles[int(rng.integers(0, n_items))]
            pub = int(a.split("-")[1])
            if kind == 0:
                add(_timestamp(rng, metric_year), name, a, "Abstract", pub)
                distractors["Abstract"] += 1
            elif kind == 1:
                old = metric_year - 3 - int(rng.integers(0, 3))
                add(_timestamp(rng, metric_year), name, f"{name.split()[-1]}-{old}-x", "FullText", old)
                distractors["OutOfWindowPublication"] += 1
            elif kind == 2:
                add(_timestamp(rng, metric_year + 1), name, a, "FullText", pub)
                distractors["OtherYear"] += 1
            else:
                add(_timestamp(rng, metric_year), name, a, "holdings", pub)
                distractors["Holdings"] += 1

    events.sort(key=lambda e: (e[0], e[1]))
    lines = ["\t".join(DEFAULT_LOG_COLUMNS)]
    lines.append(f"# synthetic usage log seed={seed} planted={planted.value}")
    bad_at = set(rng.choice(len(events), size=min(malformed, len(events)), replace=False).tolist()) if malformed else set()
    for i, (_, _, row) in enumerate(events):
        lines.append("\t".join(row))
        if i in bad_at:
            broken = list(row)
            broken[5] = "n/a"
            lines.append("\t".join(broken))
    usage_log = "\n".join(lines) + "\n"

    cit = ["journal_key\tyear\tif_value\tcitable_items"]
    first_year = metric_year - history_years + 1
    starts = rng.integers(first_year, metric_year + 1, size=n_journals)
    # about 70% of journals are covered for the full history
    starts = np.where(rng.random(n_journals) < 0.7, first_year, starts)
    for j, name in enumerate(names):
        for year in range(first_year, metric_year + 1):
            if year < starts[j]:
                continue
            if year == metric_year:
                cit.append(f"{name}\t{year}\t{if_values[j]!r}\t{int(citable[j])}")
            else:
                drift = max(0.001, round(if_values[j] * float(np.exp(0.25 * rng.normal())), 3))
                items = int(max(1, citable[j] + rng.integers(-3, 4)))
                cit.append(f"{name}\t{year}\t{drift!r}\t{items}")
    cit.append(f"SYNTH ZERO IF\t{metric_year}\t0.0\t10")
    citations = "\n".join(cit) + "\n"

    codes = sorted({row["code"] for _, row in read_tsv_rows(bundled_text("isi_codes.tsv"), ("code",))})
    jc = ["journal_key\tcode"]
    for name, _, _ in all_journals:
        picks = rng.choice(len(codes), size=int(rng.integers(1, 3)), replace=False)
        for p in sorted(picks.tolist()):
            jc.append(f"{name}\t{codes[p]}")
    journal_codes = "\n".join(jc) + "\n"

    manifest = {
        "generator_version": SYNTH_VERSION,
        "seed": seed,
        "planted": planted.value,
        "metric_year": metric_year,
        "publication_window": list(window),
        "n_journals": n_journals,
        "tallies": dict(sorted(tallies.items())),
        "citable_items": {n: int(c) for n, c in zip(names, citable)},
        "if_values": dict(zip(names, if_values)),
        "expected_uif": {n: float(u) for n, u in zip(names, uif)},
        "expected_excluded": extras,
        "distractors": distractors,
        "malformed_lines": len(bad_at),
        "qualifying_events": int(sum(tallies.values())),
        "total_events": len(events),
    }
    return SynthBundle(usage_log, citations, journal_codes, manifest)

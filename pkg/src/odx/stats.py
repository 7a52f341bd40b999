"""Descriptive aggregations behind the explorer views.

All functions are pure over an immutable DatasetSnapshot and are safe to
call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from itertools import combinations

from .dataset import MISSING, DatasetSnapshot
from .errors import DomainError


@dataclass(frozen=True)
class TimelineQuery:
    """Filters for the deaths-over-time series.

    Empty drug/sex sets mean "no filter". The age range is inclusive.
    """

    drugs: frozenset[str] = frozenset()
    sexes: frozenset[str] = frozenset()
    age_lo: int = 0
    age_hi: int = 150
    bucket: str = "Year"  # Year | Month

    def __post_init__(self):
        object.__setattr__(self, "drugs", frozenset(d.upper() for d in self.drugs))
        object.__setattr__(self, "sexes", frozenset(self.sexes))
        if self.age_lo < 0 or self.age_lo > self.age_hi or self.age_hi > 150:
            raise DomainError(f"invalid age range [{self.age_lo}, {self.age_hi}]")
        if self.bucket not in ("Year", "Month"):
            raise DomainError(f"bucket must be Year or Month, got {self.bucket!r}")


def _matches(case, q: TimelineQuery) -> bool:
    if q.drugs and not q.drugs.intersection(case.drugs):
        return False
    if q.sexes and case.sex not in q.sexes:
        return False
    return q.age_lo <= case.age <= q.age_hi


def _bucket_start(dt, bucket: str) -> date:
    if bucket == "Year":
        return date(dt.year, 1, 1)
    return date(dt.year, dt.month, 1)


def _bucket_range(span, bucket: str) -> list[date]:
    lo, hi = span
    out = []
    if bucket == "Year":
        for y in range(lo.year, hi.year + 1):
            out.append(date(y, 1, 1))
    else:
        y, m = lo.year, lo.month
        while (y, m) <= (hi.year, hi.month):
            out.append(date(y, m, 1))
            m += 1
            if m > 12:
                y, m = y + 1, 1
    return out


def timeline(snapshot: DatasetSnapshot, q: TimelineQuery) -> list[tuple[date, int]]:
    """Case counts per bucket over the snapshot's full date span.

    Zero-count buckets are included so series are directly plottable.
    """
    span = snapshot.date_span()
    if span is None:
        return []
    counts: dict[date, int] = {b: 0 for b in _bucket_range(span, q.bucket)}
    for case in snapshot.cases:
        if _matches(case, q):
            counts[_bucket_start(case.death_datetime, q.bucket)] += 1
    return sorted(counts.items())


@dataclass(frozen=True)
class NumDrugsHistogram:
    frequencies: dict
    mean: float

    @property
    def mode(self) -> int:
        # smallest count wins ties, for determinism
        return min(self.frequencies, key=lambda k: (-self.frequencies[k], k))


def num_drugs_histogram(snapshot: DatasetSnapshot) -> NumDrugsHistogram:
    freqs: dict[int, int] = {}
    for case in snapshot.cases:
        k = len(case.drugs)
        freqs[k] = freqs.get(k, 0) + 1
    n = sum(freqs.values())
    mean = sum(k * f for k, f in freqs.items()) / n if n else float("nan")
    return NumDrugsHistogram(frequencies=dict(sorted(freqs.items())), mean=mean)


@dataclass(frozen=True)
class DrugRank:
    drug: str
    case_count: int
    cumulative_case_share: float


def top_drugs(snapshot: DatasetSnapshot, k: int) -> list[DrugRank]:
    """Top-k drugs by distinct case count, ties broken lexicographically.

    The cumulative share is case-based: |cases touching any of the top-i
    drugs| / |cases|, not a sum of per-drug counts (cases involve several
    drugs, so summed counts would overshoot).
    """
    if k < 1:
        raise DomainError("k must be >= 1")
    by_drug: dict[str, set[str]] = {}
    for case in snapshot.cases:
        for d in case.drugs:
            by_drug.setdefault(d, set()).add(case.case_id)
    ranked = sorted(by_drug.items(), key=lambda kv: (-len(kv[1]), kv[0]))[:k]
    total = len(snapshot.cases)
    out: list[DrugRank] = []
    seen: set[str] = set()
    for drug, case_ids in ranked:
        seen |= case_ids
        share = len(seen) / total if total else 0.0
        out.append(DrugRank(drug=drug, case_count=len(case_ids), cumulative_case_share=share))
    return out


@dataclass(frozen=True)
class CategoryMixing:
    """Observed within/between pair counts against independence expectations.

    Rates are observed/expected ratios; > 1 means enrichment. ``applicable``
    is False when the snapshot has no co-occurring pairs at all, in which
    case both rates are None.
    """

    within_pairs: int
    between_pairs: int
    within_rate: float | None
    between_rate: float | None
    applicable: bool


def category_mixing(snapshot: DatasetSnapshot, categories: dict[str, str]) -> CategoryMixing:
    """Classify every co-occurring drug pair as within- or between-category.

    The expectation uses category marginals over all drug mentions in the
    snapshot (singleton cases contribute mentions but no pairs): under
    independent pairing, P(within) = sum_c p_c^2.
    """
    def cat(drug: str) -> str:
        return categories.get(drug, "Other")

    mentions: dict[str, int] = {}
    within = 0
    between = 0
    total_pairs = 0
    for case in snapshot.cases:
        for d in case.drugs:
            c = cat(d)
            mentions[c] = mentions.get(c, 0) + 1
        for a, b in combinations(case.drugs, 2):
            total_pairs += 1
            if cat(a) == cat(b):
                within += 1
            else:
                between += 1

    if total_pairs == 0:
        return CategoryMixing(0, 0, None, None, applicable=False)

    m = sum(mentions.values())
    p_within = sum((v / m) ** 2 for v in mentions.values())
    exp_within = total_pairs * p_within
    exp_between = total_pairs * (1.0 - p_within)
    within_rate = within / exp_within if exp_within > 0 else None
    between_rate = between / exp_between if exp_between > 0 else None
    return CategoryMixing(within, between, within_rate, between_rate, applicable=True)


@dataclass(frozen=True)
class ZipCounts:
    counts: dict
    missing_count: int


def zip_counts(snapshot: DatasetSnapshot, which: str = "Incident") -> ZipCounts:
    if which not in ("Incident", "Residence"):
        raise DomainError(f"which must be Incident or Residence, got {which!r}")
    counts: dict[str, int] = {}
    missing = 0
    for case in snapshot.cases:
        z = case.incident_zip if which == "Incident" else case.residence_zip
        if z == MISSING:
            missing += 1
        else:
            counts[z] = counts.get(z, 0) + 1
    return ZipCounts(counts=dict(sorted(counts.items())), missing_count=missing)


def summary(snapshot: DatasetSnapshot) -> dict:
    """Headline numbers for the landing view."""
    span = snapshot.date_span()
    hist = num_drugs_histogram(snapshot)
    return {
        "case_count": snapshot.case_count,
        "patient_count": len(snapshot.patients),
        "date_span": [span[0].isoformat(), span[1].isoformat()] if span else None,
        "drug_count": len(snapshot.all_drugs()),
        "mean_drugs_per_case": hist.mean,
    }

"""Descriptive aggregation tests against hand-counted fixtures."""

from datetime import date
from fractions import Fraction

import pytest

from odx import stats
from odx.errors import DomainError
from odx.stats import TimelineQuery

from .conftest import case, snapshot_of


class TestTimeline:
    def test_three_case_fixture_yearly_counts(self, three_case_snapshot):
        series = stats.timeline(three_case_snapshot, TimelineQuery())
        assert series == [
            (date(2008, 1, 1), 2),
            (date(2009, 1, 1), 0),
            (date(2010, 1, 1), 1),
        ]

    def test_monthly_buckets_cover_span(self, three_case_snapshot):
        series = stats.timeline(three_case_snapshot, TimelineQuery(bucket="Month"))
        assert series[0][0] == date(2008, 3, 1)
        assert series[-1][0] == date(2010, 7, 1)
        assert len(series) == 29  # Mar 2008 .. Jul 2010 inclusive
        assert sum(c for _, c in series) == 3

    def test_empty_age_range_gives_zero_series(self, three_case_snapshot):
        series = stats.timeline(three_case_snapshot,
                                TimelineQuery(age_lo=90, age_hi=99))
        assert all(c == 0 for _, c in series)
        assert len(series) == 3  # span still 2008..2010

    def test_drug_filter(self, three_case_snapshot):
        series = stats.timeline(three_case_snapshot,
                                TimelineQuery(drugs={"fentanyl"}))
        assert dict(series) == {date(2008, 1, 1): 1, date(2009, 1, 1): 0,
                                date(2010, 1, 1): 1}

    def test_sex_filter(self, three_case_snapshot):
        series = stats.timeline(three_case_snapshot,
                                TimelineQuery(sexes={"Female"}))
        assert sum(c for _, c in series) == 1

    def test_unfiltered_sums_to_case_count(self, demo_small):
        snapshot = demo_small["snapshot"]
        series = stats.timeline(snapshot, TimelineQuery())
        assert sum(c for _, c in series) == snapshot.case_count

    def test_filters_compose_monotonically(self, demo_small):
        snapshot = demo_small["snapshot"]
        base = dict(stats.timeline(snapshot, TimelineQuery(drugs={"HEROIN"})))
        tighter = dict(stats.timeline(
            snapshot, TimelineQuery(drugs={"HEROIN"}, sexes={"Male"},
                                    age_lo=25, age_hi=50)))
        assert all(tighter[b] <= base[b] for b in base)

    def test_fentanyl_spike_in_demo_corpus(self, demo_small):
        # the generator reproduces the documented 2015 surge
        series = dict(stats.timeline(demo_small["snapshot"],
                                     TimelineQuery(drugs={"FENTANYL"})))
        pre = sum(series[date(y, 1, 1)] for y in range(2012, 2015))
        post = sum(series[date(y, 1, 1)] for y in range(2015, 2018))
        assert post > 2 * pre

    def test_invalid_ranges_rejected(self):
        with pytest.raises(DomainError):
            TimelineQuery(age_lo=50, age_hi=40)
        with pytest.raises(DomainError):
            TimelineQuery(age_hi=200)
        with pytest.raises(DomainError):
            TimelineQuery(bucket="Week")

    def test_empty_snapshot_empty_series(self):
        assert stats.timeline(snapshot_of(), TimelineQuery()) == []


class TestNumDrugs:
    def test_single_case(self):
        snap = snapshot_of(cases=[case(drugs=("A", "B", "C"))])
        hist = stats.num_drugs_histogram(snap)
        assert hist.frequencies == {3: 1}
        assert hist.mean == 3.0

    def test_fixture_mean(self):
        snap = snapshot_of(cases=[
            case("a", drugs=("X",)),
            case("b", drugs=("X", "Y")),
            case("c", drugs=("X", "Z")),
            case("d", drugs=("A", "B", "C", "D", "E")),
        ])
        hist = stats.num_drugs_histogram(snap)
        assert hist.frequencies == {1: 1, 2: 2, 5: 1}
        assert hist.mean == pytest.approx(2.5)
        assert hist.mode == 2

    def test_sum_of_frequencies_is_case_count(self, demo_small):
        snapshot = demo_small["snapshot"]
        hist = stats.num_drugs_histogram(snapshot)
        assert sum(hist.frequencies.values()) == snapshot.case_count


class TestTopDrugs:
    def test_every_case_heroin_share_one(self):
        snap = snapshot_of(cases=[
            case("a", drugs=("HEROIN",)),
            case("b", drugs=("HEROIN", "COCAINE")),
        ])
        top = stats.top_drugs(snap, 1)
        assert top[0].drug == "HEROIN"
        assert top[0].cumulative_case_share == 1.0

    def test_four_case_fixture_exact_ranking(self):
        snap = snapshot_of(cases=[
            case("a", drugs=("HEROIN", "COCAINE")),
            case("b", drugs=("HEROIN",)),
            case("c", drugs=("FENTANYL", "COCAINE")),
            case("d", drugs=("ETHANOL",)),
        ])
        top = stats.top_drugs(snap, 4)
        # counts: cocaine 2, heroin 2, ethanol 1, fentanyl 1; ties lexicographic
        assert [(t.drug, t.case_count) for t in top] == [
            ("COCAINE", 2), ("HEROIN", 2), ("ETHANOL", 1), ("FENTANYL", 1)]
        # case-set shares: {a,c} 0.5; +{b} 0.75; +{d} 1.0; +{} 1.0
        assert [t.cumulative_case_share for t in top] == [0.5, 0.75, 1.0, 1.0]

    def test_share_nondecreasing_and_bounded(self, demo_small):
        top = stats.top_drugs(demo_small["snapshot"], 15)
        shares = [t.cumulative_case_share for t in top]
        assert all(b >= a for a, b in zip(shares, shares[1:]))
        assert shares[-1] <= 1.0

    def test_k_must_be_positive(self, three_case_snapshot):
        with pytest.raises(DomainError):
            stats.top_drugs(three_case_snapshot, 0)


class TestCategoryMixing:
    CATS = {"HEROIN": "Opioid", "FENTANYL": "Opioid", "MORPHINE": "Opioid",
            "OXYCODONE": "Opioid", "COCAINE": "Stimulant"}

    def test_single_drug_cases_not_applicable(self):
        snap = snapshot_of(cases=[case("a", drugs=("HEROIN",)),
                                  case("b", drugs=("COCAINE",))])
        mix = stats.category_mixing(snap, self.CATS)
        assert not mix.applicable
        assert mix.within_rate is None and mix.between_rate is None

    def test_two_opioid_pairs_enriched(self):
        # mentions: 4 opioid + 1 stimulant; expected within share
        # (4/5)^2 + (1/5)^2 = 17/25, observed 2/2 -> ratio 25/17
        snap = snapshot_of(cases=[
            case("a", drugs=("HEROIN", "FENTANYL")),
            case("b", drugs=("MORPHINE", "OXYCODONE")),
            case("c", drugs=("COCAINE",)),
        ])
        mix = stats.category_mixing(snap, self.CATS)
        assert mix.within_pairs == 2 and mix.between_pairs == 0
        assert mix.within_rate == pytest.approx(float(Fraction(25, 17)), abs=1e-12)
        assert mix.between_rate == 0.0
        assert mix.within_rate > 1.0

    def test_demo_corpus_within_exceeds_between(self, demo_small):
        mix = stats.category_mixing(demo_small["snapshot"],
                                    demo_small["config"].drug_categories)
        assert mix.applicable
        assert mix.within_rate > mix.between_rate

    def test_unmapped_drugs_fall_to_other(self):
        snap = snapshot_of(cases=[case("a", drugs=("ZZZ", "QQQ"))])
        mix = stats.category_mixing(snap, self.CATS)
        assert mix.within_pairs == 1  # both Other


class TestZipCounts:
    def test_fixture_counts(self, three_case_snapshot):
        zc = stats.zip_counts(three_case_snapshot, "Incident")
        assert zc.counts == {"15090": 1, "15213": 2}
        assert zc.missing_count == 0

    def test_residence_missing_separated(self, three_case_snapshot):
        zc = stats.zip_counts(three_case_snapshot, "Residence")
        assert zc.counts == {"15090": 1, "15213": 1}
        assert zc.missing_count == 1

    def test_all_missing(self):
        snap = snapshot_of(cases=[
            case("a", incident_zip="Missing", residence_zip="Missing"),
            case("b", incident_zip="Missing", residence_zip="Missing"),
        ])
        zc = stats.zip_counts(snap, "Incident")
        assert zc.counts == {}
        assert zc.missing_count == 2

    def test_bad_selector(self, three_case_snapshot):
        with pytest.raises(DomainError):
            stats.zip_counts(three_case_snapshot, "Work")


def test_summary_consistency(three_case_snapshot):
    doc = stats.summary(three_case_snapshot)
    assert doc["case_count"] == 3
    assert doc["drug_count"] == 4  # HEROIN COCAINE FENTANYL ETHANOL
    assert doc["mean_drugs_per_case"] == pytest.approx(2.0)
    assert doc["date_span"][0].startswith("2008-03-05")

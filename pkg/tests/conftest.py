"""Shared fixtures: hand-built micro corpora and the generated demo corpus."""

from __future__ import annotations

import os
from datetime import date, datetime
from pathlib import Path

import pytest

from odx import demo
from odx.config import AnalysisConfig
from odx.dataset import (
    Condition,
    DatasetSnapshot,
    EmrPatient,
    Encounter,
    OverdoseCase,
    load_snapshot,
    make_snapshot,
)

# Real published dataset, if the analyst has dropped it in (never bundled).
REAL_DATA_ENV = "ODX_ALLEGHENY_CSV"


def real_dataset_path():
    p = os.environ.get(REAL_DATA_ENV)
    if p and Path(p).exists():
        return Path(p)
    candidate = Path(__file__).resolve().parent.parent / "data" / "allegheny_overdoses.csv"
    return candidate if candidate.exists() else None


def case(case_id="c1", when="2015-06-01 12:00", age=35, sex="Male", race="White",
         drugs=("HEROIN",), incident_zip="15213", residence_zip="15213"):
    return OverdoseCase(
        case_id=case_id,
        death_datetime=datetime.strptime(when, "%Y-%m-%d %H:%M"),
        age=age,
        sex=sex,
        race=race,
        drugs=tuple(drugs),
        incident_zip=incident_zip,
        residence_zip=residence_zip,
    )


def patient(patient_id="p1", birth="1980-06-01", sex="Male", race="White",
            marital="Single", language="English", poverty=0.2,
            encounters=(), conditions=()):
    return EmrPatient(
        patient_id=patient_id,
        birth_date=date.fromisoformat(birth),
        sex=sex,
        race=race,
        marital_status=marital,
        language=language,
        poverty_ratio=poverty,
        encounters=tuple(Encounter(date.fromisoformat(s), date.fromisoformat(e), inp)
                         for s, e, inp in encounters),
        conditions=tuple(Condition(date.fromisoformat(d), code)
                         for d, code in conditions),
    )


def snapshot_of(cases=(), patients=()) -> DatasetSnapshot:
    return make_snapshot(list(cases), list(patients))


@pytest.fixture()
def three_case_snapshot():
    """Hand-countable micro snapshot used across the stats tests."""
    return snapshot_of(cases=[
        case("a", "2008-03-05 10:00", 20, "Male", "White",
             ("HEROIN", "COCAINE"), "15213", "15090"),
        case("b", "2008-11-20 02:30", 45, "Female", "Black",
             ("FENTANYL",), "15213", "15213"),
        case("c", "2010-07-07 23:00", 60, "Male", "White",
             ("HEROIN", "FENTANYL", "ETHANOL"), "15090", "Missing"),
    ])


@pytest.fixture(scope="session")
def demo_small(tmp_path_factory):
    """Small generated corpus: paths plus a loaded snapshot."""
    root = tmp_path_factory.mktemp("demo_small")
    demo.write_corpus(root, seed=7, n_cases=300, n_patients=1500)
    config = AnalysisConfig()
    snapshot, case_report, emr_report = load_snapshot(
        root / "cases.csv", root / "emr", config)
    return {
        "root": root,
        "cases_csv": root / "cases.csv",
        "emr_dir": root / "emr",
        "snapshot": snapshot,
        "case_report": case_report,
        "emr_report": emr_report,
        "config": config,
    }


@pytest.fixture(scope="session")
def demo_full(tmp_path_factory):
    """Full-size generated corpus for the acceptance gate."""
    root = tmp_path_factory.mktemp("demo_full")
    demo.write_corpus(root, seed=7, n_cases=1100, n_patients=6000)
    config = AnalysisConfig()
    snapshot, _, _ = load_snapshot(root / "cases.csv", root / "emr", config)
    return {
        "root": root,
        "cases_csv": root / "cases.csv",
        "emr_dir": root / "emr",
        "snapshot": snapshot,
        "config": config,
    }

"""Seeded synthetic demo corpus.

The real autopsy export and a Synthea EMR dump are external inputs; this
module fabricates structurally faithful stand-ins so the full pipeline
(ingest, explore, match, train, predict) runs out of the box. The
generated population is labeled synthetic everywhere; none of the
published-dataset figures are asserted against it.

Shape choices mirror the real data's texture: overdose deaths cluster in
working-age adults and later years (with the fentanyl surge from 2015),
2 drugs per case is the mode, drug mixing stays mostly within category,
and the EMR population spans all ages with age-correlated utilization.
"""

from __future__ import annotations

import csv
from datetime import date, datetime, timedelta
from pathlib import Path

import numpy as np

from .config import AnalysisConfig

YEARS = list(range(2008, 2018))
YEAR_WEIGHTS = [0.055, 0.06, 0.065, 0.07, 0.075, 0.085, 0.095, 0.115, 0.155, 0.225]

# (name, category, weight); fentanyl weight is year-dependent
DRUGS = [
    ("HEROIN", "Opioid", 0.28),
    ("FENTANYL", "Opioid", 0.30),
    ("COCAINE", "Stimulant", 0.20),
    ("ALPRAZOLAM", "Depressant", 0.12),
    ("ETHANOL", "Depressant", 0.10),
    ("MORPHINE", "Opioid", 0.08),
    ("OXYCODONE", "Opioid", 0.07),
    ("METHADONE", "Opioid", 0.05),
    ("DIPHENHYDRAMINE", "Other", 0.04),
    ("METHAMPHETAMINE", "Stimulant", 0.03),
    ("GABAPENTIN", "Other", 0.03),
    ("CLONAZEPAM", "Depressant", 0.025),
    ("DIAZEPAM", "Depressant", 0.02),
    ("TRAMADOL", "Opioid", 0.02),
    ("AMPHETAMINE", "Stimulant", 0.015),
    ("HYDROCODONE", "Opioid", 0.015),
    ("ACETAMINOPHEN", "Other", 0.01),
    ("QUETIAPINE", "Other", 0.01),
    ("CITALOPRAM", "Other", 0.008),
    ("NALOXONE", "Other", 0.005),
]

NUM_DRUGS_DIST = {1: 0.21, 2: 0.34, 3: 0.25, 4: 0.12, 5: 0.05, 6: 0.02, 7: 0.01}

CASE_RACES = [
    ("White", 0.80), ("Black", 0.13), ("Hispanic", 0.02), ("Asian", 0.01),
    ("MiddleEastern", 0.005), ("Indian", 0.005), ("Other", 0.015),
    ("Unidentified", 0.015),
]

POOL_RACES = [("White", 0.68), ("Black", 0.20), ("Asian", 0.08), ("Other", 0.04)]

ZIPS = ["15201", "15210", "15212", "15213", "15216", "15219", "15221",
        "15224", "15233", "15090", "15068", "15025", "15146", "15132"]
ZIP_WEIGHTS = [0.14, 0.12, 0.11, 0.10, 0.08, 0.10, 0.08, 0.07, 0.05, 0.04,
               0.04, 0.03, 0.02, 0.02]

# ICD-10 snippets across chapters, weighted by life stage
CONDITIONS_YOUNG = ["J06.9", "H66.9", "Q21.1", "P07.3", "L20.9", "A09", "B34.9", "S93.4"]
CONDITIONS_ADULT = ["F32.9", "F10.2", "M54.5", "K21.0", "J45.9", "R51", "N39.0", "G43.9", "Z23"]
CONDITIONS_OLD = ["I10", "I25.1", "E11.9", "C44.9", "M17.1", "H25.9", "D50.9", "E78.5"]

LANGUAGES_DIST = [("English", 0.88), ("Spanish", 0.07), ("Icelandic", 0.02), ("Other", 0.03)]


def _pick(rng, pairs):
    names = [p[0] for p in pairs]
    w = np.array([p[1] for p in pairs], dtype=float)
    return names[rng.choice(len(names), p=w / w.sum())]


def _drug_weights(year: int) -> np.ndarray:
    w = np.array([d[2] for d in DRUGS], dtype=float)
    fent = [i for i, d in enumerate(DRUGS) if d[0] == "FENTANYL"][0]
    w[fent] *= 1.7 if year >= 2015 else 0.25
    return w


def _sample_drugs(rng, year: int) -> list[str]:
    k = int(rng.choice(list(NUM_DRUGS_DIST), p=list(NUM_DRUGS_DIST.values())))
    w = _drug_weights(year)
    first = int(rng.choice(len(DRUGS), p=w / w.sum()))
    chosen = [first]
    cat = DRUGS[first][1]
    while len(chosen) < k:
        # mixing skews within-category
        if rng.random() < 0.68:
            idx = [i for i, d in enumerate(DRUGS) if d[1] == cat and i not in chosen]
        else:
            idx = [i for i in range(len(DRUGS)) if i not in chosen]
        if not idx:
            break
        ww = w[idx]
        chosen.append(int(np.array(idx)[rng.choice(len(idx), p=ww / ww.sum())]))
    return [DRUGS[i][0] for i in chosen]


def generate_cases(rng, n_cases: int) -> list[dict]:
    rows = []
    for i in range(n_cases):
        year = int(rng.choice(YEARS, p=YEAR_WEIGHTS))
        day = int(rng.integers(0, 365))
        dt = datetime(year, 1, 1) + timedelta(days=day, hours=int(rng.integers(0, 24)),
                                              minutes=int(rng.integers(0, 60)))
        age = int(np.clip(round(rng.normal(35, 10)), 18, 64))
        sex = "Male" if rng.random() < 0.72 else "Female"
        if rng.random() < 0.01:
            sex = ""  # recorded blank; loader maps to Missing
        race = _pick(rng, CASE_RACES)
        zip_i = _pick(rng, list(zip(ZIPS, ZIP_WEIGHTS)))
        zip_r = _pick(rng, list(zip(ZIPS, ZIP_WEIGHTS)))
        if rng.random() < 0.01:
            zip_i = zip_i[:4]  # known defect in the source data
        drugs = _sample_drugs(rng, year)
        rows.append({
            "_id": str(i + 1),
            "death_date_and_time": dt.strftime("%Y-%m-%d %H:%M:%S"),
            "age": str(age),
            "sex": sex,
            "race": race,
            "incident_zip": zip_i,
            "residence_zip": zip_r,
            "drugs": drugs,
        })
    return rows


def generate_patients(rng, n_patients: int) -> list[dict]:
    out = []
    for i in range(n_patients):
        u = rng.random()
        if u < 0.20:
            age = int(rng.integers(0, 18))
        elif u < 0.72:
            age = int(rng.integers(18, 71))
        else:
            age = int(rng.integers(71, 96))
        birth = date(2017, 12, 31) - timedelta(days=age * 365 + int(rng.integers(0, 365)))
        sex = "M" if rng.random() < 0.49 else "F"
        race = _pick(rng, POOL_RACES)
        if age < 22:
            marital = "S" if rng.random() < 0.97 else "M"
        elif age < 40:
            marital = _pick(rng, [("S", 0.45), ("M", 0.45), ("D", 0.08), ("W", 0.02)])
        elif age < 65:
            marital = _pick(rng, [("S", 0.15), ("M", 0.55), ("D", 0.20), ("W", 0.10)])
        else:
            marital = _pick(rng, [("S", 0.08), ("M", 0.45), ("D", 0.12), ("W", 0.35)])
        language = _pick(rng, LANGUAGES_DIST)
        poverty = float(np.clip(rng.beta(2.0, 5.0), 0.0, 1.0))

        n_enc = int(rng.poisson(0.6 + age / 18.0))
        encounters = []
        for _ in range(n_enc):
            start_offset = int(rng.integers(0, max((date(2017, 12, 31) - birth).days - 400, 400)))
            start = birth + timedelta(days=365 + start_offset)
            if start > date(2017, 12, 1):
                start = date(2017, 12, 1)
            inpatient = rng.random() < (0.12 + age / 500.0)
            stay = int(rng.integers(1, 15)) if inpatient else 0
            encounters.append((start, start + timedelta(days=stay), inpatient))

        n_cond = int(rng.poisson(0.8 + age / 22.0))
        if age < 18:
            codes_pool = CONDITIONS_YOUNG + CONDITIONS_ADULT[:2]
        elif age < 60:
            codes_pool = CONDITIONS_ADULT + CONDITIONS_YOUNG[:2] + CONDITIONS_OLD[:2]
        else:
            codes_pool = CONDITIONS_OLD + CONDITIONS_ADULT[:4]
        conditions = []
        for _ in range(n_cond):
            onset_offset = int(rng.integers(365, max((date(2017, 12, 31) - birth).days, 366)))
            onset = min(birth + timedelta(days=onset_offset), date(2017, 12, 31))
            conditions.append((onset, codes_pool[int(rng.integers(0, len(codes_pool)))]))

        out.append({
            "Id": f"p{i + 1:05d}",
            "BIRTHDATE": birth.isoformat(),
            "GENDER": sex,
            "RACE": race.lower(),
            "MARITAL": marital,
            "LANGUAGE": language,
            "POVERTY_RATIO": f"{poverty:.4f}",
            "encounters": encounters,
            "conditions": conditions,
        })
    return out


def write_corpus(out_dir, seed: int = 7, n_cases: int = 1100,
                 n_patients: int = 6000) -> dict:
    """Write cases.csv and emr/{patients,encounters,conditions}.csv.

    Returns a small manifest with the sizes written.
    """
    out_dir = Path(out_dir)
    emr_dir = out_dir / "emr"
    emr_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    config = AnalysisConfig()

    cases = generate_cases(rng, n_cases)
    schema = config.case_schema
    drug_cols = schema["drugs"]
    with open(out_dir / "cases.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([schema["case_id"], schema["death_datetime"], schema["age"],
                         schema["sex"], schema["race"], schema["incident_zip"],
                         schema["residence_zip"], *drug_cols])
        for c in cases:
            drugs = c["drugs"][:len(drug_cols)]
            drugs += [""] * (len(drug_cols) - len(drugs))
            writer.writerow([c["_id"], c["death_date_and_time"], c["age"], c["sex"],
                             c["race"], c["incident_zip"], c["residence_zip"], *drugs])

    patients = generate_patients(rng, n_patients)
    pat_schema = config.emr_schema["patients"]
    with open(emr_dir / "patients.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(pat_schema.values()))
        for p in patients:
            writer.writerow([p["Id"], p["BIRTHDATE"], p["GENDER"], p["RACE"],
                             p["MARITAL"], p["LANGUAGE"], p["POVERTY_RATIO"]])
    enc_schema = config.emr_schema["encounters"]
    n_enc = 0
    with open(emr_dir / "encounters.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(enc_schema.values()))
        for p in patients:
            for start, end, inpatient in p["encounters"]:
                writer.writerow([p["Id"], start.isoformat(), end.isoformat(),
                                 "inpatient" if inpatient else "ambulatory"])
                n_enc += 1
    cond_schema = config.emr_schema["conditions"]
    n_cond = 0
    with open(emr_dir / "conditions.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(cond_schema.values()))
        for p in patients:
            for onset, code in p["conditions"]:
                writer.writerow([p["Id"], onset.isoformat(), code])
                n_cond += 1

    return {
        "cases": len(cases),
        "patients": len(patients),
        "encounters": n_enc,
        "conditions": n_cond,
        "seed": seed,
    }

"""Matched case-control cohort construction and EMR feature extraction.

Each overdose case is matched to one synthetic patient whose record then
supplies the case's EMR-derived features (the case itself has none). The
control arm is an equally sized random sample of the never-matched
remainder of the patient pool, i.e. the general synthetic population. The
two arms therefore differ demographically (overdose victims vs everyone),
which is exactly the separation the downstream classifiers pick up.

Matching rule, per case:
  * sex must match exactly; cases with missing sex are dropped,
  * race in the exact-match set (default White/Black/Asian) must match
    exactly; cases recorded as Other/Unidentified first draw a replacement
    race from the remaining pool's empirical distribution and then match
    exactly on it; remaining races are unconstrained,
  * age must agree within ``age_window`` years,
  * the selected patient leaves the pool (no duplicates).

Draw protocol (replayable by an independent implementation):
  1. rng = Xoshiro256** seeded with ``params.seed``.
  2. Shuffle the case index list with rng.shuffle (Fisher-Yates).
  3. Per case, in shuffled order:
     a. sex == Missing: drop "missing_sex", no draws;
     b. race Other/Unidentified: if the pool is empty drop "no_candidate",
        else one rng.randbelow(len(pool)) draw picks the patient whose race
        becomes the case's effective race;
     c. build the eligible list in pool order; if empty drop "no_candidate",
        else one rng.randbelow(len(eligible)) draw selects the match, which
        is removed from the pool;
  4. Controls: m = min(matched, remaining pool); if m < matched the excess
     matched cases (latest first in processing order) are dropped with
     "control_pool_exhausted"; the control rows are the pool items at
     rng.sample_indices(len(pool), m).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import date

import numpy as np

from .config import (
    CATCH_ALL_BIN,
    NUM_DISEASE_BINS,
    AnalysisConfig,
    MatchParams,
)
from .dataset import (
    LANGUAGES,
    MARITAL_STATUSES,
    MISSING,
    RACES,
    SEXES,
    EmrPatient,
    OverdoseCase,
    _ICD10_RE,
)
from .errors import DataError, DomainError
from .rng import Xoshiro256StarStar

LABEL_OVERDOSE = "Overdose"
LABEL_CONTROL = "Control"

RANDOM_RACE_DRAW = frozenset({"Other", "Unidentified"})


def age_at(birth_date: date, reference_date: date) -> int:
    """Age in whole years at the reference date."""
    years = reference_date.year - birth_date.year
    if (reference_date.month, reference_date.day) < (birth_date.month, birth_date.day):
        years -= 1
    return years


def sickliness(patient: EmrPatient, reference_date: date,
               annual_discount: float) -> float:
    """Time-discounted inpatient days before the reference date.

    Each inpatient stay contributes (end - start) days, floored at one day
    for same-day admissions, discounted by ``annual_discount`` per
    fractional year (days / 365.25) between the stay's end and the
    reference date. Encounters ending after the reference date are out of
    scope and ignored.
    """
    if not 0.0 < annual_discount <= 1.0:
        raise DomainError("annual_discount must be in (0, 1]")
    total = 0.0
    for enc in patient.encounters:
        if not enc.inpatient or enc.end_date > reference_date:
            continue
        stay_days = max((enc.end_date - enc.start_date).days, 1)
        years_before = (reference_date - enc.end_date).days / 365.25
        total += stay_days * annual_discount ** years_before
    return total


def disease_counts(patient: EmrPatient, icd10_bins: dict[str, int],
                   catch_all_bin: int = CATCH_ALL_BIN):
    """Condition counts over the 20 ICD-10 letter bins.

    Returns (counts, unmapped, malformed): unmapped prefixes land in the
    catch-all bin and are tallied, malformed codes are tallied but never
    binned.
    """
    counts = [0] * NUM_DISEASE_BINS
    unmapped = 0
    malformed = 0
    for cond in patient.conditions:
        code = cond.icd10_code
        if not _ICD10_RE.match(code):
            malformed += 1
            continue
        letter = code[0].upper()
        bin_idx = icd10_bins.get(letter)
        if bin_idx is None:
            counts[catch_all_bin] += 1
            unmapped += 1
        else:
            counts[bin_idx] += 1
    return counts, unmapped, malformed


@dataclass(frozen=True)
class FeatureVector:
    age: int
    sex: str
    race: str
    marital_status: str
    poverty_ratio: float
    language: str
    sickliness: float
    disease_counts: tuple[int, ...]
    label: str
    source_id: str  # case_id for overdose rows, patient_id for controls

    def __post_init__(self):
        if len(self.disease_counts) != NUM_DISEASE_BINS:
            raise DomainError("disease_counts must have exactly 20 bins")
        if self.sickliness < 0:
            raise DomainError("sickliness must be nonnegative")


@dataclass(frozen=True)
class MatchedPair:
    case: OverdoseCase
    donor: EmrPatient
    effective_race: str


@dataclass
class CohortMatrix:
    rows: list[FeatureVector]
    n_o: int
    n_c: int
    d: int
    d_prime: int | None
    dropped_cases: list[tuple[str, str]]
    pairs: list[MatchedPair]
    control_ids: list[str]
    reference_date: date
    seed: int
    columns: list[str] | None = None
    X: np.ndarray | None = None
    y: np.ndarray | None = None


def _eligible(case_sex: str, case_age: int, required_race: str | None,
              pool: list[EmrPatient], ages: dict[str, int], window: int) -> list[int]:
    out = []
    for i, p in enumerate(pool):
        if p.sex != case_sex:
            continue
        if required_race is not None and p.race != required_race:
            continue
        if abs(case_age - ages[p.patient_id]) > window:
            continue
        out.append(i)
    return out


def match_cohort(cases: list[OverdoseCase], patients: list[EmrPatient],
                 params: MatchParams, config: AnalysisConfig | None = None,
                 reference_date: date | None = None) -> CohortMatrix:
    """Build the matched cohort; deterministic given (cases, patients, seed).

    See the module docstring for the exact protocol. Raises DataError when
    the patient pool is empty.
    """
    config = config or AnalysisConfig()
    if not patients:
        raise DataError("empty patient pool")
    if reference_date is None:
        if not cases:
            raise DataError("no cases; pass reference_date explicitly")
        reference_date = max(c.death_datetime for c in cases).date()

    ages = {p.patient_id: age_at(p.birth_date, reference_date) for p in patients}
    pool = list(patients)
    rng = Xoshiro256StarStar(params.seed)

    order = list(range(len(cases)))
    rng.shuffle(order)

    dropped: list[tuple[str, str]] = []
    pairs: list[MatchedPair] = []
    for idx in order:
        case = cases[idx]
        if case.sex == MISSING:
            dropped.append((case.case_id, "missing_sex"))
            continue
        effective_race = case.race
        required: str | None = None
        if case.race in params.exact_race_set:
            required = case.race
        elif case.race in RANDOM_RACE_DRAW:
            if not pool:
                dropped.append((case.case_id, "no_candidate"))
                continue
            effective_race = pool[rng.randbelow(len(pool))].race
            required = effective_race
        eligible = _eligible(case.sex, case.age, required, pool, ages, params.age_window)
        if not eligible:
            dropped.append((case.case_id, "no_candidate"))
            continue
        pick_idx = eligible[rng.randbelow(len(eligible))]
        pick = pool.pop(pick_idx)
        pairs.append(MatchedPair(case=case, donor=pick, effective_race=effective_race))

    m = min(len(pairs), len(pool))
    if m < len(pairs):
        for pair in pairs[m:]:
            dropped.append((pair.case.case_id, "control_pool_exhausted"))
        pairs = pairs[:m]
    control_idx = rng.sample_indices(len(pool), m)
    controls = [pool[i] for i in control_idx]

    rows: list[FeatureVector] = []
    for pair in pairs:
        donor = pair.donor
        dcounts, _, _ = disease_counts(donor, config.icd10_bins, config.catch_all_bin)
        rows.append(FeatureVector(
            age=pair.case.age,
            sex=pair.case.sex,
            race=pair.effective_race,
            marital_status=donor.marital_status,
            poverty_ratio=donor.poverty_ratio,
            language=donor.language,
            sickliness=sickliness(donor, reference_date, config.annual_discount),
            disease_counts=tuple(dcounts),
            label=LABEL_OVERDOSE,
            source_id=pair.case.case_id,
        ))
    for p in controls:
        dcounts, _, _ = disease_counts(p, config.icd10_bins, config.catch_all_bin)
        rows.append(FeatureVector(
            age=ages[p.patient_id],
            sex=p.sex,
            race=p.race,
            marital_status=p.marital_status,
            poverty_ratio=p.poverty_ratio,
            language=p.language,
            sickliness=sickliness(p, reference_date, config.annual_discount),
            disease_counts=tuple(dcounts),
            label=LABEL_CONTROL,
            source_id=p.patient_id,
        ))

    return CohortMatrix(
        rows=rows,
        n_o=len(pairs),
        n_c=len(controls),
        d=3,
        d_prime=None,
        dropped_cases=dropped,
        pairs=pairs,
        control_ids=[p.patient_id for p in controls],
        reference_date=reference_date,
        seed=params.seed,
    )


# Encoding: one-hot expansion with the reference level dropped. Levels use
# the canonical enum orders; the reference is the first observed level.
_CATEGORICAL_ORDERS = {
    "sex": SEXES,
    "race": RACES,
    "marital_status": MARITAL_STATUSES,
    "language": LANGUAGES,
}


def _observed_levels(rows: list[FeatureVector], attr: str) -> list[str]:
    seen = {getattr(r, attr) for r in rows}
    return [lv for lv in _CATEGORICAL_ORDERS[attr] if lv in seen]


def build_matrix(cohort: CohortMatrix) -> CohortMatrix:
    """Encode the cohort into a numeric design.

    Column order: age, then sex/race/marital_status/language indicators
    (reference level dropped, canonical level order), then poverty_ratio,
    sickliness, and the 20 disease bins.
    """
    rows = cohort.rows
    if not rows:
        raise DomainError("cohort is empty")

    columns: list[str] = ["age"]
    encoders: list[tuple[str, str]] = []  # (attr, level)
    for attr in ("sex", "race", "marital_status", "language"):
        levels = _observed_levels(rows, attr)
        for lv in levels[1:]:
            columns.append(f"{attr}={lv}")
            encoders.append((attr, lv))
    columns += ["poverty_ratio", "sickliness"]
    columns += [f"disease_{i:02d}" for i in range(NUM_DISEASE_BINS)]

    X = np.zeros((len(rows), len(columns)))
    y = np.zeros(len(rows), dtype=int)
    for i, r in enumerate(rows):
        j = 0
        X[i, j] = float(r.age)
        j += 1
        for attr, lv in encoders:
            X[i, j] = 1.0 if getattr(r, attr) == lv else 0.0
            j += 1
        X[i, j] = r.poverty_ratio
        X[i, j + 1] = r.sickliness
        X[i, j + 2:j + 2 + NUM_DISEASE_BINS] = r.disease_counts
        y[i] = 1 if r.label == LABEL_OVERDOSE else 0

    return CohortMatrix(
        rows=rows,
        n_o=cohort.n_o,
        n_c=cohort.n_c,
        d=cohort.d,
        d_prime=len(columns),
        dropped_cases=cohort.dropped_cases,
        pairs=cohort.pairs,
        control_ids=cohort.control_ids,
        reference_date=cohort.reference_date,
        seed=cohort.seed,
        columns=columns,
        X=X,
        y=y,
    )


def export_matrix_csv(cohort: CohortMatrix, path) -> None:
    """Write the encoded design as delimited text, one named column each."""
    if cohort.X is None:
        raise DomainError("cohort not encoded; call build_matrix first")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source_id", *cohort.columns, "label"])
        for i, row in enumerate(cohort.rows):
            writer.writerow([
                row.source_id,
                *[repr(v) for v in cohort.X[i].tolist()],
                row.label,
            ])

"""Parse and validate the autopsy CSV and the synthetic-EMR export.

Loading is strict about what it accepts and explicit about what it drops:
every rejected row lands in the rejection report with a reason code, and
accepted + rejected always equals the raw row count. The resulting
DatasetSnapshot is immutable; downstream modules treat it as read-only.
"""

from __future__ import annotations

import csv
import os
import re
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path

from .config import AnalysisConfig
from .errors import ConfigurationError, DataError, NormalizationError

SEXES = ("Male", "Female", "Missing")
RACES = (
    "White",
    "Black",
    "Hispanic",
    "Asian",
    "MiddleEastern",
    "Indian",
    "Other",
    "Unidentified",
    "Missing",
)
MARITAL_STATUSES = ("Single", "Married", "Divorced", "Widowed", "Missing")
LANGUAGES = ("English", "Icelandic", "Spanish", "Other")

MISSING = "Missing"

_RACE_SYNONYMS = {
    "white": "White",
    "caucasian": "White",
    "black": "Black",
    "african american": "Black",
    "hispanic": "Hispanic",
    "asian": "Asian",
    "middle eastern": "MiddleEastern",
    "middleeastern": "MiddleEastern",
    "indian": "Indian",
    "native": "Other",
    "other": "Other",
    "unidentified": "Unidentified",
    "unknown": "Unidentified",
}

_MARITAL_SYNONYMS = {
    "s": "Single",
    "single": "Single",
    "never married": "Single",
    "m": "Married",
    "married": "Married",
    "d": "Divorced",
    "divorced": "Divorced",
    "w": "Widowed",
    "widowed": "Widowed",
}

_ZIP_RE = re.compile(r"^\d{5}$")
_ICD10_RE = re.compile(r"^[A-Za-z]\d+(?:\.\d+)?$")

_DATETIME_FORMATS = (
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M",
    "%m/%d/%Y %H:%M",
    "%m/%d/%Y %I:%M %p",
    "%m/%d/%Y",
    "%Y-%m-%d",
)


@dataclass(frozen=True)
class OverdoseCase:
    """One autopsy record."""

    case_id: str
    death_datetime: datetime
    age: int
    sex: str
    race: str
    drugs: tuple[str, ...]
    incident_zip: str  # 5-digit string or "Missing"
    residence_zip: str

    def __post_init__(self):
        if not 1 <= len(self.drugs) <= 7:
            raise DataError(f"case {self.case_id}: needs 1..7 drugs, got {len(self.drugs)}")
        if self.age < 0:
            raise DataError(f"case {self.case_id}: negative age")
        for z in (self.incident_zip, self.residence_zip):
            if z != MISSING and not _ZIP_RE.match(z):
                raise DataError(f"case {self.case_id}: malformed zip {z!r}")


@dataclass(frozen=True)
class Encounter:
    start_date: date
    end_date: date
    inpatient: bool


@dataclass(frozen=True)
class Condition:
    onset_date: date
    icd10_code: str


@dataclass(frozen=True)
class EmrPatient:
    """One synthetic-EMR subject with joined history."""

    patient_id: str
    birth_date: date
    sex: str
    race: str
    marital_status: str
    language: str
    poverty_ratio: float
    encounters: tuple[Encounter, ...]
    conditions: tuple[Condition, ...]


@dataclass(frozen=True)
class RejectionReport:
    """Per-load accounting of dropped rows and soft flags."""

    total_rows: int
    accepted: int
    rejections: tuple[tuple[str, str], ...]  # (row id or index, reason code)
    flags: tuple[tuple[str, str], ...]       # (row id, flag code), row still accepted
    warnings: tuple[str, ...] = ()

    @property
    def rejected(self) -> int:
        return len(self.rejections)

    def reasons(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for _, reason in self.rejections:
            out[reason] = out.get(reason, 0) + 1
        return out


@dataclass(frozen=True)
class DatasetSnapshot:
    cases: tuple[OverdoseCase, ...]
    patients: tuple[EmrPatient, ...]
    source_manifest: tuple[tuple[str, int, int], ...]  # (file, rows, rejected)
    load_timestamp: datetime

    @property
    def case_count(self) -> int:
        return len(self.cases)

    def date_span(self) -> tuple[datetime, datetime] | None:
        if not self.cases:
            return None
        times = [c.death_datetime for c in self.cases]
        return min(times), max(times)

    def all_drugs(self) -> set[str]:
        out: set[str] = set()
        for c in self.cases:
            out.update(c.drugs)
        return out


def normalize_drug_name(raw: str, aliases: dict[str, str] | None = None) -> str:
    """Trim, uppercase, collapse internal whitespace, then apply aliases."""
    name = " ".join(raw.split()).upper()
    if not name:
        raise NormalizationError(f"drug name empty after trimming: {raw!r}")
    if aliases:
        name = aliases.get(name, name)
    return name


def normalize_sex(raw: str) -> str:
    s = raw.strip().lower()
    if s in ("male", "m"):
        return "Male"
    if s in ("female", "f"):
        return "Female"
    return MISSING


def normalize_race(raw: str):
    """Returns (race, warned): unmapped nonempty strings fall to Other."""
    s = " ".join(raw.split()).lower()
    if not s:
        return MISSING, False
    mapped = _RACE_SYNONYMS.get(s)
    if mapped is not None:
        return mapped, False
    return "Other", True


def _parse_zip(raw: str):
    """Returns (zip_or_missing, flagged). 4-digit and other malformed
    nonempty values are kept as Missing with a flag, never padded."""
    s = raw.strip()
    if not s:
        return MISSING, False
    if _ZIP_RE.match(s):
        return s, False
    return MISSING, True


def _parse_datetime(raw: str):
    s = raw.strip()
    for fmt in _DATETIME_FORMATS:
        try:
            return datetime.strptime(s, fmt)
        except ValueError:
            continue
    return None


def _parse_date(raw: str):
    dt = _parse_datetime(raw)
    return dt.date() if dt else None


def _open_csv(path):
    if not os.path.exists(path):
        raise DataError(f"file not found: {path}")
    try:
        fh = open(path, "r", encoding="utf-8-sig", newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return fh


def _require_columns(header, wanted, where):
    missing = [c for c in wanted if c not in header]
    if missing:
        raise ConfigurationError(f"{where}: missing mandatory column(s) {missing}")


def load_cases(path, config: AnalysisConfig | None = None):
    """Load the autopsy CSV into OverdoseCase records.

    Returns (cases, RejectionReport). Row order is preserved; rows failing
    a hard invariant are rejected with a reason code, soft defects (bad
    zips) are flagged but kept.
    """
    config = config or AnalysisConfig()
    schema = config.case_schema
    drug_cols = schema["drugs"]
    scalar_fields = ["case_id", "death_datetime", "age", "sex", "race",
                     "incident_zip", "residence_zip"]

    cases: list[OverdoseCase] = []
    rejections: list[tuple[str, str]] = []
    flags: list[tuple[str, str]] = []
    warnings: list[str] = []
    total = 0

    with _open_csv(path) as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: no header row")
        _require_columns(reader.fieldnames, [schema[f] for f in scalar_fields], str(path))
        _require_columns(reader.fieldnames, drug_cols, str(path))

        for i, row in enumerate(reader):
            total += 1
            rid = (row.get(schema["case_id"]) or "").strip() or f"row{i}"

            age_raw = (row.get(schema["age"]) or "").strip()
            try:
                age = int(age_raw)
                if age < 0:
                    raise ValueError
            except ValueError:
                rejections.append((rid, "bad_age"))
                continue

            dt = _parse_datetime(row.get(schema["death_datetime"]) or "")
            if dt is None:
                rejections.append((rid, "bad_datetime"))
                continue

            drugs: list[str] = []
            for col in drug_cols:
                raw = (row.get(col) or "").strip()
                if not raw:
                    continue
                name = normalize_drug_name(raw, config.drug_aliases)
                if name not in drugs:
                    drugs.append(name)
            if not drugs:
                rejections.append((rid, "no_drugs"))
                continue

            race, warned = normalize_race(row.get(schema["race"]) or "")
            if warned:
                warnings.append(f"case {rid}: unknown race {row.get(schema['race'])!r} mapped to Other")

            izip, iflag = _parse_zip(row.get(schema["incident_zip"]) or "")
            rzip, rflag = _parse_zip(row.get(schema["residence_zip"]) or "")
            if iflag or rflag:
                flags.append((rid, "bad_zip"))

            cases.append(OverdoseCase(
                case_id=rid,
                death_datetime=dt,
                age=age,
                sex=normalize_sex(row.get(schema["sex"]) or ""),
                race=race,
                drugs=tuple(drugs),
                incident_zip=izip,
                residence_zip=rzip,
            ))

    report = RejectionReport(
        total_rows=total,
        accepted=len(cases),
        rejections=tuple(rejections),
        flags=tuple(flags),
        warnings=tuple(warnings),
    )
    return cases, report


def load_emr(directory, config: AnalysisConfig | None = None):
    """Load a Synthea-style EMR export (patients, encounters, conditions).

    Encounters and conditions are joined to patients by id; orphans and
    rows violating the date invariants are rejected with reason codes.
    """
    config = config or AnalysisConfig()
    schema = config.emr_schema
    directory = Path(directory)

    paths = {name: directory / f"{name}.csv" for name in ("patients", "encounters", "conditions")}
    for name, p in paths.items():
        if not p.exists():
            raise ConfigurationError(f"EMR directory {directory}: missing table {name}.csv")

    rejections: list[tuple[str, str]] = []
    warnings: list[str] = []
    total = 0

    pat_schema = schema["patients"]
    patients_raw: dict[str, dict] = {}
    order: list[str] = []
    with _open_csv(paths["patients"]) as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames or [], list(pat_schema.values()), "patients.csv")
        for i, row in enumerate(reader):
            total += 1
            pid = (row.get(pat_schema["patient_id"]) or "").strip() or f"patient{i}"
            birth = _parse_date(row.get(pat_schema["birth_date"]) or "")
            if birth is None:
                rejections.append((pid, "bad_birth_date"))
                continue
            try:
                poverty = float((row.get(pat_schema["poverty_ratio"]) or "").strip())
            except ValueError:
                rejections.append((pid, "bad_poverty_ratio"))
                continue
            if not 0.0 <= poverty <= 1.0:
                rejections.append((pid, "bad_poverty_ratio"))
                continue
            race, warned = normalize_race(row.get(pat_schema["race"]) or "")
            if warned:
                warnings.append(f"patient {pid}: unknown race mapped to Other")
            lang_raw = (row.get(pat_schema["language"]) or "").strip().capitalize()
            language = lang_raw if lang_raw in LANGUAGES else "Other"
            marital_raw = (row.get(pat_schema["marital_status"]) or "").strip().lower()
            marital = _MARITAL_SYNONYMS.get(marital_raw, MISSING)
            if pid in patients_raw:
                rejections.append((pid, "duplicate_patient"))
                continue
            patients_raw[pid] = {
                "patient_id": pid,
                "birth_date": birth,
                "sex": normalize_sex(row.get(pat_schema["sex"]) or ""),
                "race": race,
                "marital_status": marital,
                "language": language,
                "poverty_ratio": poverty,
                "encounters": [],
                "conditions": [],
            }
            order.append(pid)

    enc_schema = schema["encounters"]
    with _open_csv(paths["encounters"]) as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames or [], list(enc_schema.values()), "encounters.csv")
        for i, row in enumerate(reader):
            total += 1
            rid = f"encounter{i}"
            pid = (row.get(enc_schema["patient_id"]) or "").strip()
            if pid not in patients_raw:
                rejections.append((rid, "orphan_encounter"))
                continue
            start = _parse_date(row.get(enc_schema["start_date"]) or "")
            end = _parse_date(row.get(enc_schema["end_date"]) or "")
            if start is None or end is None:
                rejections.append((rid, "bad_encounter_date"))
                continue
            if end < start:
                rejections.append((rid, "bad_interval"))
                continue
            if start < patients_raw[pid]["birth_date"]:
                rejections.append((rid, "encounter_before_birth"))
                continue
            klass = (row.get(enc_schema["encounter_class"]) or "").strip().lower()
            patients_raw[pid]["encounters"].append(
                Encounter(start_date=start, end_date=end, inpatient=klass == "inpatient")
            )

    cond_schema = schema["conditions"]
    with _open_csv(paths["conditions"]) as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames or [], list(cond_schema.values()), "conditions.csv")
        for i, row in enumerate(reader):
            total += 1
            rid = f"condition{i}"
            pid = (row.get(cond_schema["patient_id"]) or "").strip()
            if pid not in patients_raw:
                rejections.append((rid, "orphan_condition"))
                continue
            onset = _parse_date(row.get(cond_schema["onset_date"]) or "")
            if onset is None:
                rejections.append((rid, "bad_condition_date"))
                continue
            code = (row.get(cond_schema["icd10_code"]) or "").strip().upper()
            if not _ICD10_RE.match(code):
                rejections.append((rid, "bad_icd10"))
                continue
            patients_raw[pid]["conditions"].append(Condition(onset_date=onset, icd10_code=code))

    patients = [
        EmrPatient(
            patient_id=d["patient_id"],
            birth_date=d["birth_date"],
            sex=d["sex"],
            race=d["race"],
            marital_status=d["marital_status"],
            language=d["language"],
            poverty_ratio=d["poverty_ratio"],
            encounters=tuple(d["encounters"]),
            conditions=tuple(d["conditions"]),
        )
        for d in (patients_raw[pid] for pid in order)
    ]
    accepted = len(patients) + sum(len(p.encounters) + len(p.conditions) for p in patients)
    report = RejectionReport(
        total_rows=total,
        accepted=accepted,
        rejections=tuple(rejections),
        flags=(),
        warnings=tuple(warnings),
    )
    return patients, report


def make_snapshot(cases, patients, manifest=()) -> DatasetSnapshot:
    return DatasetSnapshot(
        cases=tuple(cases),
        patients=tuple(patients),
        source_manifest=tuple(manifest),
        load_timestamp=datetime.now(),
    )


def load_snapshot(cases_path=None, emr_dir=None, config: AnalysisConfig | None = None):
    """Convenience loader combining both sources into one snapshot."""
    config = config or AnalysisConfig()
    cases, case_report = ([], None)
    patients, emr_report = ([], None)
    manifest = []
    if cases_path is not None:
        cases, case_report = load_cases(cases_path, config)
        manifest.append((str(cases_path), case_report.total_rows, case_report.rejected))
    if emr_dir is not None:
        patients, emr_report = load_emr(emr_dir, config)
        manifest.append((str(emr_dir), emr_report.total_rows, emr_report.rejected))
    snapshot = make_snapshot(cases, patients, manifest)
    return snapshot, case_report, emr_report


# Canonical export: writing a snapshot out and loading it back must produce
# an identical snapshot (modulo load timestamp). Canonical files use the
# default schema column names.

def export_cases_csv(cases, path, config: AnalysisConfig | None = None) -> None:
    config = config or AnalysisConfig()
    schema = config.case_schema
    cols = [schema["case_id"], schema["death_datetime"], schema["age"], schema["sex"],
            schema["race"], schema["incident_zip"], schema["residence_zip"], *schema["drugs"]]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for c in cases:
            drugs = list(c.drugs) + [""] * (len(schema["drugs"]) - len(c.drugs))
            writer.writerow([
                c.case_id,
                c.death_datetime.strftime("%Y-%m-%d %H:%M:%S"),
                c.age,
                c.sex if c.sex != MISSING else "",
                c.race if c.race != MISSING else "",
                c.incident_zip if c.incident_zip != MISSING else "",
                c.residence_zip if c.residence_zip != MISSING else "",
                *drugs,
            ])


def export_emr_csv(patients, directory, config: AnalysisConfig | None = None) -> None:
    config = config or AnalysisConfig()
    schema = config.emr_schema
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    pat = schema["patients"]
    with open(directory / "patients.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([pat["patient_id"], pat["birth_date"], pat["sex"], pat["race"],
                         pat["marital_status"], pat["language"], pat["poverty_ratio"]])
        for p in patients:
            writer.writerow([
                p.patient_id,
                p.birth_date.isoformat(),
                p.sex if p.sex != MISSING else "",
                p.race if p.race != MISSING else "",
                p.marital_status if p.marital_status != MISSING else "",
                p.language,
                repr(p.poverty_ratio),
            ])

    enc = schema["encounters"]
    with open(directory / "encounters.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([enc["patient_id"], enc["start_date"], enc["end_date"],
                         enc["encounter_class"]])
        for p in patients:
            for e in p.encounters:
                writer.writerow([p.patient_id, e.start_date.isoformat(), e.end_date.isoformat(),
                                 "inpatient" if e.inpatient else "ambulatory"])

    cond = schema["conditions"]
    with open(directory / "conditions.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([cond["patient_id"], cond["onset_date"], cond["icd10_code"]])
        for p in patients:
            for c in p.conditions:
                writer.writerow([p.patient_id, c.onset_date.isoformat(), c.icd10_code])

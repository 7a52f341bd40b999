"""Analysis configuration: one YAML document drives every tunable mapping.

The public autopsy export renames columns across vintages, the drug alias
table and category map are judgement calls, and the ICD-10 binning is
hand-picked, so all of them live here instead of in code. ``load_config``
merges a user document over the shipped defaults key by key.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Any

import yaml

from .errors import ConfigurationError

# Column mapping for the autopsy CSV. ``drugs`` lists the cause-of-death
# drug columns in report order.
DEFAULT_CASE_SCHEMA = {
    "case_id": "_id",
    "death_datetime": "death_date_and_time",
    "age": "age",
    "sex": "sex",
    "race": "race",
    "incident_zip": "incident_zip",
    "residence_zip": "decedent_zip",
    "drugs": [
        "combined_od1",
        "combined_od2",
        "combined_od3",
        "combined_od4",
        "combined_od5",
        "combined_od6",
        "combined_od7",
    ],
}

# Column mapping for the synthetic-EMR export (Synthea-style headers).
DEFAULT_EMR_SCHEMA = {
    "patients": {
        "patient_id": "Id",
        "birth_date": "BIRTHDATE",
        "sex": "GENDER",
        "race": "RACE",
        "marital_status": "MARITAL",
        "language": "LANGUAGE",
        "poverty_ratio": "POVERTY_RATIO",
    },
    "encounters": {
        "patient_id": "PATIENT",
        "start_date": "START",
        "end_date": "STOP",
        "encounter_class": "ENCOUNTERCLASS",
    },
    "conditions": {
        "patient_id": "PATIENT",
        "onset_date": "START",
        "icd10_code": "CODE",
    },
}

DEFAULT_DRUG_ALIASES: dict[str, str] = {
    "ACETYL FENTANYL": "ACETYLFENTANYL",
    "4-ANPP": "DESPROPIONYL FENTANYL",
}

# Major-category map covering the drugs that dominate case counts; anything
# unmapped falls to Other.
DEFAULT_DRUG_CATEGORIES: dict[str, str] = {
    "HEROIN": "Opioid",
    "FENTANYL": "Opioid",
    "ACETYLFENTANYL": "Opioid",
    "MORPHINE": "Opioid",
    "OXYCODONE": "Opioid",
    "HYDROCODONE": "Opioid",
    "OXYMORPHONE": "Opioid",
    "HYDROMORPHONE": "Opioid",
    "METHADONE": "Opioid",
    "TRAMADOL": "Opioid",
    "CODEINE": "Opioid",
    "BUPRENORPHINE": "Opioid",
    "COCAINE": "Stimulant",
    "METHAMPHETAMINE": "Stimulant",
    "AMPHETAMINE": "Stimulant",
    "MDMA": "Stimulant",
    "CAFFEINE": "Stimulant",
    "ALPRAZOLAM": "Depressant",
    "DIAZEPAM": "Depressant",
    "CLONAZEPAM": "Depressant",
    "TEMAZEPAM": "Depressant",
    "LORAZEPAM": "Depressant",
    "ETHANOL": "Depressant",
    "PHENOBARBITAL": "Depressant",
    "ZOLPIDEM": "Depressant",
}

# ICD-10 chapter letters merged into 20 disease-history bins. Bin 19 is the
# designated catch-all for unmapped prefixes.
DEFAULT_ICD10_BINS: dict[str, int] = {
    "A": 0, "B": 0,       # infectious
    "C": 1,               # neoplasms
    "D": 2,               # blood / some neoplasms
    "E": 3,               # endocrine, metabolic
    "F": 4,               # mental and behavioural
    "G": 5,               # nervous system
    "H": 6,               # eye and ear
    "I": 7,               # circulatory
    "J": 8,               # respiratory
    "K": 9,               # digestive
    "L": 10,              # skin
    "M": 11,              # musculoskeletal
    "N": 12,              # genitourinary
    "O": 13,              # pregnancy
    "P": 14,              # perinatal
    "Q": 15,              # congenital
    "R": 16,              # symptoms and signs
    "S": 17, "T": 17,     # injury, poisoning
    "V": 18, "W": 18, "X": 18, "Y": 18,  # external causes
    "Z": 19, "U": 19,     # health-status factors, special codes
}

CATCH_ALL_BIN = 19
NUM_DISEASE_BINS = 20


@dataclass
class MatchParams:
    """Knobs for case-control matching."""

    age_window: int = 3
    seed: int = 0
    exact_race_set: frozenset[str] = frozenset({"White", "Black", "Asian"})

    def __post_init__(self):
        if self.age_window < 0:
            raise ConfigurationError("age_window must be >= 0")
        self.exact_race_set = frozenset(self.exact_race_set)


@dataclass
class AnalysisConfig:
    case_schema: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_CASE_SCHEMA))
    emr_schema: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_EMR_SCHEMA))
    drug_aliases: dict = field(default_factory=lambda: dict(DEFAULT_DRUG_ALIASES))
    drug_categories: dict = field(default_factory=lambda: dict(DEFAULT_DRUG_CATEGORIES))
    icd10_bins: dict = field(default_factory=lambda: dict(DEFAULT_ICD10_BINS))
    catch_all_bin: int = CATCH_ALL_BIN
    age_window: int = 3
    exact_race_set: tuple = ("White", "Black", "Asian")
    annual_discount: float = 0.9
    cooccurrence_top_k: int = 10
    cooccurrence_alpha: float = 0.05

    def match_params(self, seed: int) -> MatchParams:
        return MatchParams(
            age_window=self.age_window,
            seed=seed,
            exact_race_set=frozenset(self.exact_race_set),
        )


_MERGEABLE = {
    "case_schema",
    "emr_schema",
    "drug_aliases",
    "drug_categories",
    "icd10_bins",
}


def load_config(path=None) -> AnalysisConfig:
    """Load an AnalysisConfig, overlaying ``path`` (YAML) onto the defaults.

    Dict-valued sections merge key by key; scalars replace. Unknown keys are
    a configuration error so typos do not silently no-op.
    """
    cfg = AnalysisConfig()
    if path is None:
        return cfg
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigurationError(f"config root must be a mapping, got {type(doc).__name__}")
    for key, value in doc.items():
        if not hasattr(cfg, key):
            raise ConfigurationError(f"unknown config key: {key!r}")
        if key in _MERGEABLE:
            if not isinstance(value, dict):
                raise ConfigurationError(f"config key {key!r} must be a mapping")
            merged = getattr(cfg, key)
            _deep_merge(merged, value)
        else:
            setattr(cfg, key, value)
    if cfg.annual_discount <= 0 or cfg.annual_discount > 1:
        raise ConfigurationError("annual_discount must be in (0, 1]")
    return cfg


def _deep_merge(base: dict, overlay: dict) -> None:
    for k, v in overlay.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            _deep_merge(base[k], v)
        else:
            base[k] = v


def dump_default_config() -> str:
    """Render the shipped defaults as a YAML document (for ``odx config``)."""
    cfg = AnalysisConfig()
    doc: dict[str, Any] = {
        "case_schema": cfg.case_schema,
        "emr_schema": cfg.emr_schema,
        "drug_aliases": cfg.drug_aliases,
        "drug_categories": cfg.drug_categories,
        "icd10_bins": cfg.icd10_bins,
        "catch_all_bin": cfg.catch_all_bin,
        "age_window": cfg.age_window,
        "exact_race_set": list(cfg.exact_race_set),
        "annual_discount": cfg.annual_discount,
        "cooccurrence_top_k": cfg.cooccurrence_top_k,
        "cooccurrence_alpha": cfg.cooccurrence_alpha,
    }
    return yaml.safe_dump(doc, sort_keys=False)

"""HTTP API over the analysis modules.

Read endpoints are thin, lossless views over the corresponding module
functions: every response is a pure function of (state, request), and the
contract tests assert equality with direct module calls. Long-running work
(GLM fits, model training) goes through an in-process job table polled by
the client; at most one training job runs per cohort at a time.
"""

from __future__ import annotations

import itertools
import json
import threading
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import cohort as cohort_mod
from . import cooccur as cooccur_mod
from . import evaluate as evaluate_mod
from . import forest as forest_mod
from . import glm as glm_mod
from . import mlp as mlp_mod
from . import persist, stats
from .config import AnalysisConfig
from .dataset import DatasetSnapshot, load_snapshot
from .errors import DomainError, EncodingMismatchError, OdxError

JOB_PENDING = "Pending"
JOB_RUNNING = "Running"
JOB_DONE = "Done"
JOB_FAILED = "Failed"

NUMERIC_COVARIATES = ("age", "poverty_ratio", "sickliness")
CATEGORICAL_COVARIATES = ("sex", "race", "marital_status", "language")


@dataclass
class Job:
    job_id: str
    kind: str
    status: str = JOB_PENDING
    result: Any = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "kind": self.kind,
            "status": self.status,
            "result": self.result if self.status == JOB_DONE else None,
            "error": self.error,
        }


@dataclass
class ModelEntry:
    model_id: str
    kind: str
    model: Any
    covariate_schema: list
    columns: list
    eval_report: dict
    cohort_id: str | None = None


@dataclass
class AppState:
    config: AnalysisConfig
    models_dir: Path
    snapshot: DatasetSnapshot | None = None
    cohorts: dict = field(default_factory=dict)
    models: dict = field(default_factory=dict)
    jobs: dict = field(default_factory=dict)
    glm_fits: dict = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)
    cohort_train_locks: dict = field(default_factory=dict)
    counter: itertools.count = field(default_factory=itertools.count)

    def next_id(self, prefix: str) -> str:
        with self.lock:
            return f"{prefix}-{next(self.counter):04d}"

    def get_snapshot(self) -> DatasetSnapshot:
        snap = self.snapshot
        if snap is None:
            raise HTTPException(status_code=409, detail="no dataset snapshot loaded")
        return snap

    def set_snapshot(self, snapshot: DatasetSnapshot) -> None:
        with self.lock:
            self.snapshot = snapshot

    def train_lock(self, cohort_id: str) -> threading.Lock:
        with self.lock:
            return self.cohort_train_locks.setdefault(cohort_id, threading.Lock())


def covariate_schema_from_cohort(cohort) -> list:
    """Form manifest: one entry per raw covariate, fetched by the UI so the
    inputs always track the training encoding."""
    schema = []
    schema.append({"name": "age", "kind": "numeric", "min": 0, "max": 150})
    for attr in CATEGORICAL_COVARIATES:
        levels = cohort_mod._observed_levels(cohort.rows, attr)
        schema.append({"name": attr, "kind": "categorical", "levels": levels,
                       "reference": levels[0]})
    schema.append({"name": "poverty_ratio", "kind": "numeric", "min": 0.0, "max": 1.0})
    schema.append({"name": "sickliness", "kind": "numeric", "min": 0.0})
    for i in range(20):
        schema.append({"name": f"disease_{i:02d}", "kind": "numeric", "min": 0})
    return schema


def encode_covariates(covariates: dict, columns: list, schema: list):
    """Map a raw covariate document onto the model's encoded columns.

    Unknown fields, missing fields, and unseen categorical levels are
    client errors; the offending field is named in the response.
    """
    by_name = {entry["name"]: entry for entry in schema}
    unknown = [k for k in covariates if k not in by_name]
    if unknown:
        raise EncodingMismatchError(f"unknown covariate: {unknown[0]}", field=unknown[0])
    missing = [name for name in by_name if name not in covariates]
    if missing:
        raise EncodingMismatchError(f"missing covariate: {missing[0]}", field=missing[0])

    values: dict[str, float] = {}
    for entry in schema:
        name = entry["name"]
        raw = covariates[name]
        if entry["kind"] == "numeric":
            try:
                values[name] = float(raw)
            except (TypeError, ValueError):
                raise EncodingMismatchError(
                    f"covariate {name} must be numeric", field=name)
        else:
            if raw not in entry["levels"]:
                raise EncodingMismatchError(
                    f"covariate {name} has unknown level {raw!r}", field=name)

    vector = []
    for col in columns:
        if "=" in col:
            attr, level = col.split("=", 1)
            vector.append(1.0 if covariates[attr] == level else 0.0)
        else:
            vector.append(values[col])
    import numpy as np
    return np.array(vector, dtype=float)


def _timeline_query(drugs: str | None, sexes: str | None, age_min: int,
                    age_max: int, bucket: str) -> stats.TimelineQuery:
    drug_set = frozenset(d.strip() for d in drugs.split(",") if d.strip()) if drugs else frozenset()
    sex_set = frozenset(s.strip() for s in sexes.split(",") if s.strip()) if sexes else frozenset()
    try:
        return stats.TimelineQuery(drugs=drug_set, sexes=sex_set,
                                   age_lo=age_min, age_hi=age_max, bucket=bucket)
    except DomainError as exc:
        raise HTTPException(status_code=400, detail=str(exc))


def create_app(config: AnalysisConfig | None = None,
               cases_path=None, emr_dir=None,
               models_dir=None, static_dir=None) -> FastAPI:
    config = config or AnalysisConfig()
    models_dir = Path(models_dir) if models_dir else Path("models")
    state = AppState(config=config, models_dir=models_dir)

    app = FastAPI(title="odx", version="0.1.0",
                  description="Fatal-overdose analytics API")
    app.state.odx = state

    if cases_path or emr_dir:
        snapshot, _, _ = load_snapshot(cases_path, emr_dir, config)
        state.set_snapshot(snapshot)

    _load_model_registry(state)

    @app.exception_handler(OdxError)
    def _odx_error(request: Request, exc: OdxError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/api/spec")
    def api_spec():
        return app.openapi()

    @app.post("/api/dataset/load")
    def dataset_load(body: dict):
        cases = body.get("cases_path")
        emr = body.get("emr_dir")
        if not cases and not emr:
            raise HTTPException(status_code=400, detail="need cases_path and/or emr_dir")
        snapshot, case_report, emr_report = load_snapshot(cases, emr, state.config)
        state.set_snapshot(snapshot)
        return {
            "case_count": snapshot.case_count,
            "patient_count": len(snapshot.patients),
            "case_rejections": case_report.reasons() if case_report else {},
            "emr_rejections": emr_report.reasons() if emr_report else {},
        }

    @app.get("/api/summary")
    def summary():
        return stats.summary(state.get_snapshot())

    @app.get("/api/timeline")
    def timeline(drugs: str | None = None, sexes: str | None = None,
                 age_min: int = 0, age_max: int = 150, bucket: str = "Year"):
        q = _timeline_query(drugs, sexes, age_min, age_max, bucket)
        series = stats.timeline(state.get_snapshot(), q)
        return {"series": [{"bucket_start": b.isoformat(), "count": c} for b, c in series]}

    @app.get("/api/drugs/top")
    def drugs_top(k: int = 10):
        if k < 1:
            raise HTTPException(status_code=400, detail="k must be >= 1")
        ranks = stats.top_drugs(state.get_snapshot(), k)
        return {"ranking": [
            {"drug": r.drug, "case_count": r.case_count,
             "cumulative_case_share": r.cumulative_case_share}
            for r in ranks
        ]}

    @app.get("/api/num-drugs")
    def num_drugs():
        hist = stats.num_drugs_histogram(state.get_snapshot())
        return {
            "frequencies": {str(k): v for k, v in hist.frequencies.items()},
            "mean": hist.mean,
            "mode": hist.mode if hist.frequencies else None,
        }

    @app.get("/api/zips")
    def zips(which: str = "Incident"):
        try:
            zc = stats.zip_counts(state.get_snapshot(), which)
        except DomainError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"counts": zc.counts, "missing_count": zc.missing_count}

    @app.get("/api/category-mixing")
    def mixing():
        cm = stats.category_mixing(state.get_snapshot(), state.config.drug_categories)
        return {
            "within_pairs": cm.within_pairs,
            "between_pairs": cm.between_pairs,
            "within_rate": cm.within_rate,
            "between_rate": cm.between_rate,
            "applicable": cm.applicable,
        }

    @app.get("/api/cooccurrence")
    def cooccurrence(top: int | None = None, alpha: float | None = None):
        top = top if top is not None else state.config.cooccurrence_top_k
        alpha = alpha if alpha is not None else state.config.cooccurrence_alpha
        if not 0 < alpha < 1:
            raise HTTPException(status_code=400, detail="alpha must be in (0, 1)")
        try:
            cells = cooccur_mod.cooccurrence_matrix(state.get_snapshot(), top, alpha)
        except DomainError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"alpha": alpha, "cells": [c.to_dict() for c in cells]}

    @app.post("/api/glm/fit")
    def glm_fit():
        snapshot = state.get_snapshot()
        job = Job(job_id=state.next_id("glm"), kind="glm_fit")
        state.jobs[job.job_id] = job

        def run():
            job.status = JOB_RUNNING
            try:
                design = glm_mod.design_from_snapshot(snapshot)
                fit = glm_mod.fit_poisson(design.matrix, design.response,
                                          terms=design.terms)
                diag = glm_mod.diagnostics(fit, design.matrix, design.response)
                gof_stat, gof_df, gof_p = glm_mod.gof_test(fit)
                ratio, over_p = glm_mod.overdispersion_test(fit)
                state.glm_fits[job.job_id] = {
                    "table": fit.table(),
                    "deviance": fit.deviance,
                    "null_deviance": fit.null_deviance,
                    "df_residual": fit.df_residual,
                    "converged": fit.converged,
                    "iterations": fit.iterations,
                    "gof": {"statistic": gof_stat, "df": gof_df, "p_value": gof_p},
                    "overdispersion": {"dispersion_ratio": ratio, "p_value": over_p},
                    "diagnostics": {
                        "fitted": diag.fitted.tolist(),
                        "deviance_residuals": diag.deviance_residuals.tolist(),
                        "qq_theoretical": diag.qq_theoretical.tolist(),
                        "qq_sample": diag.qq_sample.tolist(),
                    },
                }
                job.result = job.job_id
                job.status = JOB_DONE
            except Exception as exc:  # surfaced through the job table
                job.error = str(exc)
                job.status = JOB_FAILED

        threading.Thread(target=run, daemon=True).start()
        return {"fit_id": job.job_id}

    @app.get("/api/glm/{fit_id}")
    def glm_result(fit_id: str):
        job = state.jobs.get(fit_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown fit id {fit_id}")
        if job.status != JOB_DONE:
            return {"status": job.status, "error": job.error}
        return {"status": job.status, **state.glm_fits[fit_id]}

    @app.get("/api/jobs/{job_id}")
    def job_status(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown job id {job_id}")
        return job.to_dict()

    @app.post("/api/cohort/build")
    def cohort_build(body: dict):
        snapshot = state.get_snapshot()
        if not snapshot.patients:
            raise HTTPException(status_code=409, detail="no EMR patients loaded")
        if "seed" not in body:
            raise HTTPException(status_code=400, detail="seed is required")
        seed = int(body["seed"])
        age_window = int(body.get("age_window", state.config.age_window))
        params = cohort_mod.MatchParams(
            age_window=age_window, seed=seed,
            exact_race_set=frozenset(state.config.exact_race_set))
        matrix = cohort_mod.build_matrix(cohort_mod.match_cohort(
            list(snapshot.cases), list(snapshot.patients), params, state.config))
        cohort_id = state.next_id("cohort")
        state.cohorts[cohort_id] = matrix
        reasons: dict[str, int] = {}
        for _, r in matrix.dropped_cases:
            reasons[r] = reasons.get(r, 0) + 1
        return {
            "cohort_id": cohort_id,
            "n_o": matrix.n_o,
            "n_c": matrix.n_c,
            "d": matrix.d,
            "d_prime": matrix.d_prime,
            "dropped": reasons,
            "seed": seed,
        }

    @app.get("/api/cohorts")
    def cohorts_list():
        return {"cohorts": [
            {"cohort_id": cid, "n_o": m.n_o, "n_c": m.n_c, "seed": m.seed}
            for cid, m in state.cohorts.items()
        ]}

    @app.post("/api/models/train")
    def models_train(body: dict):
        cohort_id = body.get("cohort_id")
        kind = body.get("kind")
        cfg_doc = body.get("config") or {}
        if cohort_id not in state.cohorts:
            raise HTTPException(status_code=404, detail=f"unknown cohort id {cohort_id}")
        if kind not in ("forest", "mlp"):
            raise HTTPException(status_code=400, detail="kind must be 'forest' or 'mlp'")
        if "seed" not in cfg_doc:
            raise HTTPException(status_code=400, detail="config.seed is required")
        matrix = state.cohorts[cohort_id]
        cv_folds = int(body.get("cv_folds", 10))

        job = Job(job_id=state.next_id("job"), kind="train")
        state.jobs[job.job_id] = job

        def run():
            job.status = JOB_RUNNING
            try:
                with state.train_lock(cohort_id):
                    model_id = _train_and_register(
                        state, matrix, kind, cfg_doc, cv_folds, cohort_id)
                job.result = model_id
                job.status = JOB_DONE
            except Exception as exc:
                job.error = str(exc)
                job.status = JOB_FAILED

        threading.Thread(target=run, daemon=True).start()
        return {"job_id": job.job_id}

    @app.get("/api/models")
    def models_list():
        return {"models": [
            {"model_id": mid, "kind": e.kind, "cohort_id": e.cohort_id}
            for mid, e in state.models.items()
        ]}

    @app.get("/api/models/{model_id}/eval")
    def model_eval(model_id: str):
        entry = state.models.get(model_id)
        if entry is None:
            raise HTTPException(status_code=404, detail=f"unknown model id {model_id}")
        return entry.eval_report

    @app.get("/api/models/{model_id}/schema")
    def model_schema(model_id: str):
        entry = state.models.get(model_id)
        if entry is None:
            raise HTTPException(status_code=404, detail=f"unknown model id {model_id}")
        return {"model_id": model_id, "kind": entry.kind,
                "covariates": entry.covariate_schema, "columns": entry.columns}

    @app.post("/api/predict")
    def predict(body: dict):
        model_id = body.get("model_id")
        covariates = body.get("covariates")
        entry = state.models.get(model_id)
        if entry is None:
            raise HTTPException(status_code=404, detail=f"unknown model id {model_id}")
        if not isinstance(covariates, dict):
            raise HTTPException(status_code=422, detail="covariates document required")
        try:
            x = encode_covariates(covariates, entry.columns, entry.covariate_schema)
        except EncodingMismatchError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        if entry.kind == "forest":
            score = forest_mod.predict_risk(entry.model, x,
                                            seed=entry.model.config.seed)
            return score.to_dict()
        risk = float(mlp_mod.predict_proba(entry.model, x)[0])
        return {"risk": risk, "ci_low": risk, "ci_high": risk, "importances": None}

    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app


def _train_and_register(state: AppState, matrix, kind: str, cfg_doc: dict,
                        cv_folds: int, cohort_id: str | None) -> str:
    seed = int(cfg_doc["seed"])
    X, y, columns = matrix.X, matrix.y, matrix.columns
    if kind == "forest":
        cfg = forest_mod.ForestConfig(
            n_trees=int(cfg_doc.get("n_trees", 100)),
            max_depth=cfg_doc.get("max_depth"),
            min_leaf=int(cfg_doc.get("min_leaf", 1)),
            features_per_split=cfg_doc.get("features_per_split"),
            seed=seed,
        )
        model = forest_mod.train_forest(X, y, cfg, columns)
        trainer = evaluate_mod.forest_trainer(cfg)
    else:
        cfg = mlp_mod.MlpConfig(
            learning_rate=float(cfg_doc.get("learning_rate", 0.01)),
            epochs=int(cfg_doc.get("epochs", 200)),
            batch_size=int(cfg_doc.get("batch_size", 32)),
            seed=seed,
        )
        model = mlp_mod.train_mlp(X, y, cfg, columns)
        trainer = evaluate_mod.mlp_trainer(cfg)
    report = evaluate_mod.cross_validate(X, y, trainer, k=cv_folds, seed=seed)

    model_id = state.next_id("model")
    entry = ModelEntry(
        model_id=model_id,
        kind=kind,
        model=model,
        covariate_schema=covariate_schema_from_cohort(matrix),
        columns=list(columns),
        eval_report=report.to_dict(),
        cohort_id=cohort_id,
    )
    state.models[model_id] = entry
    _persist_model(state, entry)
    return model_id


def _persist_model(state: AppState, entry: ModelEntry) -> None:
    state.models_dir.mkdir(parents=True, exist_ok=True)
    persist.save_model(entry.model, state.models_dir / f"{entry.model_id}.model.json")
    meta = {
        "model_id": entry.model_id,
        "kind": entry.kind,
        "cohort_id": entry.cohort_id,
        "covariate_schema": entry.covariate_schema,
        "columns": entry.columns,
        "eval_report": entry.eval_report,
        "created": datetime.now().isoformat(),
    }
    with open(state.models_dir / f"{entry.model_id}.meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh)


def _load_model_registry(state: AppState) -> None:
    """Rebuild the model registry by scanning the models directory."""
    if not state.models_dir.is_dir():
        return
    max_counter = -1
    for meta_path in sorted(state.models_dir.glob("*.meta.json")):
        try:
            with open(meta_path, "r", encoding="utf-8") as fh:
                meta = json.load(fh)
            model_path = state.models_dir / f"{meta['model_id']}.model.json"
            model = persist.load_model(model_path)
        except (OSError, KeyError, OdxError, json.JSONDecodeError):
            continue  # skip unreadable artifacts, keep serving the rest
        entry = ModelEntry(
            model_id=meta["model_id"],
            kind=meta["kind"],
            model=model,
            covariate_schema=meta["covariate_schema"],
            columns=meta["columns"],
            eval_report=meta["eval_report"],
            cohort_id=meta.get("cohort_id"),
        )
        state.models[entry.model_id] = entry
        try:
            max_counter = max(max_counter, int(meta["model_id"].split("-")[-1]))
        except ValueError:
            pass
    if max_counter >= 0:
        state.counter = itertools.count(max_counter + 1)

"""Command-line front door.

Subcommands mirror the analysis modules one-to-one and share their code
with the HTTP service, so batch runs and the UI cannot drift apart.
``--json`` switches every command from human tables to machine-readable
documents (schemas ship under odx/schemas/). Randomized subcommands refuse
to run without an explicit ``--seed``.

Exit codes: 0 success, 1 domain or data error, 2 usage error.
"""

from __future__ import annotations

import json
import os
import sys
import tempfile
from pathlib import Path

import click

from . import __version__
from . import cohort as cohort_mod
from . import cooccur as cooccur_mod
from . import evaluate as evaluate_mod
from . import forest as forest_mod
from . import glm as glm_mod
from . import mlp as mlp_mod
from . import persist, stats
from .config import AnalysisConfig, dump_default_config, load_config
from .dataset import load_snapshot
from .errors import OdxError


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _echo_json(doc) -> None:
    click.echo(json.dumps(doc, indent=2, sort_keys=False))


def _load(data, emr, config_path):
    cfg = load_config(config_path) if config_path else AnalysisConfig()
    cases_path = data
    tmp = None
    if data == "-":
        tmp = tempfile.NamedTemporaryFile("w", suffix=".csv", delete=False,
                                          encoding="utf-8")
        tmp.write(sys.stdin.read())
        tmp.close()
        cases_path = tmp.name
    try:
        snapshot, case_report, emr_report = load_snapshot(cases_path, emr, cfg)
    finally:
        if tmp is not None:
            os.unlink(tmp.name)
    return snapshot, case_report, emr_report, cfg


data_option = click.option("--data", "data", default=None,
                           help="autopsy CSV path ('-' for stdin)")
emr_option = click.option("--emr", "emr", default=None,
                          help="EMR export directory")
config_option = click.option("--config", "config_path", default=None,
                             type=click.Path(exists=True), help="YAML config file")
json_option = click.option("--json", "as_json", is_flag=True,
                           help="emit machine-readable JSON")


@click.group()
@click.version_option(__version__)
def main():
    """Fatal-overdose analytics toolkit."""


@main.command()
@data_option
@emr_option
@config_option
@json_option
def ingest(data, emr, config_path, as_json):
    """Validate inputs and print the load/rejection report."""
    if not data and not emr:
        raise click.UsageError("need --data and/or --emr")
    try:
        snapshot, case_report, emr_report, _ = _load(data, emr, config_path)
    except OdxError as exc:
        _fail(str(exc))
    doc = {
        "case_count": snapshot.case_count,
        "patient_count": len(snapshot.patients),
        "cases": _report_doc(case_report),
        "emr": _report_doc(emr_report),
    }
    if as_json:
        _echo_json(doc)
        return
    click.echo(f"cases accepted:    {snapshot.case_count}")
    if case_report:
        click.echo(f"cases rejected:    {case_report.rejected} {case_report.reasons()}")
        click.echo(f"rows flagged:      {len(case_report.flags)}")
    click.echo(f"patients accepted: {len(snapshot.patients)}")
    if emr_report:
        click.echo(f"emr rows rejected: {emr_report.rejected} {emr_report.reasons()}")


def _report_doc(rep):
    if rep is None:
        return None
    return {
        "total_rows": rep.total_rows,
        "accepted": rep.accepted,
        "rejected": rep.rejected,
        "reasons": rep.reasons(),
        "flags": [list(f) for f in rep.flags],
    }


@main.command(name="stats")
@data_option
@config_option
@click.option("--top", "top_k", default=10, show_default=True)
@json_option
def stats_cmd(data, config_path, top_k, as_json):
    """Summary, drug-count histogram, top drugs, category mixing."""
    if not data:
        raise click.UsageError("need --data")
    try:
        snapshot, _, _, cfg = _load(data, None, config_path)
        hist = stats.num_drugs_histogram(snapshot)
        ranking = stats.top_drugs(snapshot, top_k)
        mixing = stats.category_mixing(snapshot, cfg.drug_categories)
    except OdxError as exc:
        _fail(str(exc))
    doc = {
        "summary": stats.summary(snapshot),
        "num_drugs": {"frequencies": {str(k): v for k, v in hist.frequencies.items()},
                      "mean": hist.mean,
                      "mode": hist.mode if hist.frequencies else None},
        "top_drugs": [{"drug": r.drug, "case_count": r.case_count,
                       "cumulative_case_share": r.cumulative_case_share}
                      for r in ranking],
        "category_mixing": {"within_rate": mixing.within_rate,
                            "between_rate": mixing.between_rate,
                            "applicable": mixing.applicable},
    }
    if as_json:
        _echo_json(doc)
        return
    s = doc["summary"]
    click.echo(f"cases: {s['case_count']}  drugs: {s['drug_count']}  "
               f"mean drugs/case: {s['mean_drugs_per_case']:.2f}")
    click.echo(f"drug count histogram: {hist.frequencies}")
    click.echo(f"{'drug':<24}{'cases':>8}{'cum share':>12}")
    for r in ranking:
        click.echo(f"{r.drug:<24}{r.case_count:>8}{r.cumulative_case_share:>12.3f}")
    if mixing.applicable:
        click.echo(f"category mixing: within {mixing.within_rate:.2f}x, "
                   f"between {mixing.between_rate:.2f}x")


@main.command()
@data_option
@config_option
@click.option("--top", "top_k", default=10, show_default=True)
@click.option("--alpha", default=0.05, show_default=True)
@json_option
def cooccur(data, config_path, top_k, alpha, as_json):
    """Exact pairwise cooccurrence tests over the top drugs."""
    if not data:
        raise click.UsageError("need --data")
    try:
        snapshot, _, _, _ = _load(data, None, config_path)
        cells = cooccur_mod.cooccurrence_matrix(snapshot, top_k, alpha)
    except OdxError as exc:
        _fail(str(exc))
    if as_json:
        _echo_json({"alpha": alpha, "cells": [c.to_dict() for c in cells]})
        return
    click.echo(f"{'drug_a':<20}{'drug_b':<20}{'obs':>5}{'exp':>9}"
               f"{'p_lt':>10}{'p_gt':>10}  class")
    for c in cells:
        click.echo(f"{c.drug_a:<20}{c.drug_b:<20}{c.q_obs:>5}{c.expected:>9.2f}"
                   f"{c.p_lt:>10.4f}{c.p_gt:>10.4f}  {c.classification}")


@main.command()
@data_option
@config_option
@json_option
def glm(data, config_path, as_json):
    """Poisson model of drug count on age, sex, and race."""
    if not data:
        raise click.UsageError("need --data")
    try:
        snapshot, _, _, _ = _load(data, None, config_path)
        design = glm_mod.design_from_snapshot(snapshot)
        fit = glm_mod.fit_poisson(design.matrix, design.response, terms=design.terms)
        gof_stat, gof_df, gof_p = glm_mod.gof_test(fit)
        ratio, over_p = glm_mod.overdispersion_test(fit)
    except OdxError as exc:
        _fail(str(exc))
    doc = {
        "table": fit.table(),
        "deviance": fit.deviance,
        "null_deviance": fit.null_deviance,
        "df_residual": fit.df_residual,
        "converged": fit.converged,
        "gof": {"statistic": gof_stat, "df": gof_df, "p_value": gof_p},
        "overdispersion": {"dispersion_ratio": ratio, "p_value": over_p},
    }
    if as_json:
        _echo_json(doc)
        return
    click.echo(f"{'term':<22}{'estimate':>10}{'std err':>10}{'z':>8}{'p':>10}")
    for row in fit.table():
        click.echo(f"{row['term']:<22}{row['estimate']:>10.4f}"
                   f"{row['std_error']:>10.4f}{row['z']:>8.2f}{row['p']:>10.4f}")
    click.echo(f"deviance {fit.deviance:.2f} on {fit.df_residual} df "
               f"(null {fit.null_deviance:.2f}); "
               f"GOF p={gof_p:.4f}; dispersion {ratio:.3f} (p={over_p:.4f})")


@main.command()
@data_option
@emr_option
@config_option
@click.option("--seed", type=int, required=True, help="matching seed (required)")
@click.option("--age-window", type=int, default=None, help="override the config window")
@click.option("--out", "out_path", default=None, help="write the encoded matrix CSV here")
@json_option
def cohort(data, emr, config_path, seed, age_window, out_path, as_json):
    """Build the matched case-control cohort."""
    if not data or not emr:
        raise click.UsageError("need --data and --emr")
    try:
        snapshot, _, _, cfg = _load(data, emr, config_path)
        if age_window is not None:
            cfg.age_window = age_window
        matrix = cohort_mod.build_matrix(cohort_mod.match_cohort(
            list(snapshot.cases), list(snapshot.patients),
            cfg.match_params(seed), cfg))
        if out_path:
            cohort_mod.export_matrix_csv(matrix, out_path)
    except OdxError as exc:
        _fail(str(exc))
    reasons: dict[str, int] = {}
    for _, r in matrix.dropped_cases:
        reasons[r] = reasons.get(r, 0) + 1
    doc = {
        "n_o": matrix.n_o,
        "n_c": matrix.n_c,
        "d": matrix.d,
        "d_prime": matrix.d_prime,
        "dropped": reasons,
        "seed": seed,
        "columns": matrix.columns,
        "out": out_path,
    }
    if as_json:
        _echo_json(doc)
        return
    click.echo(f"matched pairs: {matrix.n_o}  controls: {matrix.n_c}  "
               f"dropped: {reasons or 'none'}")
    click.echo(f"encoded dimensions: d={matrix.d} -> d'={matrix.d_prime}")
    if out_path:
        click.echo(f"matrix written to {out_path}")


def _build_matrix_for_training(data, emr, config_path, cohort_seed, age_window):
    snapshot, _, _, cfg = _load(data, emr, config_path)
    if age_window is not None:
        cfg.age_window = age_window
    return cohort_mod.build_matrix(cohort_mod.match_cohort(
        list(snapshot.cases), list(snapshot.patients),
        cfg.match_params(cohort_seed), cfg))


model_kind_option = click.option("--kind", type=click.Choice(["forest", "mlp"]),
                                 default="forest", show_default=True)


def _model_config(kind, seed, trees, epochs, learning_rate, batch_size):
    if kind == "forest":
        return forest_mod.ForestConfig(n_trees=trees, seed=seed)
    return mlp_mod.MlpConfig(learning_rate=learning_rate, epochs=epochs,
                             batch_size=batch_size, seed=seed)


@main.command()
@data_option
@emr_option
@config_option
@click.option("--seed", type=int, required=True, help="training seed (required)")
@click.option("--cohort-seed", type=int, default=None,
              help="matching seed (defaults to --seed)")
@click.option("--age-window", type=int, default=None)
@model_kind_option
@click.option("--trees", type=int, default=100, show_default=True)
@click.option("--epochs", type=int, default=200, show_default=True)
@click.option("--learning-rate", type=float, default=0.01, show_default=True)
@click.option("--batch-size", type=int, default=32, show_default=True)
@click.option("--cv", "cv_folds", type=int, default=10, show_default=True)
@click.option("--model-out", default=None, help="persist the trained model here")
@json_option
def train(data, emr, config_path, seed, cohort_seed, age_window, kind, trees,
          epochs, learning_rate, batch_size, cv_folds, model_out, as_json):
    """Train a risk model on a freshly built cohort and cross-validate it."""
    if not data or not emr:
        raise click.UsageError("need --data and --emr")
    try:
        matrix = _build_matrix_for_training(data, emr, config_path,
                                            cohort_seed if cohort_seed is not None else seed,
                                            age_window)
        cfg = _model_config(kind, seed, trees, epochs, learning_rate, batch_size)
        if kind == "forest":
            model = forest_mod.train_forest(matrix.X, matrix.y, cfg, matrix.columns)
            trainer = evaluate_mod.forest_trainer(cfg)
        else:
            model = mlp_mod.train_mlp(matrix.X, matrix.y, cfg, matrix.columns)
            trainer = evaluate_mod.mlp_trainer(cfg)
        rep = evaluate_mod.cross_validate(matrix.X, matrix.y, trainer,
                                          k=cv_folds, seed=seed)
        if model_out:
            persist.save_model(model, model_out)
    except OdxError as exc:
        _fail(str(exc))
    doc = {"kind": kind, "n_rows": len(matrix.rows), "d_prime": matrix.d_prime,
           "eval": rep.to_dict(), "model_out": model_out}
    if kind == "forest":
        doc["grouped_importances"] = forest_mod.grouped_importances(model)
    if as_json:
        _echo_json(doc)
        return
    p = rep.pooled
    click.echo(f"{kind} on {len(matrix.rows)} rows (d'={matrix.d_prime})")
    click.echo(f"10-fold pooled: accuracy {p.accuracy:.3f}  "
               f"sensitivity {p.sensitivity:.3f}  specificity {p.specificity:.3f}")
    if kind == "forest":
        top = sorted(doc["grouped_importances"].items(), key=lambda kv: -kv[1])[:5]
        click.echo("top importances: " +
                   ", ".join(f"{k} {v:.1%}" for k, v in top))
    if model_out:
        click.echo(f"model written to {model_out}")


@main.command(name="eval")
@data_option
@emr_option
@config_option
@click.option("--seed", type=int, required=True)
@click.option("--cohort-seed", type=int, default=None)
@click.option("--age-window", type=int, default=None)
@model_kind_option
@click.option("--trees", type=int, default=100, show_default=True)
@click.option("--epochs", type=int, default=200, show_default=True)
@click.option("--learning-rate", type=float, default=0.01, show_default=True)
@click.option("--batch-size", type=int, default=32, show_default=True)
@click.option("--cv", "cv_folds", type=int, default=10, show_default=True)
@json_option
def eval_cmd(data, emr, config_path, seed, cohort_seed, age_window, kind, trees,
             epochs, learning_rate, batch_size, cv_folds, as_json):
    """Cross-validated evaluation without persisting a model."""
    if not data or not emr:
        raise click.UsageError("need --data and --emr")
    try:
        matrix = _build_matrix_for_training(data, emr, config_path,
                                            cohort_seed if cohort_seed is not None else seed,
                                            age_window)
        cfg = _model_config(kind, seed, trees, epochs, learning_rate, batch_size)
        trainer = (evaluate_mod.forest_trainer(cfg) if kind == "forest"
                   else evaluate_mod.mlp_trainer(cfg))
        rep = evaluate_mod.cross_validate(matrix.X, matrix.y, trainer,
                                          k=cv_folds, seed=seed)
    except OdxError as exc:
        _fail(str(exc))
    doc = {"kind": kind, "n_rows": len(matrix.rows), "eval": rep.to_dict()}
    if as_json:
        _echo_json(doc)
        return
    p = rep.pooled
    click.echo(f"{kind}: accuracy {p.accuracy:.3f}  sensitivity {p.sensitivity:.3f}  "
               f"specificity {p.specificity:.3f}")
    for f in rep.folds:
        click.echo(f"  fold {f.fold}: acc {f.accuracy:.3f} "
                   f"(tp {f.tp} fp {f.fp} tn {f.tn} fn {f.fn})")


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--covariates", "cov_path", required=True,
              help="JSON document of raw covariate values ('-' for stdin)")
@click.option("--seed", type=int, required=True,
              help="bootstrap seed for the confidence interval (required)")
@json_option
def predict(model_path, cov_path, seed, as_json):
    """Risk score with a 95% interval for one covariate document."""
    try:
        model = persist.load_model(model_path)
        if cov_path == "-":
            covariates = json.load(sys.stdin)
        else:
            with open(cov_path, "r", encoding="utf-8") as fh:
                covariates = json.load(fh)
        import numpy as np

        x = np.array([_covariate_value(covariates, col) for col in model.columns])
        if isinstance(model, forest_mod.RandomForest):
            score = forest_mod.predict_risk(model, x, seed=seed)
            doc = score.to_dict()
        else:
            risk = float(mlp_mod.predict_proba(model, x)[0])
            doc = {"risk": risk, "ci_low": risk, "ci_high": risk, "importances": None}
    except (OdxError, json.JSONDecodeError, KeyError) as exc:
        _fail(str(exc))
    if as_json:
        _echo_json(doc)
        return
    click.echo(f"risk {doc['risk']:.3f}  95% CI [{doc['ci_low']:.3f}, {doc['ci_high']:.3f}]")


def _covariate_value(covariates: dict, column: str) -> float:
    # columns either carry a raw numeric name or "attr=level" indicators
    if "=" in column:
        attr, level = column.split("=", 1)
        if attr not in covariates:
            raise KeyError(f"missing covariate: {attr}")
        return 1.0 if covariates[attr] == level else 0.0
    if column not in covariates:
        raise KeyError(f"missing covariate: {column}")
    return float(covariates[column])


@main.command(name="report")
@data_option
@emr_option
@config_option
@click.option("--top", "top_k", default=10, show_default=True)
@click.option("--alpha", default=0.05, show_default=True)
@click.option("--no-glm", is_flag=True, help="skip the GLM section")
@click.option("--out", "out_dir", required=True, help="report output directory")
def report_cmd(data, emr, config_path, top_k, alpha, no_glm, out_dir):
    """Render the figure-and-CSV report for a dataset."""
    from . import report  # matplotlib import deferred off the common path

    if not data:
        raise click.UsageError("need --data")
    try:
        snapshot, _, _, cfg = _load(data, emr, config_path)
        doc = report.write_report(snapshot, out_dir, top_k=top_k, alpha=alpha,
                                  include_glm=not no_glm, config=cfg)
    except OdxError as exc:
        _fail(str(exc))
    click.echo(f"report written to {out_dir} "
               f"({doc['case_count']} cases, {doc['drug_count']} drugs)")


@main.command()
@click.option("--out", "out_dir", required=True)
@click.option("--seed", type=int, required=True)
@click.option("--cases", "n_cases", type=int, default=1100, show_default=True)
@click.option("--patients", "n_patients", type=int, default=6000, show_default=True)
@json_option
def demo(out_dir, seed, n_cases, n_patients, as_json):
    """Generate the synthetic demo corpus."""
    from . import demo as demo_mod

    manifest = demo_mod.write_corpus(out_dir, seed=seed, n_cases=n_cases,
                                     n_patients=n_patients)
    if as_json:
        _echo_json(manifest)
    else:
        click.echo(f"demo corpus written to {out_dir}: {manifest}")


@main.command(name="config")
def config_cmd():
    """Print the default configuration document."""
    click.echo(dump_default_config(), nl=False)


@main.command()
@data_option
@emr_option
@config_option
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=None,
              help="default from ODX_PORT or 8000")
@click.option("--models-dir", default=None,
              help="default from ODX_MODELS_DIR or ./models")
@click.option("--static-dir", default=None,
              help="UI assets directory (default from ODX_STATIC_DIR)")
def serve(data, emr, config_path, host, port, models_dir, static_dir):
    """Run the HTTP API (binds to loopback by default)."""
    import uvicorn

    from .service import create_app

    data = data or os.environ.get("ODX_DATA")
    emr = emr or os.environ.get("ODX_EMR")
    port = port or int(os.environ.get("ODX_PORT", "8000"))
    models_dir = models_dir or os.environ.get("ODX_MODELS_DIR", "models")
    static_dir = static_dir or os.environ.get("ODX_STATIC_DIR")
    cfg = load_config(config_path) if config_path else AnalysisConfig()
    try:
        app = create_app(config=cfg, cases_path=data, emr_dir=emr,
                         models_dir=models_dir, static_dir=static_dir)
    except OdxError as exc:
        _fail(str(exc))
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()

"""Batch report: delimited series plus rendered figures.

``odx report`` drops a self-contained directory of CSVs with a PNG next to
each one: the deaths timeline, the drugs-per-case density, the top-drug
ranking, the cooccurrence heatmap, and (when a GLM fit is requested) the
coefficient table with residual and QQ panels.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from . import cooccur as cooccur_mod
from . import glm as glm_mod
from . import stats
from .config import AnalysisConfig
from .dataset import DatasetSnapshot

CLASS_COLORS = {"Positive": "#2166ac", "Negative": "#e6c229", "Random": "#cccccc"}


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def render_timeline(snapshot, out_dir: Path, query=None) -> None:
    query = query or stats.TimelineQuery()
    series = stats.timeline(snapshot, query)
    _write_csv(out_dir / "timeline.csv", ["bucket_start", "count"],
               [(b.isoformat(), c) for b, c in series])
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot([b for b, _ in series], [c for _, c in series], marker="o")
    ax.set_xlabel("year" if query.bucket == "Year" else "month")
    ax.set_ylabel("deaths")
    ax.set_title("Overdose deaths over time")
    fig.tight_layout()
    fig.savefig(out_dir / "timeline.png", dpi=120)
    plt.close(fig)


def render_num_drugs(snapshot, out_dir: Path) -> None:
    hist = stats.num_drugs_histogram(snapshot)
    _write_csv(out_dir / "num_drugs.csv", ["num_drugs", "frequency"],
               sorted(hist.frequencies.items()))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(list(hist.frequencies.keys()), list(hist.frequencies.values()))
    ax.set_xlabel("drugs involved")
    ax.set_ylabel("cases")
    ax.set_title(f"Drugs per case (mean {hist.mean:.2f})")
    fig.tight_layout()
    fig.savefig(out_dir / "num_drugs.png", dpi=120)
    plt.close(fig)


def render_top_drugs(snapshot, out_dir: Path, k: int = 10) -> None:
    ranking = stats.top_drugs(snapshot, k)
    _write_csv(out_dir / "top_drugs.csv",
               ["drug", "case_count", "cumulative_case_share"],
               [(r.drug, r.case_count, f"{r.cumulative_case_share:.6f}") for r in ranking])
    fig, ax = plt.subplots(figsize=(7, 4.5))
    names = [r.drug for r in ranking][::-1]
    counts = [r.case_count for r in ranking][::-1]
    ax.barh(names, counts)
    ax.set_xlabel("cases involving drug")
    ax.set_title(f"Top {len(names)} drugs")
    fig.tight_layout()
    fig.savefig(out_dir / "top_drugs.png", dpi=120)
    plt.close(fig)


def render_cooccurrence(snapshot, out_dir: Path, top_k: int = 10,
                        alpha: float = 0.05) -> None:
    cells = cooccur_mod.cooccurrence_matrix(snapshot, top_k, alpha)
    _write_csv(out_dir / "cooccurrence.csv",
               ["drug_a", "drug_b", "n1", "n2", "q_obs", "expected",
                "p_lt", "p_gt", "classification"],
               [(c.drug_a, c.drug_b, c.n1, c.n2, c.q_obs, f"{c.expected:.4f}",
                 f"{c.p_lt:.6g}", f"{c.p_gt:.6g}", c.classification) for c in cells])

    drugs = [r.drug for r in stats.top_drugs(snapshot, top_k)]
    index = {d: i for i, d in enumerate(drugs)}
    n = len(drugs)
    fig, ax = plt.subplots(figsize=(7, 6))
    ax.set_xlim(-0.5, n - 0.5)
    ax.set_ylim(n - 0.5, -0.5)
    for c in cells:
        i, j = index[c.drug_a], index[c.drug_b]
        for a, b in ((i, j), (j, i)):
            ax.add_patch(plt.Rectangle((b - 0.5, a - 0.5), 1, 1,
                                       color=CLASS_COLORS[c.classification]))
    ax.set_xticks(range(n))
    ax.set_xticklabels(drugs, rotation=60, ha="right", fontsize=8)
    ax.set_yticks(range(n))
    ax.set_yticklabels(drugs, fontsize=8)
    ax.set_title("Pairwise drug cooccurrence\nblue together, yellow apart, gray random")
    fig.tight_layout()
    fig.savefig(out_dir / "cooccurrence.png", dpi=120)
    plt.close(fig)


def render_glm(snapshot, out_dir: Path) -> None:
    design = glm_mod.design_from_snapshot(snapshot)
    fit = glm_mod.fit_poisson(design.matrix, design.response, terms=design.terms)
    _write_csv(out_dir / "glm_summary.csv",
               ["term", "estimate", "std_error", "z", "p"],
               [(r["term"], f"{r['estimate']:.6f}", f"{r['std_error']:.6f}",
                 f"{r['z']:.4f}", f"{r['p']:.6g}") for r in fit.table()])
    diag = glm_mod.diagnostics(fit, design.matrix, design.response)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4.5))
    ax1.scatter(diag.fitted, diag.deviance_residuals, s=8, alpha=0.4)
    ax1.axhline(0.0, color="gray", lw=1)
    ax1.set_xlabel("fitted")
    ax1.set_ylabel("deviance residual")
    ax1.set_title("Residuals vs fitted")
    ax2.scatter(diag.qq_theoretical, diag.qq_sample, s=8, alpha=0.4)
    lims = [min(diag.qq_theoretical), max(diag.qq_theoretical)]
    ax2.plot(lims, lims, color="gray", lw=1)
    ax2.set_xlabel("theoretical quantile")
    ax2.set_ylabel("sample quantile")
    ax2.set_title("Normal QQ")
    fig.tight_layout()
    fig.savefig(out_dir / "glm_diagnostics.png", dpi=120)
    plt.close(fig)


def write_report(snapshot: DatasetSnapshot, out_dir, top_k: int = 10,
                 alpha: float = 0.05, include_glm: bool = True,
                 config: AnalysisConfig | None = None) -> dict:
    """Render the full report; returns the summary written to summary.json."""
    config = config or AnalysisConfig()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    render_timeline(snapshot, out_dir)
    render_num_drugs(snapshot, out_dir)
    render_top_drugs(snapshot, out_dir, top_k)
    if len(snapshot.all_drugs()) >= 2:
        render_cooccurrence(snapshot, out_dir, top_k, alpha)
    if include_glm:
        render_glm(snapshot, out_dir)

    mixing = stats.category_mixing(snapshot, config.drug_categories)
    doc = stats.summary(snapshot)
    doc["category_mixing"] = {
        "within_rate": mixing.within_rate,
        "between_rate": mixing.between_rate,
        "applicable": mixing.applicable,
    }
    with open(out_dir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
    return doc

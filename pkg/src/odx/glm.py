"""Poisson regression with the canonical log link, fit by IRLS.

The response is the per-case cause-of-death drug count; predictors are age
plus indicator expansions of sex and race. Reference levels are
Sex=Female and Race=Black so the reported indicator columns line up with
the published coefficient table this reproduces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2, norm

from .dataset import DatasetSnapshot
from .errors import DomainError, SingularDesignError

SEX_REFERENCE = "Female"
RACE_REFERENCE = "Black"

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 50


@dataclass
class GlmFit:
    terms: list[str]
    coefficients: np.ndarray
    standard_errors: np.ndarray
    z_values: np.ndarray
    p_values: np.ndarray
    deviance: float
    null_deviance: float
    df_residual: int
    converged: bool
    iterations: int
    pearson_chi2: float

    def table(self) -> list[dict]:
        rows = []
        for i, term in enumerate(self.terms):
            rows.append({
                "term": term,
                "estimate": float(self.coefficients[i]),
                "std_error": float(self.standard_errors[i]),
                "z": float(self.z_values[i]),
                "p": float(self.p_values[i]),
            })
        return rows


def poisson_deviance(y: np.ndarray, mu: np.ndarray) -> float:
    """2 * (saturated loglik - model loglik); y log(y/mu) taken as 0 at y=0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(y > 0, y * np.log(y / mu), 0.0)
    return float(2.0 * np.sum(term - (y - mu)))


def poisson_loglik(beta: np.ndarray, design: np.ndarray, y: np.ndarray) -> float:
    eta = design @ beta
    mu = np.exp(eta)
    # constant log(y!) omitted: irrelevant for scores and deviance differences
    return float(np.sum(y * eta - mu))


def poisson_score(beta: np.ndarray, design: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient of the log-likelihood: X'(y - exp(X beta))."""
    return design.T @ (y - np.exp(design @ beta))


def _check_rank(design: np.ndarray, terms: list[str]) -> None:
    rank = np.linalg.matrix_rank(design)
    if rank == design.shape[1]:
        return
    # name the offending columns: greedily keep independent ones, report the rest
    kept: list[int] = []
    bad: list[str] = []
    for j in range(design.shape[1]):
        cand = design[:, kept + [j]]
        if np.linalg.matrix_rank(cand) == len(kept) + 1:
            kept.append(j)
        else:
            bad.append(terms[j])
    raise SingularDesignError(bad)


def fit_poisson(design: np.ndarray, y: np.ndarray,
                tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                terms: list[str] | None = None) -> GlmFit:
    """Iteratively reweighted least squares for the log-link Poisson model.

    Convergence is declared when the relative deviance change drops below
    ``tol``; if ``max_iter`` passes first the fit is returned with
    ``converged=False``.
    """
    design = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float)
    if design.ndim != 2:
        raise DomainError("design must be a 2-D matrix")
    n, p = design.shape
    if y.shape != (n,):
        raise DomainError(f"y must have length {n}")
    if n < p:
        raise DomainError("need at least as many rows as columns")
    if np.any(y < 0):
        raise DomainError("counts must be nonnegative")
    if terms is None:
        terms = [f"x{j}" for j in range(p)]
    _check_rank(design, terms)

    beta = np.zeros(p)
    has_intercept = np.allclose(design[:, 0], 1.0)
    if has_intercept:
        beta[0] = np.log(max(y.mean(), 1e-12))

    mu = np.exp(design @ beta)
    dev = poisson_deviance(y, mu)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        # working response z = eta + (y - mu)/mu, weights W = mu
        eta = design @ beta
        z = eta + (y - mu) / mu
        w = mu
        wx = design * w[:, None]
        info = design.T @ wx
        beta = np.linalg.solve(info, wx.T @ z)
        mu = np.exp(design @ beta)
        new_dev = poisson_deviance(y, mu)
        if abs(new_dev - dev) <= tol * (abs(dev) + tol):
            dev = new_dev
            converged = True
            break
        dev = new_dev

    info = design.T @ (design * mu[:, None])
    cov = np.linalg.inv(info)
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        zvals = np.where(se > 0, beta / se, np.inf * np.sign(beta))
    pvals = 2.0 * norm.sf(np.abs(zvals))

    mu_null = np.full(n, y.mean())
    pearson = float(np.sum((y - mu) ** 2 / mu))

    return GlmFit(
        terms=list(terms),
        coefficients=beta,
        standard_errors=se,
        z_values=zvals,
        p_values=pvals,
        deviance=dev,
        null_deviance=poisson_deviance(y, mu_null),
        df_residual=n - p,
        converged=converged,
        iterations=it,
        pearson_chi2=pearson,
    )


def gof_test(fit: GlmFit, statistic: str = "deviance") -> tuple[float, int, float]:
    """Goodness of fit: residual deviance (or Pearson X^2) against
    chi-square with df_residual degrees of freedom; upper-tail p."""
    if fit.df_residual <= 0:
        raise DomainError("df_residual must be positive")
    if statistic == "deviance":
        stat = fit.deviance
    elif statistic == "pearson":
        stat = fit.pearson_chi2
    else:
        raise DomainError(f"unknown statistic {statistic!r}")
    p = float(chi2.sf(stat, fit.df_residual))
    return stat, fit.df_residual, p


def overdispersion_test(fit: GlmFit) -> tuple[float, float]:
    """Deviance/df ratio with the chi-square upper-tail p; a ratio well
    above 1 signals variance exceeding the Poisson mean."""
    if fit.df_residual <= 0:
        raise DomainError("df_residual must be positive")
    ratio = fit.deviance / fit.df_residual
    p = float(chi2.sf(fit.deviance, fit.df_residual))
    return ratio, p


@dataclass(frozen=True)
class GlmDiagnostics:
    deviance_residuals: np.ndarray
    fitted: np.ndarray
    qq_theoretical: np.ndarray
    qq_sample: np.ndarray


def deviance_residuals(y: np.ndarray, mu: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(y > 0, y * np.log(y / mu), 0.0)
    d = 2.0 * (term - (y - mu))
    return np.sign(y - mu) * np.sqrt(np.maximum(d, 0.0))


def diagnostics(fit: GlmFit, design: np.ndarray, y: np.ndarray) -> GlmDiagnostics:
    """Deviance residuals, fitted values, and normal QQ pairs at plotting
    positions (i - 0.5)/n."""
    design = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float)
    mu = np.exp(design @ fit.coefficients)
    resid = deviance_residuals(y, mu)
    n = len(y)
    positions = (np.arange(1, n + 1) - 0.5) / n
    return GlmDiagnostics(
        deviance_residuals=resid,
        fitted=mu,
        qq_theoretical=norm.ppf(positions),
        qq_sample=np.sort(resid),
    )


@dataclass(frozen=True)
class DesignMatrix:
    matrix: np.ndarray
    response: np.ndarray
    terms: list[str]
    warnings: tuple[str, ...] = ()


def design_from_snapshot(snapshot: DatasetSnapshot) -> DesignMatrix:
    """Design for drug count ~ age + sex + race over the loaded cases.

    Sex and race expand to indicators with the reference levels dropped;
    levels absent from the data simply contribute no column.
    """
    from .dataset import RACES

    cases = snapshot.cases
    if not cases:
        raise DomainError("snapshot has no cases")
    observed_races = {c.race for c in cases}
    sex_levels = sorted({c.sex for c in cases} - {SEX_REFERENCE})
    race_levels = sorted(observed_races - {RACE_REFERENCE})
    warnings = []
    if RACE_REFERENCE not in observed_races:
        warnings.append(f"reference race {RACE_REFERENCE!r} absent from data")
    absent = [r for r in RACES if r not in observed_races and r != RACE_REFERENCE]
    if absent:
        warnings.append(f"races absent from this slice, columns dropped: {absent}")

    terms = ["(Intercept)"]
    terms += [f"Sex[{s}]" for s in sex_levels]
    terms += [f"Race[{r}]" for r in race_levels]
    terms.append("Age")

    rows = []
    y = []
    for c in cases:
        row = [1.0]
        row += [1.0 if c.sex == s else 0.0 for s in sex_levels]
        row += [1.0 if c.race == r else 0.0 for r in race_levels]
        row.append(float(c.age))
        rows.append(row)
        y.append(float(len(c.drugs)))
    return DesignMatrix(
        matrix=np.array(rows, dtype=float),
        response=np.array(y, dtype=float),
        terms=terms,
        warnings=tuple(warnings),
    )

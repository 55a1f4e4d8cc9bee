"""Cross-classified log-link Tweedie GLM fitted by IRLS.

The linear predictor of cell (i, j) is ``c + a_i + b_j`` with ``a_0 = b_0 = 0``.
Coefficients are stored as ``(c, a_1, ..., a_n, b_1, ..., b_n)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import tweedie
from ._wls import wls
from .errors import DegenerateTriangle, DomainError, NoConvergence, SingularDesign, StaleFit
from .triangle import CellIndex, Triangle, future_cells


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FitControls:
    tol: float = 1e-8
    max_iter: int = 200
    max_halvings: int = 40


@dataclass(frozen=True)
class DesignRow:
    cell: CellIndex
    x: np.ndarray


def design_row(i: int, j: int, n: int) -> np.ndarray:
    x = np.zeros(2 * n + 1)
    x[0] = 1.0
    if i > 0:
        x[i] = 1.0
    if j > 0:
        x[n + j] = 1.0
    return x


@dataclass(frozen=True)
class Design:
    observed: list[DesignRow]
    future: list[DesignRow]

    @property
    def x_observed(self) -> np.ndarray:
        return np.array([r.x for r in self.observed])

    @property
    def x_future(self) -> np.ndarray:
        return np.array([r.x for r in self.future]).reshape(len(self.future), -1)


def build_design(t: Triangle) -> Design:
    """Design rows for the observed cells and the future cells of ``t``."""
    if t.kind != "incremental":
        raise DomainError("models are fitted to incremental triangles")
    n = t.n
    if n == 0:
        raise DegenerateTriangle("a 1x1 triangle has no development to model")
    obs = [DesignRow(c, design_row(c.origin, c.dev, n)) for c in t.observed_cells()]
    fut = [DesignRow(c, design_row(c.origin, c.dev, n)) for c in future_cells(t)]
    return Design(obs, fut)


def check_family_domain(t: Triangle, p: float, rows: bool = True) -> None:
    """Raise DomainError when ``t`` cannot be fitted with power ``p``.

    Development-column sums must be positive for every power; with
    ``rows=True`` (fixed origin effects) origin-row sums must be too.
    """
    vals = t.values
    mask = t.mask
    y = vals[mask]
    if p == 2.0 and np.any(y <= 0):
        raise DomainError("Gamma response (p = 2) needs strictly positive increments")
    if 1.0 < p < 2.0 and np.any(y < 0):
        raise DomainError("compound Poisson response needs nonnegative increments")
    filled = np.where(mask, vals, 0.0)
    if np.any(filled.sum(axis=0) <= 0):
        raise DomainError("every development-column sum must be strictly positive")
    if rows and np.any(filled.sum(axis=1) <= 0):
        raise DomainError("every origin-row sum must be strictly positive")


@dataclass
class IRLSResult:
    coef: np.ndarray
    mu: np.ndarray
    deviance: float
    converged: bool
    iterations: int
    trace: list[float]


def _deviance(y, mu, p) -> float:
    return float(np.sum(tweedie.unit_deviance(y, mu, p, allow_negative=(p == 1.0))))


def start_mean(y: np.ndarray, x: np.ndarray, dev_cols: np.ndarray) -> np.ndarray:
    """Initial means: max(y, floor) on positive cells, the column mean elsewhere."""
    floor = 1e-6 * np.mean(np.abs(y)) if np.any(y) else 1.0
    col_mean = {j: y[dev_cols == j].mean() for j in np.unique(dev_cols)}
    fallback = np.array([max(col_mean[j], floor) for j in dev_cols])
    return np.where(y > 0, np.maximum(y, floor), fallback)


def irls(x, y, p, mu0, controls: FitControls = FitControls()) -> IRLSResult:
    """Log-link Tweedie IRLS with step halving on the (quasi-)deviance."""
    mu = mu0.copy()
    eta = np.log(mu)
    dev_old = _deviance(y, mu, p)
    coef_old = None
    trace = []
    converged = False
    small_steps = 0
    it = 0
    for it in range(1, controls.max_iter + 1):
        z = eta + (y - mu) / mu
        w = mu ** (2.0 - p)
        coef = wls(x, z, w).coef
        for _ in range(controls.max_halvings):
            eta_new = x @ coef
            with np.errstate(over="ignore", under="ignore"):
                mu_new = np.exp(eta_new)
            ok = np.all(np.isfinite(mu_new)) and np.all(mu_new > 0)
            dev_new = _deviance(y, mu_new, p) if ok else np.inf
            # the first step moves off the ad hoc start, so it is not compared;
            # rises below the convergence scale are round-off (saturated fits sit at 0)
            slack = controls.tol * (abs(dev_old) + 0.1)
            if np.isfinite(dev_new) and (coef_old is None or dev_new <= dev_old + slack):
                break
            if coef_old is None:
                raise SingularDesign("IRLS start produced non-finite means")
            coef = 0.5 * (coef + coef_old)
        else:
            raise SingularDesign("step halving failed to reduce the deviance")
        trace.append(dev_new)
        eta, mu = eta_new, mu_new
        delta = abs(dev_new - dev_old) / (abs(dev_new) + 0.1)
        dev_old, coef_old = dev_new, coef
        # the deviance settles at the square of the coefficient error, so
        # one extra quadratic step is taken after the first small change
        if delta < controls.tol and it > 1:
            if small_steps:
                converged = True
                break
            small_steps += 1
        else:
            small_steps = 0
    return IRLSResult(coef_old, mu, dev_old, converged, it, trace)


@dataclass
class GlmFit:
    """Result of :func:`fit_glm`.

    ``fitted`` covers the whole (n+1) x (n+1) grid; ``residuals`` holds
    Pearson residuals on observed cells and NaN elsewhere.
    """

    triangle: Triangle
    p: float
    coefficients: np.ndarray
    dispersion: float
    fitted: np.ndarray
    residuals: np.ndarray
    coef_covariance: np.ndarray
    deviance: float
    converged: bool
    iterations: int
    deviance_trace: list[float] = field(default_factory=list)
    kind: str = "glm"

    @property
    def n(self) -> int:
        return self.triangle.n

    @property
    def intercept(self) -> float:
        return float(self.coefficients[0])

    @property
    def origin_effects(self) -> np.ndarray:
        """a_0..a_n on the log scale (a_0 = 0)."""
        return np.r_[0.0, self.coefficients[1 : self.n + 1]]

    @property
    def dev_effects(self) -> np.ndarray:
        """b_0..b_n on the log scale (b_0 = 0)."""
        return np.r_[0.0, self.coefficients[self.n + 1 :]]

    def predict(self, i: int, j: int) -> float:
        return float(np.exp(self.intercept + self.origin_effects[i] + self.dev_effects[j]))

    def dispersion_summary(self) -> dict:
        return {"phi": self.dispersion}


def fit_glm(
    t: Triangle,
    p: float = 1.0,
    controls: FitControls | None = None,
    strict: bool = False,
    phi: float | None = None,
) -> GlmFit:
    """Fit the origin + development factor Tweedie GLM to an incremental triangle.

    The dispersion is the Pearson estimate with N - (2n + 1) degrees of
    freedom unless ``phi`` fixes it; the mean fit does not depend on it. When the iteration cap is hit the fit is returned with
    ``converged=False`` and a :class:`ConvergenceWarning`; pass
    ``strict=True`` to raise :class:`NoConvergence` instead.
    """
    controls = controls or FitControls()
    p = tweedie.check_power(p)
    if phi is not None and not phi > 0:
        raise DomainError("a fixed dispersion must be positive")
    design = build_design(t)
    check_family_domain(t, p)
    x = design.x_observed
    y = t.observed_values()
    devs = np.array([r.cell.dev for r in design.observed])
    res = irls(x, y, p, start_mean(y, x, devs), controls)

    mu = res.mu
    n_obs, k = x.shape
    pearson = (y - mu) / np.sqrt(mu**p)
    dof = n_obs - k
    if phi is None:
        phi = float(np.sum(pearson**2) / dof) if dof > 0 else float("nan")
    phi = float(phi)
    cov = phi * wls(x, np.log(mu), mu ** (2.0 - p)).unscaled_covariance()

    n = t.n
    rows, cols = np.indices((n + 1, n + 1))
    coef = res.coef
    eta_grid = coef[0] + np.r_[0.0, coef[1 : n + 1]][rows] + np.r_[0.0, coef[n + 1 :]][cols]
    resid = np.full((n + 1, n + 1), np.nan)
    for r, e in zip(design.observed, pearson):
        resid[r.cell.origin, r.cell.dev] = e

    fit = GlmFit(
        triangle=t,
        p=p,
        coefficients=coef,
        dispersion=phi,
        fitted=np.exp(eta_grid),
        residuals=resid,
        coef_covariance=cov,
        deviance=res.deviance,
        converged=res.converged,
        iterations=res.iterations,
        deviance_trace=res.trace,
    )
    if not res.converged:
        msg = f"IRLS did not converge in {controls.max_iter} iterations"
        if strict:
            raise NoConvergence(msg, fit=fit)
        warnings.warn(msg, ConvergenceWarning, stacklevel=2)
    return fit


@dataclass(frozen=True)
class MsepResult:
    """Analytic prediction error; ``per_origin`` and ``total`` are RMSEPs."""

    per_origin: np.ndarray
    total: float
    process_variance: np.ndarray
    estimation_variance: np.ndarray
    total_process_variance: float
    total_estimation_variance: float


def glm_msep_analytic(fit: GlmFit) -> MsepResult:
    """Process plus estimation variance of the reserve, per origin and in total.

    MSEP(R) = sum phi * mu^p + g' Cov(beta) g, where g sums mu * x over the
    future cells being aggregated.
    """
    if not fit.converged:
        raise StaleFit("analytic MSEP needs a converged fit")
    n = fit.n
    p = fit.p
    cov = fit.coef_covariance
    proc = np.zeros(n + 1)
    est = np.zeros(n + 1)
    g_total = np.zeros(cov.shape[0])
    for i in range(n + 1):
        g = np.zeros(cov.shape[0])
        for j in range(n + 1 - i, n + 1):
            mu = fit.fitted[i, j]
            proc[i] += fit.dispersion * mu**p
            g += mu * design_row(i, j, n)
        est[i] = g @ cov @ g
        g_total += g
    total_proc = float(proc.sum())
    total_est = float(g_total @ cov @ g_total)
    return MsepResult(
        per_origin=np.sqrt(proc + np.maximum(est, 0.0)),
        total=float(np.sqrt(total_proc + max(total_est, 0.0))),
        process_variance=proc,
        estimation_variance=est,
        total_process_variance=total_proc,
        total_estimation_variance=total_est,
    )

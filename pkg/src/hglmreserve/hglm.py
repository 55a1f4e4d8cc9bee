"""Hierarchical GLM with Gamma random origin-year effects, fitted by h-likelihood.

Conditionally on ``u_i``, ``Y_ij`` is Tweedie with mean
``exp(c + b_j) * u_i`` and variance ``phi * mu**p``. The ``u_i`` are
Gamma-distributed with mean 1 and dispersion ``phi_u``; on the log scale
``v_i = log(u_i)``.

Estimation treats ``v`` as extra regression coefficients in an augmented
GLM. The data rows use design ``[X | Z]``; one pseudo-observation per
origin year, equal to 1, is added with design ``[0 | I]``. For Gamma random
effects the pseudo-observations have variance function ``V(u) = u`` and
deviance ``2 * (u - 1 - log u)``. Dispersions are re-estimated from
leverage-corrected deviance components until both settle.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import tweedie
from ._wls import wls
from .errors import DegenerateTriangle, DomainError, NoConvergence, SingularDesign
from .glm import ConvergenceWarning, FitControls, check_family_domain, irls, start_mean
from .triangle import Triangle

DISPERSION_FLOOR = 1e-10
# consecutive phi_u decreases before testing for a boundary estimate
BOUNDARY_RUN = 8
BOUNDARY_GRID = 16
MAX_JUMP = 1.0


@dataclass(frozen=True)
class HglmSpec:
    p: float = 1.0
    p_u: float = 2.0
    psi_u: float = 1.0
    fix_phi: float | None = None
    fix_phi_u: float | None = None

    def __post_init__(self):
        tweedie.check_power(self.p)
        if float(self.p_u) != 2.0:
            raise DomainError("only Gamma random effects (p_u = 2) are implemented")
        if self.psi_u != 1.0:
            raise DomainError("the random-effect prior mean is fixed at 1")
        for name in ("fix_phi", "fix_phi_u"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise DomainError(f"{name} must be positive")


@dataclass(frozen=True)
class HglmControls:
    tol: float = 1e-9  # on the augmented coefficients, log scale
    max_inner: int = 200
    dispersion_tol: float = 1e-6
    max_outer: int = 50
    max_halvings: int = 40


@dataclass
class HglmFit:
    triangle: Triangle
    spec: HglmSpec
    fixed: np.ndarray  # (c, b_1, ..., b_n)
    random: np.ndarray  # u_0..u_n
    dispersion: float
    dispersion_u: float
    fitted: np.ndarray
    residuals: np.ndarray
    leverages: np.ndarray
    converged: bool
    iterations: int
    inner_iterations: int = 0
    notes: list[str] = field(default_factory=list)
    kind: str = "hglm"

    @property
    def p(self) -> float:
        return self.spec.p

    @property
    def n(self) -> int:
        return self.triangle.n

    @property
    def intercept(self) -> float:
        return float(self.fixed[0])

    @property
    def dev_effects(self) -> np.ndarray:
        return np.r_[0.0, self.fixed[1:]]

    @property
    def log_random(self) -> np.ndarray:
        return np.log(self.random)

    def predict(self, i: int, j: int) -> float:
        return float(np.exp(self.intercept + self.dev_effects[j]) * self.random[i])

    def dispersion_summary(self) -> dict:
        return {"phi": self.dispersion, "phi_u": self.dispersion_u}


def random_effect_estimates(fit: HglmFit) -> list[tuple[int, float, float]]:
    """``(origin, u_i, v_i)`` for every origin year, including 0."""
    return [(i, float(u), float(np.log(u))) for i, u in enumerate(fit.random)]


def _designs(t: Triangle):
    n = t.n
    cells = t.observed_cells()
    x = np.zeros((len(cells), n + 1))
    z = np.zeros((len(cells), n + 1))
    for k, c in enumerate(cells):
        x[k, 0] = 1.0
        if c.dev > 0:
            x[k, c.dev] = 1.0
        z[k, c.origin] = 1.0
    aug = np.block([[x, z], [np.zeros((n + 1, n + 1)), np.eye(n + 1)]])
    return cells, x, z, aug


def _random_deviance(u):
    return 2.0 * (u - 1.0 - np.log(u))


class _Augmented:
    """Mean step of the h-likelihood fit for fixed dispersions."""

    def __init__(self, y, aug, p):
        self.y = y
        self.aug = aug
        self.p = p
        self.n_obs = len(y)

    def split(self, theta):
        with np.errstate(over="ignore", under="ignore"):
            eta = self.aug @ theta
            return eta, np.exp(eta[: self.n_obs]), np.exp(eta[self.n_obs :])

    def weights(self, mu, u, phi, phi_u):
        return np.r_[mu ** (2.0 - self.p) / phi, u / phi_u]

    def objective(self, mu, u, phi, phi_u) -> float:
        d = tweedie.unit_deviance(self.y, mu, self.p, allow_negative=(self.p == 1.0))
        return float(np.sum(d) / phi + np.sum(_random_deviance(u)) / phi_u)

    def solve(self, theta, phi, phi_u, controls: HglmControls):
        eta, mu, u = self.split(theta)
        obj = self.objective(mu, u, phi, phi_u)
        for it in range(1, controls.max_inner + 1):
            z = np.r_[eta[: self.n_obs] + (self.y - mu) / mu, eta[self.n_obs :] + (1.0 - u) / u]
            new = wls(self.aug, z, self.weights(mu, u, phi, phi_u)).coef
            for _ in range(controls.max_halvings):
                eta_n, mu_n, u_n = self.split(new)
                ok = np.all(np.isfinite(eta_n)) and np.all(mu_n > 0) and np.all(u_n > 0)
                obj_n = self.objective(mu_n, u_n, phi, phi_u) if ok else np.inf
                if obj_n <= obj + 1e-12 * (abs(obj) + 1.0):
                    break
                new = 0.5 * (new + theta)
            else:
                raise SingularDesign("step halving failed in the augmented mean step")
            step = np.max(np.abs(new - theta))
            theta, eta, mu, u, obj = new, eta_n, mu_n, u_n, obj_n
            if step < controls.tol:
                return theta, it, True
        return theta, controls.max_inner, False


def _initial_state(t: Triangle, y, x, cells, p, controls: HglmControls):
    """Column-only GLM for the fixed effects, v = 0, Pearson-moment dispersions."""
    n = t.n
    devs = np.array([c.dev for c in cells])
    origins = np.array([c.origin for c in cells])
    res = irls(x, y, p, start_mean(y, x, devs), FitControls(max_halvings=controls.max_halvings))
    mu = res.mu
    dof = max(len(y) - x.shape[1], 1)
    phi0 = float(np.sum((y - mu) ** 2 / mu**p) / dof)
    ratio = np.array([y[origins == i].sum() / mu[origins == i].sum() for i in range(n + 1)])
    ratio = np.maximum(ratio, 0.1)
    phi_u0 = float(np.mean((ratio - 1.0) ** 2 / ratio))
    theta = np.r_[res.coef, np.zeros(n + 1)]
    return theta, max(phi0, DISPERSION_FLOOR), max(phi_u0, 1e-6)


def _dispersion_step(model: _Augmented, theta, phi, phi_u, spec: HglmSpec):
    """Leverage-corrected deviance updates of (phi, phi_u) at the current means."""
    n_obs = model.n_obs
    _, mu, u = model.split(theta)
    q = wls(model.aug, np.zeros(len(model.aug)), model.weights(mu, u, phi, phi_u)).leverages()
    q = np.minimum(q, 1.0 - 1e-12)
    new_phi, new_phi_u = phi, phi_u
    if spec.fix_phi is None:
        d = tweedie.unit_deviance(model.y, mu, model.p, allow_negative=(model.p == 1.0))
        new_phi = max(float(np.sum(d) / np.sum(1.0 - q[:n_obs])), DISPERSION_FLOOR)
    if spec.fix_phi_u is None:
        new_phi_u = float(np.sum(_random_deviance(u)) / np.sum(1.0 - q[n_obs:]))
    return new_phi, new_phi_u


def _extrapolate(history) -> float:
    """Aitken extrapolation of three successive ``log(phi_u)`` iterates.

    When ``phi_u`` is weakly identified the update contracts at a rate close
    to one; ``phi`` follows within a step or two, so only ``phi_u`` is
    extrapolated. Steps that do not shrink geometrically, with a ratio in
    (0, 0.99), are left alone, and jumps are capped at a factor of
    ``e**MAX_JUMP``.
    """
    x0, x1, x2 = history
    d1, d2 = x1 - x0, x2 - x1
    if d1 == 0:
        return x2
    r = d2 / d1
    if not 0 < r < 0.99:
        return x2
    return max(x2 + float(np.clip(d2 * r / (1 - r), -MAX_JUMP, MAX_JUMP)), float(np.log(DISPERSION_FLOOR)))


def _boundary_attracts(model: _Augmented, theta, phi, phi_u, spec, controls) -> bool:
    """True when the phi_u update contracts everywhere between ``phi_u`` and the floor.

    Near zero the update behaves like ``rho * phi_u``; when ``rho < 1`` the
    iteration creeps towards zero without ever meeting the tolerance. If the
    update ratio stays below one on a log grid down to the floor there is
    no interior fixed point left to find, and the estimate is the boundary.
    """
    grid = np.geomspace(phi_u, DISPERSION_FLOOR, BOUNDARY_GRID)
    for g in grid[1:]:
        try:
            theta, _, ok = model.solve(theta, phi, g, controls)
        except SingularDesign:
            return False
        if not ok or _dispersion_step(model, theta, phi, g, spec)[1] >= g:
            return False
    return True


def fit_hglm(
    t: Triangle,
    spec: HglmSpec | None = None,
    controls: HglmControls | None = None,
    strict: bool = False,
) -> HglmFit:
    """Fit the Tweedie-Gamma HGLM by the h-likelihood augmented-GLM method.

    Alternates a mean step (augmented IRLS to convergence) with a dispersion
    step that regresses the deviance components ``d / (1 - q)`` on an
    intercept in a Gamma GLM with prior weights ``(1 - q) / 2``. For an
    intercept-only model that fit is ``sum(d) / sum(1 - q)``, which is what
    is computed. Fixed dispersions in ``spec`` are left untouched.
    """
    spec = spec or HglmSpec()
    controls = controls or HglmControls()
    if t.kind != "incremental":
        raise DomainError("models are fitted to incremental triangles")
    if t.n < 1:
        raise DegenerateTriangle("a 1x1 triangle has no development to model")
    p = spec.p
    check_family_domain(t, p, rows=False)

    n = t.n
    cells, x, z, aug = _designs(t)
    y = t.observed_values()
    theta, phi, phi_u = _initial_state(t, y, x, cells, p, controls)
    if spec.fix_phi is not None:
        phi = float(spec.fix_phi)
    if spec.fix_phi_u is not None:
        phi_u = float(spec.fix_phi_u)

    model = _Augmented(y, aug, p)
    notes: list[str] = []
    converged = False
    inner_total = 0
    outer = 0
    free = spec.fix_phi is None or spec.fix_phi_u is None
    falling = 0
    history: list[float] = []
    for outer in range(1, controls.max_outer + 1):
        theta, inner, inner_ok = model.solve(theta, phi, phi_u, controls)
        inner_total += inner
        if not free:
            converged = inner_ok
            break
        new_phi, new_phi_u = _dispersion_step(model, theta, phi, phi_u, spec)
        if new_phi_u < DISPERSION_FLOOR:
            new_phi_u = DISPERSION_FLOOR
            if "FullShrinkage" not in notes:
                notes.append("FullShrinkage")
        falling = falling + 1 if new_phi_u < phi_u else 0
        if falling >= BOUNDARY_RUN and new_phi_u > DISPERSION_FLOOR:
            if _boundary_attracts(model, theta, new_phi, new_phi_u, spec, controls):
                new_phi_u = DISPERSION_FLOOR
                notes.append("FullShrinkage")
                history.clear()
            falling = 0
        change = max(abs(new_phi - phi) / phi, abs(new_phi_u - phi_u) / phi_u)
        phi, phi_u = new_phi, new_phi_u
        if change < controls.dispersion_tol and inner_ok:
            theta, inner, inner_ok = model.solve(theta, phi, phi_u, controls)
            inner_total += inner
            converged = inner_ok
            break
        if spec.fix_phi_u is not None:
            continue
        history.append(float(np.log(phi_u)))
        if phi_u <= DISPERSION_FLOOR:
            history.clear()
        elif len(history) == 3:
            phi_u = float(np.exp(_extrapolate(history)))
            history.clear()

    _, mu, u = model.split(theta)
    leverages = wls(aug, np.zeros(len(aug)), model.weights(mu, u, phi, phi_u)).leverages()
    fixed = theta[: n + 1]
    rows, cols = np.indices((n + 1, n + 1))
    fitted = np.exp(fixed[0] + np.r_[0.0, fixed[1:]][cols]) * u[rows]
    resid = np.full((n + 1, n + 1), np.nan)
    for c, r in zip(cells, tweedie.pearson_residual(y, mu, p)):
        resid[c.origin, c.dev] = r

    fit = HglmFit(
        triangle=t,
        spec=spec,
        fixed=fixed,
        random=u,
        dispersion=phi,
        dispersion_u=phi_u,
        fitted=fitted,
        residuals=resid,
        leverages=leverages,
        converged=converged,
        iterations=outer,
        inner_iterations=inner_total,
        notes=notes,
    )
    if not converged:
        msg = f"h-likelihood fit did not converge in {controls.max_outer} outer iterations"
        if strict:
            raise NoConvergence(msg, fit=fit)
        warnings.warn(msg, ConvergenceWarning, stacklevel=2)
    return fit

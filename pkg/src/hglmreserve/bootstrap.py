"""Residual bootstrap of reserve prediction error.

Each replicate resamples the base fit's Pearson residuals over the observed
cells, rebuilds a pseudo-triangle, refits the model, predicts the future
cells and simulates their outcome from the Tweedie distribution around the
base fit's means. The spread of predicted-minus-simulated future
totals gives the RMSEP and the absolute-error quantiles.

Replicate ``b`` draws from its own Philox stream (key = seed, counter
jumped ``b`` times), so results do not depend on scheduling.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import tweedie
from .errors import BaseFitError, DomainError, FitError, ReservingError, TooManyFailures
from .model import ModelSpec, fit_model
from .triangle import Triangle

PROCESS_AUTO = "auto"
PROCESS_REPLICATE = "replicate"
PROCESS_BASE = "base"


@dataclass(frozen=True)
class BootstrapConfig:
    """Bootstrap settings.

    ``scale_residuals`` multiplies residuals by sqrt(N / (N - k)) before
    resampling. ``process_dispersion`` selects the dispersion used to
    simulate future cells: the refitted replicate's (``"replicate"``), the
    base fit's (``"base"``), or ``"auto"``: base for the GLM, whose refitted
    Pearson dispersion shrinks by roughly (N - k) / N under unscaled
    residuals, and replicate for the HGLM.
    """

    B: int = 1000
    seed: int = 0
    model: ModelSpec = field(default_factory=ModelSpec)
    drop_zero_residuals: bool = False
    max_redraws: int = 100
    scale_residuals: bool = False
    process_dispersion: str = PROCESS_AUTO

    def __post_init__(self):
        if self.B < 1:
            raise DomainError("B must be at least 1")
        if self.max_redraws < 0:
            raise DomainError("max_redraws must be nonnegative")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.process_dispersion not in (PROCESS_AUTO, PROCESS_REPLICATE, PROCESS_BASE):
            raise DomainError(f"unknown process_dispersion {self.process_dispersion!r}")


@dataclass
class BootstrapResult:
    """Per-replicate future sums.

    ``predicted`` and ``simulated`` have shape (B, n + 1); column i sums
    origin year i's future cells. Totals add the columns in origin order.
    """

    config: BootstrapConfig
    predicted: np.ndarray
    simulated: np.ndarray
    dispersions: np.ndarray  # (B,) replicate phi
    dispersions_u: np.ndarray  # (B,) replicate phi_u, NaN for the GLM
    failures: int
    base_summary: dict
    degraded: bool = False

    @property
    def B(self) -> int:
        return self.predicted.shape[0]

    @property
    def predicted_total(self) -> np.ndarray:
        return _row_totals(self.predicted)

    @property
    def simulated_total(self) -> np.ndarray:
        return _row_totals(self.simulated)

    def errors(self) -> np.ndarray:
        """Predicted minus simulated, shape (B, n + 2); last column is the total."""
        diff = self.predicted - self.simulated
        return np.column_stack([diff, self.predicted_total - self.simulated_total])

    def replicate_csv(self) -> str:
        """``b,origin,predicted_sum,simulated_sum`` rows; origin ``total`` for totals."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["b", "origin", "predicted_sum", "simulated_sum"])
        pt, st = self.predicted_total, self.simulated_total
        for b in range(self.B):
            for i in range(self.predicted.shape[1]):
                w.writerow([b, i, repr(float(self.predicted[b, i])), repr(float(self.simulated[b, i]))])
            w.writerow([b, "total", repr(float(pt[b])), repr(float(st[b]))])
        return buf.getvalue()


def _row_totals(a: np.ndarray) -> np.ndarray:
    out = np.zeros(a.shape[0])
    for i in range(a.shape[1]):
        out = out + a[:, i]
    return out


def process_uses_base(cfg: BootstrapConfig) -> bool:
    if cfg.process_dispersion == PROCESS_AUTO:
        return cfg.model.kind == "glm"
    return cfg.process_dispersion == PROCESS_BASE


def replicate_rng(seed: int, b: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed).jumped(b))


def residual_pool(base, drop_zero: bool = False, scale: bool = False) -> np.ndarray:
    """Observed-cell Pearson residuals of ``base`` in origin-then-dev order."""
    t = base.triangle
    pool = base.residuals[t.mask]
    if drop_zero:
        tiny = 1e-8 * np.sqrt(np.mean(pool**2))
        pool = pool[np.abs(pool) > tiny]
    if scale:
        n_obs = int(t.mask.sum())
        k = 2 * t.n + 1
        pool = pool * np.sqrt(n_obs / (n_obs - k))
    return pool


def pseudo_triangle(base, residuals: np.ndarray) -> Triangle:
    """Observed cells ``r * sqrt(mu^p) + mu`` from residuals in origin-then-dev order."""
    t = base.triangle
    mask = t.mask
    values = np.full(t.values.shape, np.nan)
    values[mask] = tweedie.from_pearson_residual(residuals, base.fitted[mask], base.p)
    return Triangle(values)


@dataclass
class _Replicate:
    predicted: np.ndarray
    simulated: np.ndarray
    phi: float
    phi_u: float
    failures: int
    ok: bool


def _future_by_origin(values: np.ndarray, future: np.ndarray) -> np.ndarray:
    return np.where(future, values, 0.0).sum(axis=1)


def _one_replicate(b: int, t: Triangle, base, pool: np.ndarray, cfg: BootstrapConfig) -> _Replicate:
    rng = replicate_rng(cfg.seed, b)
    future = ~t.mask
    n_obs = int(t.mask.sum())
    base_future = base.fitted[future]
    failures = 0
    while True:
        draw = pool[rng.integers(0, len(pool), size=n_obs)]
        try:
            pseudo = pseudo_triangle(base, draw)
            refit = fit_model(pseudo, cfg.model, strict=True)
            if not np.all(np.isfinite(refit.fitted)) or not refit.dispersion > 0:
                raise FitError("non-finite refit")
        except (FitError, DomainError):
            failures += 1
            if failures > cfg.max_redraws:
                return _Replicate(None, None, np.nan, np.nan, failures, False)
            continue
        break
    phi = base.dispersion if process_uses_base(cfg) else refit.dispersion
    sim = np.zeros(t.values.shape)
    sim[future] = tweedie.sample(base_future, phi, base.p, rng)
    return _Replicate(
        predicted=_future_by_origin(refit.fitted, future),
        simulated=sim.sum(axis=1),
        phi=refit.dispersion,
        phi_u=getattr(refit, "dispersion_u", np.nan),
        failures=failures,
        ok=True,
    )


def bootstrap_run(t: Triangle, cfg: BootstrapConfig, threads: int = 1) -> BootstrapResult:
    """Run ``cfg.B`` bootstrap replicates.

    Raises :class:`BaseFitError` when the model cannot be fitted to ``t``,
    and :class:`TooManyFailures` (carrying the replicates completed before
    the failing one as ``.result``) when a replicate exhausts its redraws.
    """
    try:
        base = fit_model(t, cfg.model, strict=True)
    except ReservingError as exc:
        raise BaseFitError(f"base fit failed: {exc}") from exc
    pool = residual_pool(base, cfg.drop_zero_residuals, cfg.scale_residuals)

    def work(b):
        return _one_replicate(b, t, base, pool, cfg)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            reps = list(ex.map(work, range(cfg.B)))
    else:
        reps = [work(b) for b in range(cfg.B)]

    done = []
    degraded = False
    for rep in reps:
        if not rep.ok:
            degraded = True
            break
        done.append(rep)
    failures = sum(r.failures for r in reps[: len(done) + (1 if degraded else 0)])
    size = t.size
    result = BootstrapResult(
        config=cfg,
        predicted=np.array([r.predicted for r in done]).reshape(len(done), size),
        simulated=np.array([r.simulated for r in done]).reshape(len(done), size),
        dispersions=np.array([r.phi for r in done]),
        dispersions_u=np.array([r.phi_u for r in done]),
        failures=failures,
        base_summary=base.dispersion_summary(),
        degraded=degraded,
    )
    if degraded:
        raise TooManyFailures(
            f"replicate {len(done)} exceeded {cfg.max_redraws} redraws; {len(done)} replicates kept",
            result=result,
        )
    return result


@dataclass(frozen=True)
class ErrorSummary:
    """Per-origin values (index = origin year) plus the total."""

    per_origin: np.ndarray
    total: float


def rmsep(res: BootstrapResult) -> ErrorSummary:
    """sqrt(mean((predicted - simulated)**2)) per origin year and in total."""
    err = res.errors()
    values = np.sqrt(np.mean(err**2, axis=0))
    return ErrorSummary(values[:-1], float(values[-1]))


@dataclass(frozen=True)
class QuantileTable:
    probs: np.ndarray
    per_origin: np.ndarray  # (len(probs), n + 1)
    total: np.ndarray  # (len(probs),)


def error_quantiles(res: BootstrapResult, probs=(0.5, 0.75, 0.9, 0.95)) -> QuantileTable:
    """Empirical quantiles of |predicted - simulated| (linear interpolation, h = (B-1)p + 1)."""
    probs = np.asarray(probs, dtype=float)
    if np.any((probs <= 0) | (probs >= 1)):
        raise DomainError("quantile probabilities must lie strictly inside (0, 1)")
    if np.any(np.diff(probs) < 0):
        raise DomainError("quantile probabilities must be sorted ascending")
    q = np.quantile(np.abs(res.errors()), probs, axis=0, method="linear")
    return QuantileTable(probs, q[:, :-1], q[:, -1])


def config_dict(cfg: BootstrapConfig) -> dict:
    return asdict(cfg)

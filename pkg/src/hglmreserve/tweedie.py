"""Tweedie family helpers for powers 1 <= p <= 2.

p = 1 is the over-dispersed Poisson, p = 2 the Gamma, and 1 < p < 2 the
compound Poisson-Gamma. All functions broadcast over numpy arrays.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError


def check_power(p) -> float:
    p = float(p)
    if not 1.0 <= p <= 2.0:
        raise DomainError(f"Tweedie power must lie in [1, 2], got {p}")
    return p


def _positive_mean(mu):
    mu = np.asarray(mu, dtype=float)
    if np.any(~(mu > 0)):
        raise DomainError("Tweedie mean must be strictly positive")
    return mu


def variance_function(mu, p):
    """V(mu) = mu**p."""
    p = check_power(p)
    mu = _positive_mean(mu)
    out = mu**p
    return float(out) if out.ndim == 0 else out


def _xlogy_ratio(y, mu):
    # y * log(y / mu), taken as 0 at y = 0
    safe = np.where(y == 0, 1.0, np.abs(y))
    return np.where(y == 0, 0.0, y * np.log(safe / mu))


def unit_deviance(y, mu, p, allow_negative: bool = False):
    """Tweedie unit deviance d(y, mu).

    Parameters
    ----------
    y, mu : array_like
        Observation(s) and mean(s); ``mu`` must be positive.
    p : float
        Power in [1, 2].
    allow_negative : bool
        For p = 1 only: accept y < 0 and return the quasi-deviance
        ``2 * (y * log(|y| / mu) - (y - mu))``. It differs from the true
        quasi-likelihood deviance by a term depending on y alone, so it is
        fine for comparing means but may be negative.
    """
    p = check_power(p)
    y = np.asarray(y, dtype=float)
    mu = _positive_mean(mu)
    if p == 1.0:
        if np.any(y < 0) and not allow_negative:
            raise DomainError("Poisson deviance needs y >= 0")
        out = 2.0 * (_xlogy_ratio(y, mu) - (y - mu))
    elif p == 2.0:
        if np.any(y <= 0):
            raise DomainError("Gamma deviance needs y > 0")
        out = 2.0 * ((y - mu) / mu - np.log(y / mu))
    else:
        if np.any(y < 0):
            raise DomainError("compound Poisson deviance needs y >= 0")
        out = 2.0 * (
            np.maximum(y, 0.0) ** (2 - p) / ((1 - p) * (2 - p))
            - y * mu ** (1 - p) / (1 - p)
            + mu ** (2 - p) / (2 - p)
        )
    out = np.where(y == mu, 0.0, out)
    # round-off can leave tiny negatives near y == mu
    if not allow_negative:
        out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


def pearson_residual(y, mu, p):
    """(y - mu) / sqrt(mu**p)."""
    p = check_power(p)
    y = np.asarray(y, dtype=float)
    mu = _positive_mean(mu)
    out = (y - mu) / np.sqrt(mu**p)
    return float(out) if out.ndim == 0 else out


def from_pearson_residual(r, mu, p):
    """Inverse of :func:`pearson_residual`: r * sqrt(mu**p) + mu."""
    p = check_power(p)
    mu = _positive_mean(mu)
    out = np.asarray(r, dtype=float) * np.sqrt(mu**p) + mu
    return float(out) if out.ndim == 0 else out


# beyond this rate a Poisson count is drawn as a rounded normal; the
# relative skewness 1 / sqrt(rate) is then below 1e-6
POISSON_NORMAL_RATE = 1e12


def _poisson(rng: np.random.Generator, rate) -> np.ndarray:
    rate = np.asarray(rate, dtype=float)
    big = rate > POISSON_NORMAL_RATE
    if not np.any(big):
        return np.asarray(rng.poisson(rate), dtype=float)
    out = np.empty(rate.shape)
    out[~big] = rng.poisson(rate[~big])
    out[big] = np.rint(rng.normal(rate[big], np.sqrt(rate[big])))
    return out


def sample(mu, phi, p, rng: np.random.Generator, size=None):
    """Draw from Tweedie(mu, phi, p) with mean mu and variance phi * mu**p.

    p = 1 is drawn as ``phi * Poisson(mu / phi)``, p = 2 as a Gamma with
    shape ``1 / phi``, and 1 < p < 2 as an exact Poisson sum of Gammas that
    returns exactly 0 when the count is 0. Poisson counts with rates above
    ``POISSON_NORMAL_RATE`` (near-zero dispersions) come from a rounded
    normal with the same mean and variance.
    """
    p = check_power(p)
    mu = _positive_mean(mu)
    if not phi > 0:
        raise DomainError(f"dispersion must be positive, got {phi}")
    shape = np.broadcast(mu, np.empty(size) if size is not None else mu).shape
    mu = np.broadcast_to(mu, shape)
    if p == 1.0:
        out = phi * _poisson(rng, mu / phi)
    elif p == 2.0:
        out = rng.gamma(1.0 / phi, phi * mu)
    else:
        rate = mu ** (2 - p) / (phi * (2 - p))
        alpha = (2 - p) / (p - 1)
        scale = phi * (p - 1) * mu ** (p - 1)
        counts = _poisson(rng, rate)
        out = np.zeros(shape)
        hit = counts > 0
        if np.any(hit):
            out[hit] = rng.gamma(counts[hit] * alpha, scale[hit])
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out

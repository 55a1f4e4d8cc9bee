"""Weighted least squares through a column-pivoted QR factorisation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import SingularDesign

PIVOT_TOL = 1e-10


@dataclass
class WLSSolution:
    coef: np.ndarray
    q: np.ndarray  # thin Q of sqrt(W) X
    r: np.ndarray
    piv: np.ndarray

    def leverages(self) -> np.ndarray:
        """Diagonal of the hat matrix sqrt(W) X (X'WX)^-1 X' sqrt(W)."""
        return np.einsum("ij,ij->i", self.q, self.q)

    def unscaled_covariance(self) -> np.ndarray:
        """(X'WX)^-1 in the original column order."""
        k = self.r.shape[1]
        rinv = scipy.linalg.solve_triangular(self.r, np.eye(k))
        cov_p = rinv @ rinv.T
        cov = np.empty_like(cov_p)
        cov[np.ix_(self.piv, self.piv)] = cov_p
        return cov


def wls(x: np.ndarray, z: np.ndarray, w: np.ndarray) -> WLSSolution:
    """Minimise sum w * (z - x @ b)**2; raise SingularDesign on rank loss."""
    sw = np.sqrt(w)
    a = x * sw[:, None]
    if not np.all(np.isfinite(a)) or not np.all(np.isfinite(z)):
        raise SingularDesign("non-finite values in the working system")
    q, r, piv = scipy.linalg.qr(a, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0 or np.any(diag < PIVOT_TOL * diag[0]):
        raise SingularDesign("working least-squares system is rank deficient")
    coef_p = scipy.linalg.solve_triangular(r, q.T @ (z * sw))
    coef = np.empty_like(coef_p)
    coef[piv] = coef_p
    return WLSSolution(coef, q, r, piv)

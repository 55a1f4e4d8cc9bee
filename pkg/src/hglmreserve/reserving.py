"""Reserve point predictions from fitted GLM or HGLM models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StaleFit
from .glm import GlmFit
from .hglm import HglmFit
from .triangle import CellIndex, future_cells

Fit = GlmFit | HglmFit


def _check(fit: Fit, allow_unconverged: bool) -> None:
    if not fit.converged and not allow_unconverged:
        raise StaleFit("fit did not converge; pass allow_unconverged=True to use it anyway")


def predict_cell(fit: Fit, cell: CellIndex | tuple[int, int], allow_unconverged: bool = False) -> float:
    """Predicted mean of one cell.

    GLM: ``exp(c + a_i + b_j)``; HGLM: ``exp(c + b_j) * u_i``.
    """
    _check(fit, allow_unconverged)
    i, j = (cell.origin, cell.dev) if isinstance(cell, CellIndex) else cell
    return fit.predict(i, j)


@dataclass(frozen=True)
class ReserveReport:
    per_origin: np.ndarray  # index i = origin year; entry 0 is always 0
    total: float
    model_kind: str

    def rows(self, include_zero: bool = False):
        start = 0 if include_zero else 1
        return [(i, float(self.per_origin[i])) for i in range(start, len(self.per_origin))]

    def as_dict(self) -> dict:
        return {
            "model": self.model_kind,
            "per_origin": [{"origin": i, "reserve": r} for i, r in self.rows()],
            "total": self.total,
        }


def reserve_report(fit: Fit, allow_unconverged: bool = False) -> ReserveReport:
    """Sum predicted future cells per origin year and in total."""
    _check(fit, allow_unconverged)
    size = fit.triangle.size
    per_origin = np.zeros(size)
    for c in future_cells(fit.triangle):
        per_origin[c.origin] += fit.predict(c.origin, c.dev)
    total = 0.0
    for r in per_origin:
        total += r
    return ReserveReport(per_origin, float(total), fit.kind)

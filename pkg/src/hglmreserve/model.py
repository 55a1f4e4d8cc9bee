"""Model selection shared by the reserving, bootstrap and CLI layers."""

from __future__ import annotations

from dataclasses import dataclass

from . import tweedie
from .errors import DomainError
from .glm import FitControls, GlmFit, fit_glm
from .hglm import HglmControls, HglmFit, HglmSpec, fit_hglm
from .triangle import Triangle

GLM = "glm"
HGLM = "hglm"


@dataclass(frozen=True)
class ModelSpec:
    kind: str = GLM
    p: float = 1.0
    p_u: float = 2.0
    fix_phi: float | None = None
    fix_phi_u: float | None = None

    def __post_init__(self):
        if self.kind not in (GLM, HGLM):
            raise DomainError(f"model kind must be 'glm' or 'hglm', got {self.kind!r}")
        tweedie.check_power(self.p)
        if self.fix_phi is not None and not self.fix_phi > 0:
            raise DomainError("fix_phi must be positive")
        if self.kind == HGLM:
            self.hglm_spec()
        elif self.fix_phi_u is not None:
            raise DomainError("fix_phi_u needs the hglm model; the glm has no random effects")

    def hglm_spec(self) -> HglmSpec:
        return HglmSpec(p=self.p, p_u=self.p_u, fix_phi=self.fix_phi, fix_phi_u=self.fix_phi_u)


def fit_model(t: Triangle, spec: ModelSpec, strict: bool = False) -> GlmFit | HglmFit:
    if spec.kind == GLM:
        return fit_glm(t, spec.p, FitControls(), strict=strict, phi=spec.fix_phi)
    return fit_hglm(t, spec.hglm_spec(), HglmControls(), strict=strict)

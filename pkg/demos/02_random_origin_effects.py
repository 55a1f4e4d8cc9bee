"""
Random origin-year effects and shrinkage
========================================

Replace the fixed origin-year parameters by Gamma random effects
``u_i`` with mean one and fit by h-likelihood. The dispersion of the
random effects, ``phi_u``, controls how far each year may move away from
the common level: at zero every ``u_i`` is one, and as it grows the fit
approaches the fixed-effects GLM.
"""

from pathlib import Path

import numpy as np

from hglmreserve import HglmSpec, fit_glm, fit_hglm, random_effect_estimates, read_triangle, reserve_report

DATA = Path(__file__).resolve().parents[1] / "data" / "wuthrich_merz_2008.csv"
tri = read_triangle(DATA)

# Estimate everything, including both dispersions
fit = fit_hglm(tri)
print(f"outer iterations: {fit.iterations}, converged: {fit.converged}")
print(f"phi = {fit.dispersion:,.1f}   phi_u = {fit.dispersion_u:.5f}")

print("\norigin      u_i     log u_i")
for i, u, v in random_effect_estimates(fit):
    print(f"{i:>6} {u:>8.4f} {v:>10.4f}")

glm_rep = reserve_report(fit_glm(tri))
hglm_rep = reserve_report(fit)
print(f"\n{'origin':>6} {'GLM':>12} {'HGLM':>12}")
for (i, g), (_, h) in zip(glm_rep.rows(), hglm_rep.rows()):
    print(f"{i:>6} {g:>12,.0f} {h:>12,.0f}")
print(f"{'total':>6} {glm_rep.total:>12,.0f} {hglm_rep.total:>12,.0f}")

# Shrinkage path: hold phi_u fixed over a grid and watch the spread of u.
print("\n   phi_u    max|u-1|   total reserve")
for phi_u in [1e-8, 1e-4, 1e-3, fit.dispersion_u, 1e-1, 1.0, 1e6]:
    f = fit_hglm(tri, HglmSpec(fix_phi_u=phi_u))
    spread = np.max(np.abs(f.random - 1))
    print(f"{phi_u:>8.1e} {spread:>10.4f} {reserve_report(f).total:>15,.0f}")

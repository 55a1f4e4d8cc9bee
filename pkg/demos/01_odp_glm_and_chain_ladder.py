"""
Over-dispersed Poisson GLM on a claims triangle
===============================================

Fit the cross-classified log-link GLM to the bundled ten-year triangle,
check it against the chain ladder and look at the analytic prediction
error of the reserve.

Run from the repository root::

    python3 demos/01_odp_glm_and_chain_ladder.py
"""

from pathlib import Path

import numpy as np

from hglmreserve import fit_glm, glm_msep_analytic, read_triangle, reserve_report

DATA = Path(__file__).resolve().parents[1] / "data" / "wuthrich_merz_2008.csv"

# The file holds incremental payments in long format (origin, dev, value).
tri = read_triangle(DATA)
print(f"{tri.size} x {tri.size} triangle, {tri.mask.sum()} observed cells")

# Cumulative view of the latest diagonal
cum = tri.to_cumulative().values
latest = np.array([cum[i, tri.n - i] for i in range(tri.size)])
print("latest cumulative:", np.round(latest).astype(int))

# ODP: p = 1, dispersion from Pearson residuals
fit = fit_glm(tri, p=1.0)
print(f"\nconverged in {fit.iterations} IRLS steps, phi = {fit.dispersion:,.1f}")

# development pattern implied by the column effects
pattern = np.exp(fit.dev_effects)
print("share paid by development year:", np.round(pattern / pattern.sum(), 4))

report = reserve_report(fit)

# The classic volume-weighted chain ladder gives the same reserves.
n = tri.n
factors = [cum[: n - j, j + 1].sum() / cum[: n - j, j].sum() for j in range(n)]
ultimate = latest * np.array([np.prod(factors[n - i :]) for i in range(tri.size)])
chain_ladder = ultimate - latest

msep = glm_msep_analytic(fit)
print(f"\n{'origin':>6} {'GLM reserve':>14} {'chain ladder':>14} {'RMSEP':>10}")
for i, r in report.rows():
    print(f"{i:>6} {r:>14,.0f} {chain_ladder[i]:>14,.0f} {msep.per_origin[i]:>10,.0f}")
print(f"{'total':>6} {report.total:>14,.0f} {chain_ladder.sum():>14,.0f} {msep.total:>10,.0f}")

# process versus estimation error in the total
share = msep.total_process_variance / msep.total**2
print(f"\nprocess variance is {share:.0%} of the total MSEP")

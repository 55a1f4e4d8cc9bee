"""
Bootstrap prediction error and error quantiles
==============================================

Resample Pearson residuals, refit, and simulate the future cells to get
the root mean squared error of prediction (RMSEP) and quantiles of the
absolute prediction error, for both models, per origin year.

``B`` defaults to 1000; pass a smaller number as the first argument for
a quick look::

    python3 demos/03_bootstrap_prediction_error.py 200
"""

import sys
import time
from pathlib import Path

import numpy as np

from hglmreserve import BootstrapConfig, ModelSpec, bootstrap_run, error_quantiles, read_triangle, rmsep

DATA = Path(__file__).resolve().parents[1] / "data" / "wuthrich_merz_2008.csv"
B = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
PROBS = [0.5, 0.75, 0.9, 0.95]

tri = read_triangle(DATA)

for kind in ("glm", "hglm"):
    start = time.perf_counter()
    res = bootstrap_run(tri, BootstrapConfig(B=B, seed=2024, model=ModelSpec(kind=kind)))
    secs = time.perf_counter() - start
    rm = rmsep(res)
    q = error_quantiles(res, PROBS)
    print(f"\n{kind.upper()}: B = {res.B}, {res.failures} redrawn replicates, {secs:.1f}s")
    print(f"{'origin':>6} {'RMSEP':>9}" + "".join(f"{'Q' + format(p, 'g'):>10}" for p in PROBS))
    for i in range(1, tri.size):
        print(f"{i:>6} {rm.per_origin[i]:>9,.0f}" + "".join(f"{v:>10,.0f}" for v in q.per_origin[:, i]))
    print(f"{'total':>6} {rm.total:>9,.0f}" + "".join(f"{v:>10,.0f}" for v in q.total))

    # where does the RMSEP fall in the distribution of absolute errors?
    err = np.abs(res.errors())
    level = np.mean(err <= np.r_[rm.per_origin, rm.total], axis=0)
    print("RMSEP as an empirical quantile level:", np.round(level[1:], 2))

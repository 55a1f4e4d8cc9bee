import os
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hglmreserve import Triangle, read_triangle  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]
WM_PATH = Path(os.environ.get("HGLMRESERVE_WM_TRIANGLE", ROOT / "data" / "wuthrich_merz_2008.csv"))


@pytest.fixture(scope="session")
def wm_path():
    if not WM_PATH.exists():
        pytest.skip(f"external data missing: {WM_PATH}")
    return WM_PATH


@pytest.fixture(scope="session")
def wm(wm_path):
    return read_triangle(wm_path)


@pytest.fixture
def tri2():
    return Triangle.from_rows([[100, 50], [200]])


@pytest.fixture
def tri3():
    return Triangle.from_rows([[100, 60, 40], [110, 66], [120]])


@pytest.fixture
def tri5():
    """Small positive 5x5 triangle with some noise."""
    rng = np.random.default_rng(20240601)
    from oracles import random_positive_triangle

    return Triangle(random_positive_triangle(rng, 4))


BOOT_SEED = 12345


def _timed_bootstrap(t, kind):
    from hglmreserve import BootstrapConfig, ModelSpec, bootstrap_run

    start = time.perf_counter()
    res = bootstrap_run(t, BootstrapConfig(B=1000, seed=BOOT_SEED, model=ModelSpec(kind=kind)))
    return res, time.perf_counter() - start


@pytest.fixture(scope="session")
def wm_boot_glm_timed(wm):
    return _timed_bootstrap(wm, "glm")


@pytest.fixture(scope="session")
def wm_boot_hglm_timed(wm):
    return _timed_bootstrap(wm, "hglm")


@pytest.fixture(scope="session")
def wm_boot_glm(wm_boot_glm_timed):
    return wm_boot_glm_timed[0]


@pytest.fixture(scope="session")
def wm_boot_hglm(wm_boot_hglm_timed):
    return wm_boot_hglm_timed[0]


# one line per acceptance criterion, printed after the run
CRITERIA: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[k])

import os
from pathlib import Path

import numpy as np
import pytest

from gdwd.model import ProblemData, compute_penalty_parameter, median_interclass_distance

ROOT = Path(__file__).resolve().parent.parent
SUFFIXES = ("", ".txt", ".libsvm", ".bz2", ".gz", ".xz")


def data_dirs():
    dirs = []
    if os.environ.get("GDWD_DATA_DIR"):
        dirs.append(Path(os.environ["GDWD_DATA_DIR"]))
    dirs.append(ROOT / "data")
    return dirs


def find_dataset(name):
    """Locate a LIBSVM dataset by name in ``$GDWD_DATA_DIR`` or ``./data``."""
    for d in data_dirs():
        for suf in SUFFIXES:
            p = d / f"{name}{suf}"
            if p.is_file():
                return p
    return None


def random_instance(seed, n, d, sep=1.5, density=1.0):
    """Two noisy Gaussian clouds shifted along a random direction."""
    rng = np.random.default_rng(seed)
    y = rng.choice([-1.0, 1.0], n)
    y[0], y[1] = 1.0, -1.0
    X = rng.standard_normal((d, n)) + sep * np.outer(rng.standard_normal(d) / np.sqrt(d) * 3, y)
    if density < 1.0:
        X *= rng.random((d, n)) < density
    return X, y


def make_problem(seed, n, d, q=1.0, weighted=True, sep=1.5):
    from gdwd.model import compute_class_weights

    X, y = random_instance(seed, n, d, sep=sep)
    C = compute_penalty_parameter(n, d, median_interclass_distance(X, y), q)
    tau = compute_class_weights(y, q) if weighted else None
    return ProblemData(X, y, q=q, C=C, tau=tau)


@pytest.fixture
def separable_toy():
    """Four points in the plane separated by the vertical axis."""
    X = np.array([[1.0, 2.0, -1.0, -2.0], [1.0, -1.0, 1.0, -1.0]])
    y = np.array([1.0, 1.0, -1.0, -1.0])
    return X, y


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for num in sorted(results):
            terminalreporter.write_line(results[num][1])

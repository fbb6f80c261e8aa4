import numpy as np
import pytest

from sketchreg import Dataset, SketchSpec
from sketchreg.sketches import SketchedData


def make_data(n=60, p=3, seed=0, noise=1.0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = rng.standard_normal(p)
    y = X @ beta + noise * rng.standard_normal(n)
    return Dataset(y, X)


def identity_sketch(d: Dataset) -> SketchedData:
    """(y, X) wrapped as if sketched by S = I_n."""
    return SketchedData(
        y_tilde=np.array(d.y), x_tilde=np.array(d.X),
        spec=SketchSpec("gaussian", d.n, 0), source_fingerprint=d.fingerprint, n=d.n,
    )


def mc_cov_se(samples: np.ndarray):
    """Empirical covariance and the Monte Carlo SE of each entry."""
    z = samples - samples.mean(axis=0)
    prods = z[:, :, None] * z[:, None, :]
    m = samples.shape[0]
    return prods.mean(axis=0) * m / (m - 1), prods.std(axis=0, ddof=1) / np.sqrt(m)


@pytest.fixture
def small_data():
    return make_data()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

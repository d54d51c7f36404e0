import numpy as np
import pytest

from zeroday_ids.dataset_io import Dataset, SynthConfig, clean, synthesize


def make_dataset(features, cats, names=None):
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    cats = np.asarray(cats, dtype=object)
    y = (cats != "Normal").astype(np.int8)
    names = names or tuple(f"f{j}" for j in range(X.shape[1]))
    return Dataset(X, names, y, cats)


@pytest.fixture(scope="session")
def small_synth():
    """5,000-row synthetic table with every attack category present."""
    cfg = SynthConfig(n_rows=5000, n_features=8, attack_fraction=0.2, seed=3)
    return clean(synthesize(cfg))[0]


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

import numpy as np
import pytest

from mahpo.data import Dataset, builtin


def make_dataset(X, y, name="toy"):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    n_classes = int(y.max()) + 1
    return Dataset(X, y, tuple(f"x{i}" for i in range(X.shape[1])),
                   tuple(f"c{i}" for i in range(n_classes)), name)


@pytest.fixture(scope="session")
def iris():
    return builtin("iris")


@pytest.fixture(scope="session")
def wine():
    return builtin("wine")


@pytest.fixture(scope="session")
def breast_cancer():
    return builtin("breast_cancer")


@pytest.fixture
def separable():
    """Two well separated Gaussian blobs, 20 points each."""
    rng = np.random.default_rng(7)
    X = np.vstack([rng.normal(-3, 0.5, size=(20, 2)), rng.normal(3, 0.5, size=(20, 2))])
    y = np.repeat([0, 1], 20)
    return make_dataset(X, y, "separable")

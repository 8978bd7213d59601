import numpy as np
import pytest

from xilab import catalog


@pytest.fixture(scope="session")
def std_catalog():
    return catalog.standard_catalog()


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


def random_rotation(rng, n):
    """Haar-ish rotation from QR of a Gaussian matrix, determinant +1."""
    A = rng.normal(size=(n, n))
    Q, R = np.linalg.qr(A)
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q

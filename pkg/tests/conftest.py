import numpy as np
import pytest

from rafeast.sparse import SymmetricSparseMatrix


def random_symmetric(n, seed, density=None):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, n))
    if density is not None:
        M[rng.random((n, n)) > density] = 0.0
    return M + M.T


def as_sparse(M) -> SymmetricSparseMatrix:
    import scipy.sparse as sp

    return SymmetricSparseMatrix.from_scipy(sp.csr_matrix(M))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])

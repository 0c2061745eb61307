import numpy as np
import pytest

from hcfem import Basis, FormPair, SymMatrix


@pytest.fixture
def diag_pair():
    """Decoupled 2x2 pair: S1 = diag(1,0), S2 = diag(0,1), subspace e2."""
    S1 = SymMatrix(np.diag([1.0, 0.0]))
    S2 = SymMatrix(np.diag([0.0, 1.0]))
    return FormPair(S1, S2, Basis(np.array([[0.0], [1.0]])))


@pytest.fixture
def coupled_pair():
    """Coupled 2x2 pair: S1 = diag(2,0), S2 = [[1,1],[1,2]], subspace e2."""
    S1 = SymMatrix(np.array([[2.0, 0.0], [0.0, 0.0]]))
    S2 = SymMatrix(np.array([[1.0, 1.0], [1.0, 2.0]]))
    return FormPair(S1, S2, Basis(np.array([[0.0], [1.0]])))


def random_spd(n, rng, shift=0.5):
    G = rng.standard_normal((n, n))
    return G @ G.T + shift * np.eye(n)

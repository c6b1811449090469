import numpy as np
import pytest

from qbdd.solver.intlat import IntMatrix, hnf
from qbdd.solver.zqgroup import FiniteGroupDecomp


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def calibration_dir(tmp_path, monkeypatch):
    path = tmp_path / "calibration"
    monkeypatch.setenv("QBDD_CALIBRATION_DIR", str(path))
    return path


@pytest.fixture
def small_decomp():
    """Z_4 generated by (4, 8) in Z_16^2; lambda1 = 8, distinct sigma=2 cubes are disjoint."""
    return FiniteGroupDecomp(G=((4,), (8,)), qvec=(4,), q=16, n=2)


@pytest.fixture
def small_basis():
    """HNF basis of the lattice spanned by (4, 8), (16, 0), (0, 16)."""
    return hnf(IntMatrix(((4, 16, 0), (8, 0, 16))))

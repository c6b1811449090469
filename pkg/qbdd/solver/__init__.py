"""
qbdd solver package

Exact lattice arithmetic, finite group decompositions, simulation of the
quantum sampling subroutines, the reduction-based solvers and the
classical rectangle-periodic decoder.
"""

from qbdd.solver.intlat import IntMatrix, Lattice
from qbdd.solver.zqgroup import FiniteGroupDecomp, decompose
from qbdd.solver.qsim import PeConfig, sample_hip
from qbdd.solver.reduction import sample_bdd, solve_bdd_poly, solve_bdd_tradeoff
from qbdd.solver.classical_rect import rect_bdd, rect_reduce
from qbdd.solver.calibration import CalibrationStore

__all__ = ['IntMatrix', 'Lattice', 'FiniteGroupDecomp', 'decompose', 'PeConfig', 'sample_hip',
           'sample_bdd', 'solve_bdd_poly', 'solve_bdd_tradeoff', 'rect_bdd', 'rect_reduce',
           'CalibrationStore']

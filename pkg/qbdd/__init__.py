"""
qbdd - Bounded Distance Decoding on q-periodic lattices

Exact classical simulation of the phased-cube-state BDD pipeline
(phase estimation on approximate eigenvectors, random self-reduction)
together with the classical lattice machinery and brute-force oracles
used to check it.
"""

__version__ = "0.1.0"
__author__ = "qbdd developers"

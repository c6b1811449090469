"""
qbdd Utilities Package

Small helpers shared by the solver modules and the command line.
"""

__all__ = ['helpers']

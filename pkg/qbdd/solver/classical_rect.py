"""
Classical decoding for rectangle-periodic lattices.

A lattice containing r_1 Z x ... x r_n Z whose quotient by that rectangle
has small rank admits an LLL basis with a provably large minimum
Gram-Schmidt length; Babai's algorithm then decodes up to half of it.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from qbdd import conf
from qbdd.errors import VerificationError
from qbdd.solver.intlat import (IntMatrix, babai_nearest_plane, det_abs, gram_schmidt, hnf,
                                lambda1_sq_exact, lll_reduce, lovasz_ratio, mg_complete, norm_sq,
                                rect_periodicity)
from qbdd.solver.zqgroup import quotient_decomposition
from qbdd.utils.helpers import format_rational

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RectPeriodicity:
    """Minimal rectangle r_1 Z x ... x r_n Z inside a lattice."""

    r_vec: tuple

    @property
    def q(self):
        return max(self.r_vec)

    @property
    def order(self):
        """Axis indices sorted by ascending r_i (stable)."""
        return tuple(sorted(range(len(self.r_vec)), key=lambda i: (self.r_vec[i], i)))


@dataclass(frozen=True)
class MinGsCertificate:
    """Reduced basis with its exact minimum Gram-Schmidt length and the two-case lower bound."""

    basis: IntMatrix
    min_gs_sq: Fraction
    bstar_sq: tuple
    rect: RectPeriodicity
    group_rank: int
    largest: tuple
    r_max: int
    m: int
    delta_ratio: float
    lambda1: float
    case1_bound: float
    case2_bound: float

    @property
    def min_gs(self):
        return math.sqrt(self.min_gs_sq)

    @property
    def bound_value(self):
        return min(self.case1_bound, self.case2_bound)

    @property
    def degenerate(self):
        return self.group_rank == 0

    def to_json(self):
        return {"basis": self.basis.to_lists(), "min_gs_sq": format_rational(self.min_gs_sq),
                "min_gs": self.min_gs, "bound": self.bound_value, "case1_bound": self.case1_bound,
                "case2_bound": self.case2_bound, "m": self.m, "delta_ratio": self.delta_ratio,
                "r_vec": list(self.rect.r_vec), "R": list(self.largest), "r_max": self.r_max,
                "group_rank": self.group_rank, "lambda1": self.lambda1}


def rect_decompose(B):
    """Rectangle and L/H decomposition with generators lifted to Z^n."""
    rect = RectPeriodicity(rect_periodicity(B))
    generators, orders = quotient_decomposition(B, rect.r_vec)
    return rect, generators, orders


def cutoff_m(r, r_max, delta_ratio, n):
    """m from (r/m) ln r_max = ((m-1)/2) ln D, i.e. m ~ sqrt(2 r ln r_max / ln D), within [1, n]."""
    if r == 0 or r_max <= 1:
        return 1
    m = math.ceil(math.sqrt(2 * r * math.log(r_max) / math.log(delta_ratio)))
    return min(max(m, 1), n)


def rect_reduce(B, lambda1=None, delta_lll=None):
    """
    Reduce B into a basis with certified minimum Gram-Schmidt length.

    Args:
        B: square full rank basis
        lambda1: exact lambda_1 if already known (computed otherwise)
        delta_lll: Lovasz parameter, defaults to the configured value

    Returns:
        MinGsCertificate
    """
    delta_lll = conf.get_settings().delta_lll if delta_lll is None else delta_lll
    rect, generators, orders = rect_decompose(B)
    n = B.rows
    r = len(orders)
    S = IntMatrix.from_columns([tuple(rect.r_vec[i] * int(k == i) for k in range(n))
                                for i in rect.order])
    gen_cols = list(generators) + S.columns()
    H = hnf(IntMatrix.from_columns(gen_cols))
    C = lll_reduce(mg_complete(H, S), delta_lll)
    gs = gram_schmidt(C)
    ratio = lovasz_ratio(delta_lll)
    largest = tuple(sorted(rect.order[n - r:])) if r else ()
    r_max = max((rect.r_vec[i] for i in largest), default=rect.q)
    m = cutoff_m(r, r_max, ratio, n)
    if lambda1 is None:
        lambda1 = math.sqrt(lambda1_sq_exact(B))
    case1 = lambda1 / ratio ** (m - 1)
    case2 = lambda1 / (r_max ** (r / m) * ratio ** ((m - 1) / 2))
    cert = MinGsCertificate(basis=C, min_gs_sq=gs.min_norm_sq(), bstar_sq=gs.bstar_sq, rect=rect,
                            group_rank=r, largest=largest, r_max=r_max, m=m, delta_ratio=ratio,
                            lambda1=lambda1, case1_bound=case1, case2_bound=case2)
    logger.debug("rect_reduce: r_vec=%s rank=%d m=%d min_gs=%.4g bound=%.4g",
                 rect.r_vec, r, m, cert.min_gs, cert.bound_value)
    return cert


def rect_bdd(B, t, cert=None):
    """Babai on the certified basis; refuses answers outside half the minimum GS length."""
    cert = rect_reduce(B) if cert is None else cert
    C = cert.basis
    v = C @ babai_nearest_plane(C, t)
    dist_sq = norm_sq([Fraction(a) - b for a, b in zip(t, v)])
    if 4 * dist_sq >= cert.min_gs_sq:
        raise VerificationError("outside certified radius", code="outside certified radius",
                                distance_sq=format_rational(dist_sq),
                                radius_sq=format_rational(cert.min_gs_sq / 4))
    return v


def sivp_bound(B, cert=None):
    """q / (certified minimum GS length), q = max r_i."""
    cert = rect_reduce(B) if cert is None else cert
    if cert.degenerate:
        logger.info("sivp_bound: trivial quotient, bound is degenerate")
    return cert.rect.q / cert.min_gs


def gs_bound_cases(cert, lambda1=None):
    """
    Pointwise check of the two-case lower bound.

    Returns:
        list of (i, ||c*_i||, bound, holds) with 1-based i; indices i <= m
        use lambda1 / D^(m-1), the rest lambda1 / (r_max^(r/m) D^((m-1)/2))
    """
    lambda1 = cert.lambda1 if lambda1 is None else lambda1
    rows = []
    for i, sq in enumerate(cert.bstar_sq, start=1):
        if i <= cert.m:
            bound = lambda1 / cert.delta_ratio ** (cert.m - 1)
        else:
            bound = lambda1 / (cert.r_max ** (cert.group_rank / cert.m)
                               * cert.delta_ratio ** ((cert.m - 1) / 2))
        value = math.sqrt(sq)
        rows.append((i, value, bound, value >= bound * (1 - 1e-12)))
    return rows


def determinant_chain(cert):
    """
    prod r_i / prod_{j in R} r_j <= det(L) <= prod r_i, exactly.

    The left inequality can fail when the r_i mix several primes, so the
    result reports each side instead of asserting it.
    """
    upper = math.prod(cert.rect.r_vec)
    lower = Fraction(upper, math.prod(cert.rect.r_vec[j] for j in cert.largest))
    det = det_abs(cert.basis)
    return {"lower": lower, "det": det, "upper": upper,
            "lower_holds": lower <= det, "upper_holds": det <= upper}


def dual_products_check(cert):
    """||c*_{i+1}|| ... ||c*_n|| <= product of the n - i largest r_j, for every i."""
    ordered = sorted(cert.rect.r_vec)
    n = len(ordered)
    results = []
    for i in range(n):
        lhs = math.prod(cert.bstar_sq[i:])
        rhs = math.prod(x * x for x in ordered[i:])
        results.append(Fraction(lhs) <= rhs)
    return all(results), results


def certificate_from_json(record, basis_check: Optional[IntMatrix] = None):
    """Recompute a certificate's exact part from its JSON record."""
    C = IntMatrix.from_rows(record["basis"])
    if basis_check is not None and hnf(C) != hnf(basis_check):
        raise VerificationError("certificate basis does not span the instance lattice",
                                code="certificate basis")
    return gram_schmidt(C).min_norm_sq()

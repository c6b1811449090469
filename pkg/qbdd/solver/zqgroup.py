"""
Finite-group view of q-periodic lattices.

A lattice L with q Z^n inside it is handled through L mod q, a subgroup of
Z_q^n written as G C~ where C~ = [q_1] x ... x [q_r] is the coefficient
space and the generator columns of G have orders q_1 | q_2 | ... | q_r.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from qbdd import conf
from qbdd.errors import BudgetExceededError, PreconditionError
from qbdd.solver.intlat import IntMatrix, hnf, integer_inverse, rational_inverse, snf
from qbdd.utils.helpers import centered, modnorm_sq

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ZqVector:
    """Vector over Z_q with entries reduced into [0, q)."""

    entries: tuple
    q: int

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("modulus must be positive")
        object.__setattr__(self, "entries", tuple(int(v) % self.q for v in self.entries))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def norm(self):
        return modnorm(self.entries, self.q)


@dataclass(frozen=True)
class FiniteGroupDecomp:
    """Decomposition (G, qvec) of L mod q; G is stored row-major as n x r."""

    G: tuple
    qvec: tuple
    q: int
    n: int

    def __post_init__(self):
        rows = tuple(tuple(int(v) % self.q for v in row) for row in self.G)
        qvec = tuple(int(v) for v in self.qvec)
        if len(rows) != self.n:
            raise ValueError(f"G has {len(rows)} rows, expected n={self.n}")
        if any(len(row) != len(qvec) for row in rows):
            raise ValueError("G column count differs from len(qvec)")
        for a, b in zip(qvec, qvec[1:]):
            if b % a:
                raise ValueError(f"qvec is not a divisibility chain: {qvec}")
        if qvec and self.q % qvec[-1]:
            raise ValueError(f"q_r={qvec[-1]} does not divide q={self.q}")
        for j, qj in enumerate(qvec):
            column = [row[j] for row in rows]
            order = self.q // math.gcd(self.q, *column)
            if order != qj:
                raise ValueError(f"generator {j} has order {order}, expected {qj}")
        object.__setattr__(self, "G", rows)
        object.__setattr__(self, "qvec", qvec)

    @property
    def r(self):
        return len(self.qvec)

    @property
    def matrix(self):
        return np.array(self.G, dtype=np.int64).reshape(self.n, self.r)

    def column(self, j):
        return tuple(row[j] for row in self.G)

    def order(self):
        return group_order(self)

    def apply(self, c):
        """G c mod q for a coefficient vector c."""
        return tuple(sum(g * x for g, x in zip(row, c)) % self.q for row in self.G)


def modnorm(x, q):
    """Euclidean norm of the zero-centred representative of x mod q."""
    return math.sqrt(modnorm_sq(x, q))


def dist_q(x, y, q):
    return modnorm([a - b for a, b in zip(x, y)], q)


def group_order(decomp):
    return math.prod(decomp.qvec)


def is_degenerate(decomp):
    """True for the trivial quotient, i.e. L = q Z^n."""
    return decomp.r == 0


def quotient_decomposition(B, moduli):
    """
    Decompose L/H for H = m_1 Z x ... x m_n Z contained in L = L(B).

    Args:
        B: square full rank basis of L
        moduli: per-axis moduli m_i with m_i e_i in L

    Returns:
        (generators, orders): generators lifted to Z^n with coordinate i
        reduced mod m_i, orders forming a divisibility chain, all > 1
    """
    inv = rational_inverse(B)
    n = B.rows
    M = [[inv[i][j] * moduli[j] for j in range(n)] for i in range(n)]
    if any(v.denominator != 1 for row in M for v in row):
        raise PreconditionError("lattice does not contain the given rectangle",
                                code="not q-periodic", moduli=list(moduli))
    U, D, _ = snf(IntMatrix(tuple(tuple(int(v) for v in row) for row in M)))
    lifted = B @ integer_inverse(U)
    generators, orders = [], []
    for i in range(n):
        d = D[i, i]
        if d > 1:
            generators.append(tuple(v % moduli[k] for k, v in enumerate(lifted.column(i))))
            orders.append(d)
    return generators, tuple(orders)


def decompose(L, q):
    """Finite group decomposition of L mod q."""
    B = L.basis if hasattr(L, "basis") else L
    n = B.rows
    gens, orders = quotient_decomposition(B, (q,) * n)
    G = tuple(tuple(g[i] for g in gens) for i in range(n))
    decomp = FiniteGroupDecomp(G=G, qvec=orders, q=q, n=n)
    logger.debug("decompose: n=%d q=%d rank=%d qvec=%s", n, q, decomp.r, decomp.qvec)
    return decomp


def group_elements(decomp, budget=None):
    """
    Every (c, G c mod q) pair, coefficients in lexicographic order.

    Returns:
        (coeffs, elements) int64 arrays of shapes |G| x r and |G| x n
    """
    budget = conf.get_settings().group_budget if budget is None else budget
    size = group_order(decomp)
    if size > budget:
        raise BudgetExceededError(f"group of order {size} exceeds budget {budget}",
                                  code="group budget", order=size)
    if decomp.r == 0:
        return np.zeros((1, 0), dtype=np.int64), np.zeros((1, decomp.n), dtype=np.int64)
    coeffs = np.indices(decomp.qvec).reshape(decomp.r, -1).T.astype(np.int64)
    elements = np.mod(coeffs @ decomp.matrix.T, decomp.q)
    return coeffs, elements


def _check_coefficients(c, decomp):
    if len(c) != decomp.r or any(not 0 <= int(x) < qi for x, qi in zip(c, decomp.qvec)):
        raise PreconditionError(f"coefficient vector {tuple(c)} outside C~ = {decomp.qvec}",
                                code="coefficient range")


def label_weights(a, decomp):
    """Per-generator multipliers a_i (q/q_i) mod q."""
    if len(a) != decomp.r:
        raise PreconditionError(f"label has length {len(a)}, expected r={decomp.r}",
                                code="label length")
    return np.array([(int(x) * (decomp.q // qi)) % decomp.q for x, qi in zip(a, decomp.qvec)],
                    dtype=np.int64)


def charphase(a, c, decomp):
    """sum_i a_i (q/q_i) c_i mod q; chi_a(c) = omega_q ** charphase(a, c)."""
    _check_coefficients(c, decomp)
    w = label_weights(a, decomp)
    return int(sum(int(x) * int(y) for x, y in zip(w, c)) % decomp.q)


def charphase_all(a, coeffs, decomp):
    """Vectorised charphase over rows of a coefficient array."""
    if decomp.r == 0:
        return np.zeros(len(coeffs), dtype=np.int64)
    return np.mod(coeffs @ label_weights(a, decomp), decomp.q)


def negate_coefficients(c, decomp):
    return tuple((-int(x)) % qi for x, qi in zip(c, decomp.qvec))


def group_cvp_exact(decomp, t):
    """
    Closest group element to t under the modular norm.

    Returns:
        (s, dist): coefficients of the closest element (lexicographically
        smallest on ties) and its distance
    """
    coeffs, elements = group_elements(decomp)
    diff = centered(np.asarray(tuple(t), dtype=np.int64)[None, :] - elements, decomp.q)
    d2 = np.sum(diff * diff, axis=1)
    idx = int(np.argmin(d2))
    return tuple(int(v) for v in coeffs[idx]), math.sqrt(int(d2[idx]))


def lambda1_group(decomp):
    """Shortest nonzero element under the modular norm; +inf for the trivial group."""
    if is_degenerate(decomp):
        return math.inf
    _, elements = group_elements(decomp)
    c = centered(elements[1:], decomp.q)
    return math.sqrt(int(np.min(np.sum(c * c, axis=1))))


def lift_solution(decomp, s, t_int, q):
    """Integer lattice vector t - centered(t - G s) next to t."""
    v0 = decomp.apply(s)
    return tuple(int(t) - centered(int(t) - v, q) for t, v in zip(t_int, v0))


def solve_coefficients(G, v, q, qvec):
    """
    Recover c in C~ with G c = v (mod q), or None when v is not in the span.

    Args:
        G: n x r integer matrix as nested sequences (rows)
        v: target vector
        q: modulus
        qvec: coefficient moduli used to reduce the answer
    """
    n = len(v)
    r = len(qvec)
    if r == 0:
        return () if all(int(x) % q == 0 for x in v) else None
    A = IntMatrix(tuple(tuple(int(x) for x in G[i]) + tuple(q * int(i == k) for k in range(n))
                        for i in range(n)))
    U, D, V = snf(A)
    uv = U @ tuple(int(x) for x in v)
    y = [0] * A.cols
    for i in range(n):
        d = D[i, i] if i < A.cols else 0
        if d == 0:
            if uv[i]:
                return None
        elif uv[i] % d:
            return None
        else:
            y[i] = uv[i] // d
    x = V @ y
    return tuple(int(x[j]) % qvec[j] for j in range(r))


def is_primitive(Gt, q):
    """True when the rows of the m x r matrix Gt span Z_q^r."""
    rows = [tuple(int(x) for x in row) for row in Gt]
    r = len(rows[0]) if rows else 0
    if r == 0:
        return True
    cols = tuple(tuple(row[j] for row in rows) + tuple(q * int(j == k) for k in range(r))
                 for j in range(r))
    _, D, _ = snf(IntMatrix(cols))
    return all(D[i, i] == 1 for i in range(r))


def lifted_lattice(decomp):
    """HNF basis of the integer lattice generated by [G | q I]."""
    n = decomp.n
    M = IntMatrix(tuple(decomp.G[i] + tuple(decomp.q * int(i == k) for k in range(n))
                        for i in range(n)))
    return hnf(M)


def image_order(Gt, q):
    """|{G~ c mod q}| for an m x r matrix, via det of the lifted lattice."""
    m = len(Gt)
    M = IntMatrix(tuple(tuple(int(x) for x in Gt[i]) + tuple(q * int(i == k) for k in range(m))
                        for i in range(m)))
    return q ** m // abs(hnf(M).det())


def coefficient_map_injective(Gt, q, qvec):
    """True when c -> G~ c mod q is injective on C~ = [q_1] x ... x [q_r]."""
    return image_order(Gt, q) == math.prod(qvec)


def decomp_to_json(decomp):
    return {"q": decomp.q, "n": decomp.n, "qvec": list(decomp.qvec),
            "G": [list(row) for row in decomp.G]}


def decomp_from_json(record):
    return FiniteGroupDecomp(G=tuple(tuple(row) for row in record["G"]),
                             qvec=tuple(record["qvec"]), q=record["q"], n=record["n"])

"""
Exact integer lattice core.

Bases are stored column-wise: the lattice generated by an ``IntMatrix`` B is
``{B c : c integer}``. All Gram-Schmidt data is kept as ``Fraction`` so every
reduction condition and decoding radius is checked without tolerances.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce

from sympy import Matrix
from sympy.matrices.normalforms import hermite_normal_form

from qbdd import conf
from qbdd.errors import (BudgetExceededError, PreconditionError,
                         RadiusExceededError, RankDeficientError)
from qbdd.utils.helpers import format_rational, strip_comment

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IntMatrix:
    """Arbitrary-precision integer matrix, row-major, immutable."""

    entries: tuple

    def __post_init__(self):
        rows = tuple(tuple(int(v) for v in row) for row in self.entries)
        if not rows or not rows[0]:
            raise ValueError("matrix dimensions must be positive")
        width = len(rows[0])
        if any(len(row) != width for row in rows):
            raise ValueError("ragged matrix rows")
        object.__setattr__(self, "entries", rows)

    @classmethod
    def from_rows(cls, rows):
        return cls(tuple(tuple(row) for row in rows))

    @classmethod
    def from_columns(cls, columns):
        columns = [tuple(col) for col in columns]
        return cls(tuple(zip(*columns)))

    @classmethod
    def identity(cls, n):
        return cls(tuple(tuple(int(i == j) for j in range(n)) for i in range(n)))

    @classmethod
    def diag(cls, values):
        n = len(values)
        return cls(tuple(tuple(values[i] if i == j else 0 for j in range(n)) for i in range(n)))

    @classmethod
    def from_sympy(cls, m):
        return cls(tuple(tuple(int(m[i, j]) for j in range(m.cols)) for i in range(m.rows)))

    @property
    def rows(self):
        return len(self.entries)

    @property
    def cols(self):
        return len(self.entries[0])

    @property
    def shape(self):
        return self.rows, self.cols

    def __getitem__(self, index):
        i, j = index
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise IndexError(f"entry {index} outside {self.rows}x{self.cols} matrix")
        return self.entries[i][j]

    def row(self, i):
        return self.entries[i]

    def column(self, j):
        return tuple(row[j] for row in self.entries)

    def columns(self):
        return [self.column(j) for j in range(self.cols)]

    def transpose(self):
        return IntMatrix(tuple(zip(*self.entries)))

    def hstack(self, other):
        if other.rows != self.rows:
            raise ValueError("row counts differ")
        return IntMatrix(tuple(a + b for a, b in zip(self.entries, other.entries)))

    def __matmul__(self, other):
        if isinstance(other, IntMatrix):
            if self.cols != other.rows:
                raise ValueError("inner dimensions differ")
            cols = other.columns()
            return IntMatrix(tuple(tuple(_dot(row, col) for col in cols) for row in self.entries))
        vec = tuple(other)
        if len(vec) != self.cols:
            raise ValueError("vector length differs from column count")
        return tuple(_dot(row, vec) for row in self.entries)

    def det(self):
        """Determinant by fraction-free (Bareiss) elimination."""
        if self.rows != self.cols:
            raise ValueError("determinant of a non-square matrix")
        a = [list(row) for row in self.entries]
        n = self.rows
        sign, prev = 1, 1
        for k in range(n - 1):
            if a[k][k] == 0:
                swap = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
                if swap is None:
                    return 0
                a[k], a[swap] = a[swap], a[k]
                sign = -sign
            for i in range(k + 1, n):
                for j in range(k + 1, n):
                    a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
            prev = a[k][k]
        return sign * a[n - 1][n - 1]

    def rank(self):
        return self.to_sympy().rank()

    def to_sympy(self):
        return Matrix([list(row) for row in self.entries])

    def to_lists(self):
        return [list(row) for row in self.entries]

    def to_text(self):
        """Matrix text format: "rows cols" then one row per line."""
        lines = [f"{self.rows} {self.cols}"]
        lines.extend(" ".join(str(v) for v in row) for row in self.entries)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        tokens = []
        for line in text.splitlines():
            tokens.extend(strip_comment(line).split())
        if len(tokens) < 2:
            raise ValueError("matrix text needs a 'rows cols' header")
        rows, cols = int(tokens[0]), int(tokens[1])
        values = [int(tok) for tok in tokens[2:]]
        if len(values) != rows * cols:
            raise ValueError(f"expected {rows * cols} entries, found {len(values)}")
        return cls(tuple(tuple(values[i * cols:(i + 1) * cols]) for i in range(rows)))


@dataclass(frozen=True)
class Lattice:
    """Lattice generated by the columns of a full column rank basis."""

    basis: IntMatrix

    def __post_init__(self):
        if self.basis.rank() != self.basis.cols:
            raise RankDeficientError(shape=self.basis.shape)

    @property
    def dim(self):
        return self.basis.cols

    @property
    def ambient_dim(self):
        return self.basis.rows

    def det(self):
        return det_abs(self.basis)

    def contains(self, v):
        return in_lattice(self.basis, v)

    def gram_schmidt(self):
        return gram_schmidt(self.basis)

    def lambda1(self):
        return lambda1_exact(self.basis)


@dataclass(frozen=True)
class GramSchmidtData:
    """Exact Gram-Schmidt data of a basis b_1..b_k (0-indexed here).

    ``bstar[i]`` is b*_i, ``bstar_sq[i]`` its squared length and
    ``mu[i][j]`` the coefficient of b*_j in b_i (``mu[i][i] == 1``).
    """

    bstar: tuple
    bstar_sq: tuple
    mu: tuple

    @property
    def dim(self):
        return len(self.bstar)

    def min_norm_sq(self):
        return min(self.bstar_sq)

    def reconstruct(self, i):
        n = len(self.bstar[i])
        return tuple(sum((self.mu[i][j] * self.bstar[j][k] for j in range(i + 1)), Fraction(0))
                     for k in range(n))


def _dot(u, v):
    return sum(a * b for a, b in zip(u, v))


def norm_sq(v):
    return sum(x * x for x in v)


def _round_half_up(x):
    return math.floor(Fraction(x) + Fraction(1, 2))


def _require_full_column_rank(B):
    if B.rank() != B.cols:
        raise RankDeficientError(shape=B.shape)


def _require_square(B):
    if B.rows != B.cols:
        raise PreconditionError("basis must be square (full rank in Z^n)", code="not full rank",
                                shape=B.shape)


def det_abs(B):
    return abs(B.det())


def rational_inverse(B):
    """Exact inverse of a square nonsingular integer matrix, rows of Fractions."""
    _require_square(B)
    n = B.rows
    a = [[Fraction(v) for v in row] + [Fraction(int(i == j)) for j in range(n)]
         for i, row in enumerate(B.entries)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            raise RankDeficientError(shape=B.shape)
        a[col], a[pivot] = a[pivot], a[col]
        inv = 1 / a[col][col]
        a[col] = [v * inv for v in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return tuple(tuple(row[n:]) for row in a)


def solve_rational(B, t):
    """Coordinates x with B x = t for square nonsingular B."""
    inv = rational_inverse(B)
    t = [Fraction(v) for v in t]
    return tuple(sum((row[j] * t[j] for j in range(len(t))), Fraction(0)) for row in inv)


def integer_inverse(U):
    """Inverse of a unimodular matrix as an IntMatrix."""
    inv = rational_inverse(U)
    if any(v.denominator != 1 for row in inv for v in row):
        raise PreconditionError("matrix is not unimodular", code="not unimodular")
    return IntMatrix(tuple(tuple(int(v) for v in row) for row in inv))


def is_unimodular(U):
    return U.rows == U.cols and abs(U.det()) == 1


def in_lattice(B, v):
    """Membership test for square full rank B."""
    return all(x.denominator == 1 for x in solve_rational(B, v))


def hnf(M):
    """
    Column-style Hermite normal form of a full row rank integer matrix.

    The columns of the result span the same integer lattice as the columns
    of M; for an n x k input of rank n the result is n x n upper triangular.
    """
    if M.rank() != M.rows:
        raise RankDeficientError(shape=M.shape)
    return IntMatrix.from_sympy(hermite_normal_form(M.to_sympy()))


def same_lattice(A, B):
    """True when the column lattices of A and B coincide (HNF equality)."""
    if A.rows != B.rows:
        return False
    return hnf(A) == hnf(B)


def snf(M):
    """
    Smith normal form with transforms.

    sympy.matrices.normalforms.smith_normal_form returns D only, so U and V
    are tracked here.

    Returns (U, D, V) with U @ M @ V == D, U and V unimodular, D diagonal
    with non-negative entries and d_i | d_{i+1}.
    """
    m, n = M.shape
    a = [list(row) for row in M.entries]
    u = [[int(i == j) for j in range(m)] for i in range(m)]
    v = [[int(i == j) for j in range(n)] for i in range(n)]

    def swap_rows(i, j):
        a[i], a[j] = a[j], a[i]
        u[i], u[j] = u[j], u[i]

    def swap_cols(i, j):
        for row in a:
            row[i], row[j] = row[j], row[i]
        for row in v:
            row[i], row[j] = row[j], row[i]

    def add_row(dst, src, f):
        a[dst] = [x + f * y for x, y in zip(a[dst], a[src])]
        u[dst] = [x + f * y for x, y in zip(u[dst], u[src])]

    def add_col(dst, src, f):
        for row in a:
            row[dst] += f * row[src]
        for row in v:
            row[dst] += f * row[src]

    for t in range(min(m, n)):
        nonzero = [(abs(a[i][j]), i, j) for i in range(t, m) for j in range(t, n) if a[i][j]]
        if not nonzero:
            break
        _, i, j = min(nonzero)
        swap_rows(t, i)
        swap_cols(t, j)
        while True:
            for i in range(t + 1, m):
                if a[i][t]:
                    add_row(i, t, -(a[i][t] // a[t][t]))
            for j in range(t + 1, n):
                if a[t][j]:
                    add_col(j, t, -(a[t][j] // a[t][t]))
            leftovers = [(abs(a[i][t]), i, t) for i in range(t + 1, m) if a[i][t]]
            leftovers += [(abs(a[t][j]), t, j) for j in range(t + 1, n) if a[t][j]]
            if leftovers:
                _, i, j = min(leftovers)
                swap_rows(t, i)
                swap_cols(t, j)
                continue
            bad = next(((i, j) for i in range(t + 1, m) for j in range(t + 1, n)
                        if a[i][j] % a[t][t]), None)
            if bad is None:
                break
            add_row(t, bad[0], 1)
        if a[t][t] < 0:
            a[t] = [-x for x in a[t]]
            u[t] = [-x for x in u[t]]
    return IntMatrix(tuple(map(tuple, u))), IntMatrix(tuple(map(tuple, a))), IntMatrix(tuple(map(tuple, v)))


def invariant_factors(M):
    """Nonzero diagonal of the Smith normal form."""
    _, D, _ = snf(M)
    return tuple(D[i, i] for i in range(min(D.shape)) if D[i, i])


def gram_schmidt(B):
    """Exact Gram-Schmidt orthogonalisation of the columns of B."""
    _require_full_column_rank(B)
    return _gram_schmidt_columns([[Fraction(x) for x in col] for col in B.columns()])


def _gram_schmidt_columns(cols):
    k = len(cols)
    bstar, bstar_sq, mu = [], [], []
    for i in range(k):
        row = [Fraction(0)] * k
        row[i] = Fraction(1)
        w = list(cols[i])
        for j in range(i):
            row[j] = _dot(cols[i], bstar[j]) / bstar_sq[j]
            w = [x - row[j] * y for x, y in zip(w, bstar[j])]
        bstar.append(tuple(w))
        bstar_sq.append(_dot(w, w))
        mu.append(tuple(row))
    return GramSchmidtData(tuple(bstar), tuple(bstar_sq), tuple(mu))


def _check_delta(delta_lll):
    delta = Fraction(delta_lll)
    if not Fraction(1, 4) < delta <= 1:
        raise PreconditionError(f"delta_lll must lie in (1/4, 1], got {format_rational(delta)}",
                                code="bad delta")
    return delta


def lovasz_ratio(delta_lll=conf.DELTA_LLL):
    """Ratio D with ||b*_{i-1}|| <= D ||b*_i|| on an LLL-reduced basis: 1/sqrt(delta - 1/4)."""
    delta = _check_delta(delta_lll)
    return 1 / math.sqrt(delta - Fraction(1, 4))


def lll_reduce(B, delta_lll=conf.DELTA_LLL):
    """
    LLL reduction with exact rational Gram-Schmidt updates.

    Matrix.lll needs sympy 1.12 and keeps no Gram-Schmidt data.

    Args:
        B: basis (columns)
        delta_lll: Lovasz parameter in (1/4, 1]

    Returns:
        Reduced basis spanning the same lattice
    """
    delta = _check_delta(delta_lll)
    _require_full_column_rank(B)
    b = [list(col) for col in B.columns()]
    n = len(b)
    gs = _gram_schmidt_columns([[Fraction(x) for x in col] for col in b])
    mu = [list(row) for row in gs.mu]
    bsq = list(gs.bstar_sq)
    swaps = 0

    def size_reduce(k, j):
        r = _round_half_up(mu[k][j])
        if r:
            b[k] = [x - r * y for x, y in zip(b[k], b[j])]
            for l in range(j):
                mu[k][l] -= r * mu[j][l]
            mu[k][j] -= r

    k = 1
    while k < n:
        size_reduce(k, k - 1)
        if bsq[k] >= (delta - mu[k][k - 1] ** 2) * bsq[k - 1]:
            for j in range(k - 2, -1, -1):
                size_reduce(k, j)
            k += 1
            continue
        swaps += 1
        b[k], b[k - 1] = b[k - 1], b[k]
        m = mu[k][k - 1]
        new_sq = bsq[k] + m * m * bsq[k - 1]
        mu[k][k - 1] = m * bsq[k - 1] / new_sq
        bsq[k] = bsq[k - 1] * bsq[k] / new_sq
        bsq[k - 1] = new_sq
        for j in range(k - 1):
            mu[k][j], mu[k - 1][j] = mu[k - 1][j], mu[k][j]
        for i in range(k + 1, n):
            t = mu[i][k]
            mu[i][k] = mu[i][k - 1] - m * t
            mu[i][k - 1] = t + mu[k][k - 1] * mu[i][k]
        k = max(k - 1, 1)
    logger.debug("LLL on %dx%d basis finished after %d swaps", B.rows, B.cols, swaps)
    return IntMatrix.from_columns(b)


def is_lll_reduced(B, delta_lll=conf.DELTA_LLL):
    delta = _check_delta(delta_lll)
    gs = gram_schmidt(B)
    n = gs.dim
    for i in range(n):
        for j in range(i):
            if abs(gs.mu[i][j]) > Fraction(1, 2):
                return False
    return all(gs.bstar_sq[k] >= (delta - gs.mu[k][k - 1] ** 2) * gs.bstar_sq[k - 1]
               for k in range(1, n))


def babai_guarantee_factor(n):
    return 2 ** (n / 2)


def _gs_coordinates(gs, t):
    """Coordinates of t along the b*_j and the squared norm of the residual."""
    t = [Fraction(x) for x in t]
    x = [_dot(t, gs.bstar[j]) / gs.bstar_sq[j] for j in range(gs.dim)]
    residual = list(t)
    for j in range(gs.dim):
        residual = [r - x[j] * s for r, s in zip(residual, gs.bstar[j])]
    return x, _dot(residual, residual)


def _nearest_plane(gs, x, start, stop, fixed):
    """Round coordinates stop-1..start given already fixed coefficients for indices >= stop."""
    coeffs = dict(fixed)
    for j in range(stop - 1, start - 1, -1):
        center = x[j] - sum((coeffs[i] * gs.mu[i][j] for i in coeffs if i > j), Fraction(0))
        coeffs[j] = _round_half_up(center)
    return coeffs


def babai_nearest_plane(B, t):
    """
    Babai's nearest plane algorithm.

    Returns integer coefficients c with B c close to t. The 2^{n/2}
    approximation guarantee needs an LLL-reduced B; recovery is exact for
    any B whenever dist(t, L) < min_i ||b*_i|| / 2.
    """
    gs = gram_schmidt(B)
    x, residual = _gs_coordinates(gs, t)
    if residual != 0:
        raise PreconditionError("target outside span of the basis", code="outside span")
    coeffs = _nearest_plane(gs, x, 0, gs.dim, {})
    return tuple(coeffs[j] for j in range(gs.dim))


def mg_complete(B, S):
    """
    Turn linearly independent lattice vectors S into an equivalent basis R.

    Guarantees (k = 1..len(S)): span(r_1..r_k) = span(s_1..s_k),
    ||r*_k|| <= ||s*_k|| and ||r_k|| <= max(sqrt(k)/2 ||s_k||, ||s_k||)
    when S is sorted by length.
    """
    _require_square(B)
    _require_full_column_rank(B)
    s_cols = S.columns()
    if S.rows != B.rows or S.rank() != S.cols:
        raise RankDeficientError("S is not linearly independent", shape=S.shape)
    lengths = [norm_sq(s) for s in s_cols]
    if lengths != sorted(lengths):
        logger.warning("mg_complete: S is not sorted by length, norm bounds may not hold")
    n, k = B.cols, S.cols
    w = []
    for s in s_cols:
        coords = solve_rational(B, s)
        if any(c.denominator != 1 for c in coords):
            raise PreconditionError("S is not contained in L(B)", code="not in lattice")
        w.append([int(c) for c in coords])
    # W is n x k with columns w[j]; row operations on W are mirrored as
    # column operations on R so that S = R W throughout
    W = [[w[j][i] for j in range(k)] for i in range(n)]
    R = [list(col) for col in B.columns()]
    for j in range(k):
        while True:
            rows = [i for i in range(j, n) if W[i][j]]
            p = min(rows, key=lambda i: abs(W[i][j]))
            W[j], W[p] = W[p], W[j]
            R[j], R[p] = R[p], R[j]
            clean = True
            for i in range(j + 1, n):
                if W[i][j]:
                    f = W[i][j] // W[j][j]
                    W[i] = [x - f * y for x, y in zip(W[i], W[j])]
                    R[j] = [x + f * y for x, y in zip(R[j], R[i])]
                    clean = clean and W[i][j] == 0
            if clean:
                break
        if W[j][j] < 0:
            W[j] = [-x for x in W[j]]
            R[j] = [-x for x in R[j]]
    s_gs = _gram_schmidt_columns([[Fraction(x) for x in s] for s in s_cols])
    for j in range(k):
        if abs(W[j][j]) == 1:
            R[j] = list(s_cols[j])
            continue
        # size-reduce against s_1..s_{j-1}, which lie in L(r_1..r_{j-1})
        x, _ = _gs_coordinates(s_gs, R[j])
        coeffs = _nearest_plane(s_gs, x, 0, j, {})
        for i in range(j):
            if coeffs[i]:
                R[j] = [a - coeffs[i] * c for a, c in zip(R[j], s_cols[i])]
    return IntMatrix.from_columns(R)


class _Enumerator:
    """Depth-first enumeration of coefficient vectors inside a radius.

    Works on the Gram-Schmidt frame of a basis; candidates are compared by
    exact squared distance and ties are kept so the caller can break them.
    """

    def __init__(self, gs, x, budget):
        self.gs = gs
        self.x = x
        self.budget = budget
        self.visited = 0

    def run(self, start, radius_sq, exclude_zero=False):
        n = self.gs.dim
        self.best_sq = Fraction(radius_sq)
        self.best = []
        self.exclude_zero = exclude_zero
        self.start = start
        self._descend(n - 1, {}, Fraction(0))
        return self.best_sq, self.best

    def _descend(self, j, coeffs, partial):
        self.visited += 1
        if self.visited > self.budget:
            raise BudgetExceededError(f"enumeration budget of {self.budget} nodes exceeded",
                                      code="enumeration budget")
        if j < self.start:
            if self.exclude_zero and not any(coeffs.values()):
                return
            vec = tuple(coeffs[i] for i in range(self.start, self.gs.dim))
            if partial < self.best_sq:
                self.best_sq, self.best = partial, [vec]
            elif partial == self.best_sq:
                self.best.append(vec)
            return
        gs = self.gs
        center = self.x[j] - sum((coeffs[i] * gs.mu[i][j] for i in coeffs), Fraction(0))
        remaining = self.best_sq - partial
        if remaining < 0:
            return
        spread = math.sqrt(remaining / gs.bstar_sq[j]) if remaining else 0.0
        lo = math.floor(center - spread) - 1
        hi = math.ceil(center + spread) + 1
        for v in range(lo, hi + 1):
            d = partial + (v - center) ** 2 * gs.bstar_sq[j]
            if d > self.best_sq:
                continue
            coeffs[j] = v
            self._descend(j - 1, coeffs, d)
            del coeffs[j]


def _reduced_frame(B, delta_lll=conf.DELTA_LLL):
    """LLL-reduced basis C, its GS data and the integer transform U with C = B U."""
    C = lll_reduce(B, delta_lll)
    if B.rows == B.cols:
        U = [[int(v) for v in solve_rational(B, col)] for col in C.columns()]
        transform = IntMatrix.from_columns(U)
    else:
        transform = _transform_via_least_squares(B, C)
    return C, gram_schmidt(C), transform


def _transform_via_least_squares(B, C):
    gs_b = gram_schmidt(B)
    cols = []
    for c in C.columns():
        x, _ = _gs_coordinates(gs_b, c)
        # back-substitute the unitriangular mu system
        k = gs_b.dim
        coeff = [Fraction(0)] * k
        for i in range(k - 1, -1, -1):
            coeff[i] = x[i] - sum((coeff[l] * gs_b.mu[l][i] for l in range(i + 1, k)), Fraction(0))
        cols.append([int(v) for v in coeff])
    return IntMatrix.from_columns(cols)


def _lex_min(vectors):
    return min(vectors)


def exact_cvp_enum(B, t, radius_bound=None, budget=None):
    """
    Exact closest vector by enumeration.

    Returns the coefficient vector (w.r.t. B) of a closest lattice vector;
    among equally close vectors the lexicographically smallest coefficient
    vector wins. Raises RadiusExceededError when nothing lies within
    radius_bound.
    """
    budget = conf.get_settings().enum_budget if budget is None else budget
    C, gs, U = _reduced_frame(B)
    x, residual = _gs_coordinates(gs, t)
    if radius_bound is None:
        babai = _nearest_plane(gs, x, 0, gs.dim, {})
        point = C @ tuple(babai[j] for j in range(gs.dim))
        radius_sq = norm_sq([Fraction(a) - Fraction(b) for a, b in zip(t, point)])
    else:
        radius_sq = Fraction(radius_bound) ** 2
    inner = radius_sq - residual
    if inner < 0:
        raise RadiusExceededError(radius=str(radius_bound))
    best_sq, best = _Enumerator(gs, x, budget).run(0, inner)
    if not best:
        raise RadiusExceededError(radius=str(radius_bound))
    candidates = [U @ vec for vec in best]
    logger.debug("exact_cvp_enum: %d tied closest vectors at distance^2 %s",
                 len(candidates), best_sq + residual)
    return _lex_min(candidates)


def cvp_distance_sq(B, t, coeffs):
    point = B @ coeffs
    return norm_sq([Fraction(a) - b for a, b in zip(t, point)])


def block_reduce_cvp(B, t, beta):
    """
    Approximate CVP with block size beta.

    LLL preprocessing, exact enumeration over the trailing block starting at
    the longest Gram-Schmidt vector of the last beta, nearest plane for the
    remaining indices. The Babai answer is kept when it is closer. Output
    distance is within sqrt(m) * beta^((m-1)/(beta-1)) of the optimum.
    """
    if beta < 2:
        raise PreconditionError("block size beta must be at least 2", code="bad beta", beta=beta)
    m = B.cols
    if beta >= m:
        if beta > m:
            logger.warning("block_reduce_cvp: beta=%d clamped to dimension %d", beta, m)
        return exact_cvp_enum(B, t)
    C, gs, U = _reduced_frame(B)
    x, residual = _gs_coordinates(gs, t)
    if residual != 0:
        raise PreconditionError("target outside span of the basis", code="outside span")
    tail = range(m - beta, m)
    k = max(tail, key=lambda i: (gs.bstar_sq[i], -i))
    babai = _nearest_plane(gs, x, 0, m, {})
    block_radius = sum(((babai[j] - (x[j] - sum((babai[i] * gs.mu[i][j] for i in range(j + 1, m)),
                                                    Fraction(0)))) ** 2 * gs.bstar_sq[j]
                        for j in range(k, m)), Fraction(0))
    _, best = _Enumerator(gs, x, conf.get_settings().enum_budget).run(k, block_radius)
    block = _lex_min(best)
    fixed = {k + i: v for i, v in enumerate(block)}
    coeffs = _nearest_plane(gs, x, 0, k, fixed)
    block_vec = tuple(coeffs[j] for j in range(m))
    babai_vec = tuple(babai[j] for j in range(m))
    d_block = cvp_distance_sq(C, t, block_vec)
    d_babai = cvp_distance_sq(C, t, babai_vec)
    chosen = block_vec if d_block <= d_babai else babai_vec
    return U @ chosen


def schnorr_factor(m, beta):
    """sqrt(m) * beta^((m-1)/(beta-1))."""
    beta = min(beta, m)
    if m == 1:
        return 1.0
    return math.sqrt(m) * beta ** ((m - 1) / (beta - 1))


def _lcm(a, b):
    return a * b // math.gcd(a, b)


def periodicity(B):
    """Least q >= 1 with q Z^n contained in L(B)."""
    inv = rational_inverse(B)
    return reduce(_lcm, (v.denominator for row in inv for v in row), 1)


def rect_periodicity(B):
    """Least r_i > 0 with r_i e_i in L(B), one per axis."""
    inv = rational_inverse(B)
    n = B.rows
    return tuple(reduce(_lcm, (inv[i][j].denominator for i in range(n)), 1) for j in range(n))


def shortest_vector(B, budget=None):
    """Coefficients and squared length of a shortest nonzero vector."""
    budget = conf.get_settings().enum_budget if budget is None else budget
    C, gs, U = _reduced_frame(B)
    radius_sq = min(norm_sq(c) for c in C.columns())
    best_sq, best = _Enumerator(gs, [Fraction(0)] * gs.dim, budget).run(0, radius_sq, exclude_zero=True)
    return U @ _lex_min(best), int(best_sq)


def lambda1_sq_exact(B, budget=None):
    return shortest_vector(B, budget)[1]


def lambda1_exact(B, budget=None):
    """Exact shortest nonzero vector length (square root of an exact integer)."""
    return math.sqrt(lambda1_sq_exact(B, budget))

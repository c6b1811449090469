import math
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from sympy import ZZ
from sympy.matrices.normalforms import smith_normal_form

from qbdd.errors import BudgetExceededError, PreconditionError, RadiusExceededError, RankDeficientError
from qbdd.solver.intlat import (IntMatrix, Lattice, babai_nearest_plane, block_reduce_cvp,
                                cvp_distance_sq, exact_cvp_enum, gram_schmidt, hnf, in_lattice,
                                invariant_factors, is_lll_reduced, is_unimodular, lambda1_exact,
                                lambda1_sq_exact, lll_reduce, lovasz_ratio, mg_complete, norm_sq,
                                periodicity, rect_periodicity, same_lattice, schnorr_factor,
                                shortest_vector, snf)


def square_matrices(n, bound=6):
    row = st.lists(st.integers(-bound, bound), min_size=n, max_size=n)
    return st.lists(row, min_size=n, max_size=n).map(IntMatrix.from_rows)


def rect_matrices(rows, cols, bound=6):
    row = st.lists(st.integers(-bound, bound), min_size=cols, max_size=cols)
    return st.lists(row, min_size=rows, max_size=rows).map(IntMatrix.from_rows)


class TestIntMatrix:
    """Basic matrix operations."""

    def test_matmul_and_det(self):
        A = IntMatrix.from_rows([[2, 1], [0, 3]])
        assert A @ (1, 1) == (3, 3)
        assert (A @ IntMatrix.identity(2)) == A
        assert A.det() == 6
        assert IntMatrix.from_rows([[0, 1], [1, 0]]).det() == -1

    def test_columns_and_transpose(self):
        A = IntMatrix.from_columns([(1, 2, 3), (4, 5, 6)])
        assert A.shape == (3, 2)
        assert A.column(1) == (4, 5, 6)
        assert A.transpose().row(0) == (1, 2, 3)

    def test_text_format_with_comments(self):
        text = "2 2  # header\n1 2\n3 4 # last row\n"
        A = IntMatrix.from_text(text)
        assert A.to_lists() == [[1, 2], [3, 4]]
        assert IntMatrix.from_text(A.to_text()) == A

    def test_text_format_wrong_count(self):
        with pytest.raises(ValueError):
            IntMatrix.from_text("2 2\n1 2 3\n")

    def test_ragged_rows_rejected(self):
        with pytest.raises(ValueError):
            IntMatrix(((1, 2), (3,)))

    @given(square_matrices(3))
    @settings(max_examples=40, deadline=None)
    def test_det_matches_sympy(self, A):
        assert A.det() == A.to_sympy().det()


class TestNormalForms:

    def test_hnf_of_unimodular_is_identity(self):
        assert hnf(IntMatrix.from_rows([[1, 3], [0, 1]])) == IntMatrix.identity(2)

    def test_hnf_rank_deficient(self):
        with pytest.raises(RankDeficientError):
            hnf(IntMatrix.from_rows([[1, 2], [2, 4]]))

    def test_lattice_rejects_dependent_columns(self):
        with pytest.raises(RankDeficientError) as exc:
            Lattice(IntMatrix.from_rows([[1, 2], [2, 4]]))
        assert exc.value.code == "rank deficient"

    def test_snf_small_example(self):
        U, D, V = snf(IntMatrix.diag((2, 3)))
        assert D == IntMatrix.diag((1, 6))
        assert U @ IntMatrix.diag((2, 3)) @ V == D

    def test_invariant_factors(self):
        assert invariant_factors(IntMatrix.from_rows([[2, 4, 4], [-6, 6, 12], [10, -4, -16]])) == (2, 6, 12)

    @given(rect_matrices(3, 3))
    @settings(max_examples=40, deadline=None)
    def test_snf_square(self, M):
        self._check_snf(M)

    @given(rect_matrices(2, 3))
    @settings(max_examples=40, deadline=None)
    def test_snf_wide(self, M):
        self._check_snf(M)

    @staticmethod
    def _check_snf(M):
        U, D, V = snf(M)
        assert is_unimodular(U) and is_unimodular(V)
        assert U @ M @ V == D
        diag = [D[i, i] for i in range(min(D.shape))]
        assert all(D[i, j] == 0 for i in range(D.rows) for j in range(D.cols) if i != j)
        assert all(d >= 0 for d in diag)
        for a, b in zip(diag, diag[1:]):
            assert (b % a == 0) if a else b == 0

    @given(square_matrices(3))
    @settings(max_examples=30, deadline=None)
    def test_invariant_factors_match_sympy(self, M):
        assume(M.det() != 0)
        D = smith_normal_form(M.to_sympy(), domain=ZZ)
        expected = sorted(abs(int(D[i, i])) for i in range(3))
        assert list(invariant_factors(M)) == expected
        assert math.prod(expected) == abs(M.det())

    @given(square_matrices(3))
    @settings(max_examples=30, deadline=None)
    def test_hnf_same_lattice(self, B):
        assume(B.det() != 0)
        H = hnf(B)
        assert abs(H.det()) == abs(B.det())
        assert all(H[i, j] == 0 for i in range(3) for j in range(i))
        assert all(in_lattice(B, col) for col in H.columns())
        assert all(in_lattice(H, col) for col in B.columns())


class TestGramSchmidtAndLLL:

    def test_gram_schmidt_reconstructs(self):
        B = IntMatrix.from_columns([(3, 1, 0), (1, 2, 1), (0, 1, 5)])
        gs = gram_schmidt(B)
        for i, col in enumerate(B.columns()):
            assert gs.reconstruct(i) == tuple(Fraction(v) for v in col)
        for i in range(3):
            for j in range(i):
                assert sum(a * b for a, b in zip(gs.bstar[i], gs.bstar[j])) == 0

    def test_lovasz_ratio_default(self):
        assert math.isclose(lovasz_ratio(Fraction(3, 4)), math.sqrt(2))

    def test_bad_delta(self):
        with pytest.raises(PreconditionError):
            lovasz_ratio(Fraction(1, 4))

    @given(square_matrices(3, bound=9))
    @settings(max_examples=30, deadline=None)
    def test_lll_conditions(self, B):
        assume(B.det() != 0)
        C = lll_reduce(B)
        assert same_lattice(B, C)
        assert is_lll_reduced(C)
        # ||b_1||^2 <= 2^{n-1} lambda_1^2 for delta = 3/4
        assert norm_sq(C.column(0)) <= 4 * lambda1_sq_exact(B)

    def test_lll_on_skewed_basis(self):
        B = IntMatrix.from_columns([(1, 0, 0), (1000, 1, 0), (3000, 7000, 1)])
        C = lll_reduce(B)
        assert is_lll_reduced(C)
        assert abs(C.det()) == 1
        assert all(norm_sq(c) <= 4 for c in C.columns())


class TestBabai:

    def test_one_dimensional(self):
        B = IntMatrix.from_rows([[5]])
        assert babai_nearest_plane(B, (7,)) == (1,)
        assert babai_nearest_plane(B, (8,)) == (2,)

    def test_outside_span(self):
        B = IntMatrix.from_columns([(1, 0, 0), (0, 1, 0)])
        with pytest.raises(PreconditionError):
            babai_nearest_plane(B, (0, 0, 1))

    @given(square_matrices(3, bound=9), st.lists(st.integers(-20, 20), min_size=3, max_size=3),
           st.integers(0, 2), st.sampled_from([-1, 1]))
    @settings(max_examples=30, deadline=None)
    def test_exact_below_half_min_gs(self, B, c, axis, sign):
        assume(B.det() != 0)
        C = lll_reduce(B)
        min_sq = gram_schmidt(C).min_norm_sq()
        eps = sign * min_sq / (4 * (min_sq + 1))
        t = list(C @ c)
        t[axis] = t[axis] + eps
        assert babai_nearest_plane(C, t) == tuple(c)

    def test_exact_for_random_offsets(self, rng):
        C = lll_reduce(IntMatrix.from_columns([(4, 1, 0), (1, 5, 2), (0, 2, 6)]))
        min_sq = gram_schmidt(C).min_norm_sq()
        for _ in range(100):
            c = tuple(int(v) for v in rng.integers(-20, 21, size=3))
            raw = [int(v) for v in rng.integers(-100, 101, size=3)]
            # scale so that 4 |delta|^2 < min |b*|^2
            k = math.isqrt(int(4 * norm_sq(raw) / min_sq)) + 1
            t = [x + Fraction(d, k) for x, d in zip(C @ c, raw)]
            assert 4 * norm_sq([Fraction(d, k) for d in raw]) < min_sq
            assert babai_nearest_plane(C, t) == c


class TestMgComplete:

    def test_rectangle_completion(self):
        B = IntMatrix.from_columns([(2, 0), (1, 3)])
        S = IntMatrix.diag((2, 6))
        R = mg_complete(B, S)
        assert same_lattice(R, B)
        assert R.column(0) == (2, 0)
        r_gs, s_gs = gram_schmidt(R), gram_schmidt(S)
        for k in range(2):
            assert r_gs.bstar_sq[k] <= s_gs.bstar_sq[k]
            assert norm_sq(R.column(k)) <= norm_sq(S.column(k))

    def test_rejects_vectors_outside_lattice(self):
        B = IntMatrix.diag((2, 2))
        with pytest.raises(PreconditionError):
            mg_complete(B, IntMatrix.diag((1, 2)))

    @given(square_matrices(3, bound=5), st.integers(1, 4))
    @settings(max_examples=25, deadline=None)
    def test_prefix_spans(self, B, scale):
        assume(B.det() != 0)
        d = abs(B.det())
        S = IntMatrix.diag((d, d * scale, d * scale * 2))
        R = mg_complete(B, S)
        assert same_lattice(R, B)
        r_gs, s_gs = gram_schmidt(R), gram_schmidt(S)
        for k in range(3):
            assert r_gs.bstar_sq[k] <= s_gs.bstar_sq[k]
            bound = max(Fraction(k + 1, 4) * norm_sq(S.column(k)), norm_sq(S.column(k)))
            assert norm_sq(R.column(k)) <= bound
        # r_1 lies on the axis spanned by s_1
        assert R.column(0)[1] == 0 and R.column(0)[2] == 0


class TestEnumeration:

    def test_ties_break_lexicographically(self):
        B = IntMatrix.diag((2, 2))
        assert exact_cvp_enum(B, (1, 1)) == (0, 0)

    def test_radius_exceeded(self):
        with pytest.raises(RadiusExceededError):
            exact_cvp_enum(IntMatrix.from_rows([[5]]), (2,), radius_bound=1)

    def test_budget(self):
        with pytest.raises(BudgetExceededError) as exc:
            exact_cvp_enum(IntMatrix.diag((3, 5, 7)), (1, 2, 3), budget=1)
        assert exc.value.exit_code == 3

    @given(square_matrices(3, bound=8), st.lists(st.integers(-30, 30), min_size=3, max_size=3))
    @settings(max_examples=25, deadline=None)
    def test_enum_beats_babai(self, B, t):
        assume(B.det() != 0)
        best = exact_cvp_enum(B, t)
        C = lll_reduce(B)
        assert cvp_distance_sq(B, t, best) <= cvp_distance_sq(C, t, babai_nearest_plane(C, t))

    @given(square_matrices(4, bound=6), st.lists(st.integers(-25, 25), min_size=4, max_size=4),
           st.integers(2, 3))
    @settings(max_examples=20, deadline=None)
    def test_block_reduce_factor(self, B, t, beta):
        assume(B.det() != 0)
        opt = cvp_distance_sq(B, t, exact_cvp_enum(B, t))
        got = cvp_distance_sq(B, t, block_reduce_cvp(B, t, beta))
        assert got >= opt
        assert float(got) <= schnorr_factor(4, beta) ** 2 * float(opt) + 1e-9

    def test_block_full_dimension_is_exact(self):
        B = IntMatrix.from_columns([(4, 1, 0), (1, 5, 2), (0, 2, 6)])
        t = (7, -3, 11)
        assert block_reduce_cvp(B, t, 3) == exact_cvp_enum(B, t)

    def test_block_size_too_small(self):
        with pytest.raises(PreconditionError):
            block_reduce_cvp(IntMatrix.identity(3), (0, 0, 0), 1)

    def test_shortest_vector(self):
        coeffs, sq = shortest_vector(IntMatrix.diag((2, 4)))
        assert sq == 4
        assert norm_sq(IntMatrix.diag((2, 4)) @ coeffs) == 4
        assert lambda1_exact(IntMatrix.from_rows([[5]])) == 5.0


class TestPeriodicity:

    def test_periodicity(self):
        assert periodicity(IntMatrix.diag((2, 4))) == 4
        assert periodicity(IntMatrix.identity(3)) == 1

    def test_rect_periodicity(self):
        B = IntMatrix.from_columns([(2, 0), (1, 3)])
        assert rect_periodicity(B) == (2, 6)
        assert periodicity(B) == 6

    @given(square_matrices(3, bound=7))
    @settings(max_examples=30, deadline=None)
    def test_minimal_and_contained(self, B):
        assume(B.det() != 0)
        q = periodicity(B)
        assert q <= abs(B.det())
        for i in range(3):
            assert in_lattice(B, tuple(q * int(i == k) for k in range(3)))
        for p in range(1, q):
            if q % p == 0:
                assert not all(in_lattice(B, tuple(p * int(i == k) for k in range(3))) for i in range(3))
        rect = rect_periodicity(B)
        assert math.lcm(*rect) == q
        for i, r in enumerate(rect):
            assert in_lattice(B, tuple(r * int(i == k) for k in range(3)))

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qbdd.errors import BudgetExceededError, PreconditionError
from qbdd.solver.intlat import IntMatrix, exact_cvp_enum, in_lattice, lambda1_exact, same_lattice
from qbdd.solver.zqgroup import (FiniteGroupDecomp, ZqVector, charphase, charphase_all,
                                 coefficient_map_injective, decomp_from_json, decomp_to_json,
                                 decompose, dist_q, group_cvp_exact, group_elements,
                                 is_degenerate, is_primitive, lambda1_group, lift_solution,
                                 lifted_lattice, modnorm, negate_coefficients, solve_coefficients)

from tests.lattices import rect_lattice


def two_factor_decomp():
    # Z_2 x Z_12 inside Z_12^2
    return FiniteGroupDecomp(G=((6, 0), (0, 1)), qvec=(2, 12), q=12, n=2)


class TestModularNorm:

    def test_centered_values(self):
        assert modnorm((0, 0), 8) == 0
        assert modnorm((7, 1), 8) == math.sqrt(2)
        assert modnorm((4,), 8) == 4
        assert ZqVector((9, -1), 8).entries == (1, 7)

    @given(st.integers(2, 40), st.lists(st.integers(-100, 100), min_size=3, max_size=3),
           st.lists(st.integers(-100, 100), min_size=3, max_size=3), st.integers(0, 6))
    @settings(max_examples=60)
    def test_norm_properties(self, q, x, y, k):
        nx = modnorm(x, q)
        assert modnorm([-v for v in x], q) == pytest.approx(nx)
        assert modnorm([a + b for a, b in zip(x, y)], q) <= nx + modnorm(y, q) + 1e-9
        assert modnorm([k * v for v in x], q) <= k * nx + 1e-9
        assert nx <= math.sqrt(3) * q / 2 + 1e-9
        assert dist_q(x, y, q) == pytest.approx(dist_q(y, x, q))


class TestDecompose:

    def test_single_factor(self):
        decomp = decompose(IntMatrix.diag((2, 4)), 4)
        assert decomp.qvec == (2,)
        assert decomp.column(0) == (2, 0)

    def test_trivial_lattices(self):
        assert decompose(IntMatrix.identity(3), 1).r == 0
        degenerate = decompose(IntMatrix.diag((8, 8)), 8)
        assert degenerate.r == 0
        assert is_degenerate(degenerate)
        assert lambda1_group(degenerate) == math.inf

    def test_not_q_periodic(self):
        with pytest.raises(PreconditionError) as exc:
            decompose(IntMatrix.diag((2, 3)), 4)
        assert exc.value.code == "not q-periodic"

    def test_decomp_validation(self):
        with pytest.raises(ValueError):
            FiniteGroupDecomp(G=((2,), (0,)), qvec=(8,), q=8, n=2)
        with pytest.raises(ValueError):
            FiniteGroupDecomp(G=((4, 1), (0, 0)), qvec=(2, 3), q=6, n=2)

    @pytest.mark.parametrize("generators, moduli, q", [
        ([(1, 3, 5)], (8, 8, 8), 8),
        ([(2, 4, 6), (0, 4, 4)], (8, 8, 8), 8),
        ([(1, 2, 0, 3)], (6, 6, 6, 6), 6),
        ([(3, 9)], (12, 12), 12),
    ])
    def test_lift_spans_original(self, generators, moduli, q):
        B = rect_lattice(generators, moduli)
        decomp = decompose(B, q)
        assert same_lattice(lifted_lattice(decomp), B)
        assert decomp.order() * abs(B.det()) == q ** B.rows
        for a, b in zip(decomp.qvec, decomp.qvec[1:]):
            assert b % a == 0

    def test_json_record(self):
        decomp = two_factor_decomp()
        assert decomp_from_json(decomp_to_json(decomp)) == decomp


class TestCharacters:

    def test_charphase_examples(self):
        decomp = two_factor_decomp()
        assert charphase((1, 1), (1, 5), decomp) == 11
        cyclic = FiniteGroupDecomp(G=((1,),), qvec=(8,), q=8, n=1)
        assert charphase((3,), (2,), cyclic) == 6

    def test_coefficient_range(self):
        with pytest.raises(PreconditionError):
            charphase((1, 1), (2, 0), two_factor_decomp())

    @given(st.integers(0, 1), st.integers(0, 11), st.integers(0, 1), st.integers(0, 11),
           st.integers(0, 1), st.integers(0, 11))
    def test_additive_in_coefficients(self, a0, a1, c0, c1, d0, d1):
        decomp = two_factor_decomp()
        a, c, d = (a0, a1), (c0, c1), (d0, d1)
        s = ((c0 + d0) % 2, (c1 + d1) % 12)
        total = charphase(a, s, decomp)
        assert total == (charphase(a, c, decomp) + charphase(a, d, decomp)) % 12
        assert (charphase(a, c, decomp) + charphase(a, negate_coefficients(c, decomp), decomp)) % 12 == 0

    def test_vectorised_matches_scalar(self):
        decomp = two_factor_decomp()
        coeffs, _ = group_elements(decomp)
        phases = charphase_all((1, 7), coeffs, decomp)
        for c, p in zip(coeffs, phases):
            assert charphase((1, 7), tuple(int(v) for v in c), decomp) == p


class TestGroupCvp:

    def test_exact_on_group_element(self, small_decomp):
        t = small_decomp.apply((3,))
        assert group_cvp_exact(small_decomp, t) == ((3,), 0.0)

    def test_trivial_group(self):
        decomp = FiniteGroupDecomp(G=((), ()), qvec=(), q=8, n=2)
        s, dist = group_cvp_exact(decomp, (3, 7))
        assert s == ()
        assert dist == pytest.approx(math.sqrt(10))

    def test_lambda1(self, small_decomp):
        assert lambda1_group(small_decomp) == 8.0
        assert lambda1_group(decompose(IntMatrix.diag((2, 4)), 4)) == 2.0
        diagonal = FiniteGroupDecomp(G=((1,), (1,)), qvec=(16,), q=16, n=2)
        assert lambda1_group(diagonal) == pytest.approx(math.sqrt(2))

    def test_lambda1_matches_lattice(self, rng):
        q = 64
        for _ in range(5):
            g = tuple(int(v) for v in rng.integers(0, q, size=4))
            B = rect_lattice([g], (q,) * 4)
            decomp = decompose(B, q)
            assert lambda1_exact(B) == pytest.approx(min(lambda1_group(decomp), q))

    def test_matches_lattice_enumeration(self, rng):
        for _ in range(20):
            n, q = int(rng.integers(2, 4)), int(rng.choice([8, 16]))
            g = tuple(int(v) for v in rng.integers(0, q, size=n))
            B = rect_lattice([g], (q,) * n)
            decomp = decompose(B, q)
            t = tuple(int(v) for v in rng.integers(-q, 2 * q, size=n))
            s, dist = group_cvp_exact(decomp, t)
            v = lift_solution(decomp, s, t, q)
            assert in_lattice(B, v)
            assert math.dist(t, v) == pytest.approx(dist)
            assert dist == pytest.approx(math.dist(t, B @ exact_cvp_enum(B, t)))

    def test_budget(self, small_decomp):
        with pytest.raises(BudgetExceededError):
            group_elements(small_decomp, budget=3)

    def test_elements_listed_lexicographically(self):
        coeffs, elements = group_elements(two_factor_decomp())
        assert len(coeffs) == 24
        assert [tuple(c) for c in coeffs] == sorted(tuple(c) for c in coeffs)
        assert np.array_equal(elements[13], np.array([6, 1]))


class TestCoefficients:

    def test_solve_coefficients(self, small_decomp):
        assert solve_coefficients(small_decomp.G, (12, 8), 16, (4,)) == (3,)
        assert solve_coefficients(small_decomp.G, (1, 0), 16, (4,)) is None
        assert solve_coefficients((), (0, 16), 16, ()) == ()

    def test_lift_solution(self, small_decomp):
        t = (12 + 1 + 32, 8 - 16)
        v = lift_solution(small_decomp, (3,), t, 16)
        assert v == (44, -8)
        assert lift_solution(small_decomp, (0,), (16, -32), 16) == (16, -32)

    def test_primitive_prime_modulus(self):
        assert is_primitive([(3,), (0,)], 7)
        assert not is_primitive([(0,), (0,)], 7)
        assert is_primitive([(2,), (4,)], 8) is False
        assert is_primitive([(2,), (3,)], 8)

    def test_injectivity(self):
        assert coefficient_map_injective([(4,), (8,)], 16, (4,))
        assert not coefficient_map_injective([(8,), (8,)], 16, (4,))

import math

import pytest

from qbdd.errors import PreconditionError, VerificationError
from qbdd.solver.experiments import closest_vector, generate_instance
from qbdd.solver.intlat import IntMatrix, in_lattice, lambda1_exact
from qbdd.solver.reduction import (BddInstance, ReducedInstance, admissible_m, check_reduced_instance,
                                   ladder_values, plant_group_instance, plant_lattice_instance,
                                   poly_eps1_shape, poly_sample_count, random_qary, random_qary_stats,
                                   regime_polylog, regime_sublinear, sample_bdd, sample_hip_bound,
                                   samplebdd_distance_bound, solve_bdd_poly, solve_bdd_tradeoff,
                                   tradeoff_balance, tradeoff_exponent, tradeoff_m, tradeoff_m_step_a)
from qbdd.solver.qsim import PeConfig
from qbdd.solver.zqgroup import FiniteGroupDecomp, coefficient_map_injective, modnorm


class TestParameterFormulas:

    def test_sample_counts(self):
        assert poly_sample_count(1, 4096) == 4
        assert admissible_m(4, 1, 4096, 0.1) == 5
        assert admissible_m(2, 1, 16, 0.1) == 5
        assert tradeoff_m(2, 1, 4096) == 5
        assert tradeoff_m(4, 1, 4096) == 5

    def test_step_a_count_exceeds_balanced_count(self):
        for beta in (2, 4, 8):
            assert tradeoff_m_step_a(beta, 1, 4096) > tradeoff_m(beta, 1, 4096)

    @pytest.mark.parametrize("beta, r, q", [(2, 1, 4096), (4, 1, 4096), (8, 2, 65536)])
    def test_balance_within_factor_two(self, beta, r, q):
        block, sampling, balanced = tradeoff_balance(beta, r, q, tradeoff_m(beta, r, q))
        assert balanced / 2 <= max(block, sampling) <= 2 * balanced

    def test_sublinear_regime_ratio(self):
        for eps in (0.05, 0.1, 0.25):
            result = regime_sublinear(1000, eps)
            assert result["ratio"] == pytest.approx(math.sqrt(1 - 2 * eps))

    def test_polylog_regime_matches(self):
        result = regime_polylog(1000, 2)
        assert result["exponent"] == pytest.approx(result["stated_exponent"])

    def test_bounds(self):
        assert samplebdd_distance_bound(0.0, 16, 1, 5, 2, 4.0, 0.1) == 0.0
        value = samplebdd_distance_bound(0.01, 16, 1, 4, 2, 2.0, 0.5)
        assert value == pytest.approx(0.1 * 2 * 2.0 * 260 * 2 ** 0.75 * 32 / 0.25)
        assert sample_hip_bound(16, 0.0, 2, 0.1) == 0.0

    def test_eps1_shapes(self):
        assert poly_eps1_shape(1, 256) == pytest.approx(2 ** (-4 * math.sqrt(8)))
        shapes = [tradeoff_exponent(beta, 1, 4096) for beta in (4, 8, 16, 32)]
        assert shapes == sorted(shapes)
        assert all(0 < s < 1 for s in shapes)

    def test_ladder_values(self):
        assert ladder_values(16) == [2, 4, 8, 16]
        assert ladder_values(1) == []


class TestSampleBdd:

    def test_m_below_rank(self, small_decomp, rng):
        with pytest.raises(PreconditionError) as exc:
            sample_bdd(small_decomp, 8, (0, 0), 0.0, 0, 0.1, rng)
        assert exc.value.code == "m < r"

    def test_p_err_too_small(self, small_decomp, rng):
        with pytest.raises(PreconditionError) as exc:
            sample_bdd(small_decomp, 8, (0, 0), 0.0, 1, 0.1, rng)
        assert exc.value.code == "p_err too small"

    def test_sigma_clamp(self, small_decomp, rng):
        with pytest.raises(PreconditionError) as exc:
            sample_bdd(small_decomp, 2, (0, 0), 0.0, 5, 0.1, rng)
        assert exc.value.code == "sigma clamp"

    @pytest.mark.parametrize("backend", ["gram", "dense"])
    def test_exact_reduction_on_group_element(self, small_decomp, backend):
        labels = [(1,), (2,), (3,), (5,), (7,)]
        t = small_decomp.apply((3,))
        reduced = sample_bdd(small_decomp, 8, t, 0.0, 5, 0.1, 11, backend=backend, labels=labels)
        assert reduced.sigma == 2
        assert reduced.Gtilde == ((12,), (8,), (4,), (12,), (4,))
        assert all(v == 0 for v in reduced.residual((3,)))
        check = check_reduced_instance(reduced, (3,), 0.0, 2)
        assert check["distance_ok"]
        assert check["coefficients_ok"]

    def test_reduced_record(self, small_decomp):
        reduced = sample_bdd(small_decomp, 8, (0, 0), 0.0, 5, 0.1, 4)
        again = ReducedInstance.from_json(reduced.to_json())
        assert again == reduced
        assert again.basis().shape == (5, 5)

    @pytest.mark.slow
    def test_offset_instances_keep_their_coefficients(self, rng):
        decomp = FiniteGroupDecomp(G=((16,),), qvec=(4,), q=64, n=1)
        m, p_err = 6, 0.1
        sizing = PeConfig.max_feasible_eps1(1, p_err / (2 * m))
        recovered = offsets = 0
        for _ in range(20):
            instance = plant_group_instance(decomp, 1 / 16, 16, rng)
            s = tuple(instance.planted["s"])
            offsets += instance.planted["delta"] != [0]
            reduced = sample_bdd(decomp, 16, instance.target, sizing, m, p_err, rng, lambda1=16)
            assert reduced.lambda1 == 16
            check = check_reduced_instance(reduced, s, instance.eps1, 1)
            assert check["distance_ok"]
            if 2 * check["distance"] < check["lambda1_tilde"] and coefficient_map_injective(
                    reduced.Gtilde, reduced.q, reduced.qvec):
                assert check["coefficients_ok"]
                recovered += 1
        assert offsets > 0
        assert recovered >= 5


class TestSolvers:

    def test_poly_on_lattice_point(self, small_basis):
        t = (28, -8)
        result = solve_bdd_poly(small_basis, t, 5)
        assert result.vector == t
        assert result.m == 5
        assert result.ladder[0]["status"] == "skipped"
        assert result.ladder[-1]["status"] == "accepted"

    def test_poly_dense_backend(self, small_basis):
        result = solve_bdd_poly(small_basis, (4, 8), 6, backend="dense")
        assert result.vector == (4, 8)

    def test_tradeoff_on_lattice_point(self, small_basis):
        result = solve_bdd_tradeoff(small_basis, (28, -8), 2, 5)
        assert result.vector == (28, -8)

    def test_tradeoff_beta_range(self, small_basis):
        with pytest.raises(PreconditionError) as exc:
            solve_bdd_tradeoff(small_basis, (0, 0), 9, 5)
        assert exc.value.code == "bad beta"

    def test_trivial_group_rounds_to_multiple(self):
        result = solve_bdd_poly(IntMatrix.diag((8, 8)), (3, 13), 0)
        assert result.vector == (0, 16)
        assert result.coefficients == ()

    def test_acceptance_gate(self, small_basis):
        t = (29, -8)
        try:
            result = solve_bdd_poly(small_basis, t, 9)
        except VerificationError as err:
            assert err.code == "no solution found"
            assert err.details["ladder"]
            return
        assert in_lattice(small_basis, result.vector)
        dist = math.dist(t, result.vector)
        assert dist <= result.ladder[-1]["gate"] <= 4

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(20))
    def test_accepts_only_closest_vector(self, seed):
        instance = generate_instance(4, 64, 1, 0.15, seed, allow_zero=True)
        try:
            result = solve_bdd_poly(instance.basis, instance.target, seed)
        except VerificationError as err:
            assert err.code == "no solution found"
            return
        assert result.vector == closest_vector(instance)
        assert 4 * math.dist(instance.target, result.vector) ** 2 <= instance.lambda1_sq

    def test_large_offset_never_accepts_wrong_vector(self, small_basis):
        for seed in range(5):
            instance = plant_lattice_instance(small_basis, 0.49, seed)
            try:
                result = solve_bdd_poly(small_basis, instance.target, seed)
            except VerificationError as err:
                assert err.code == "no solution found"
                continue
            assert result.vector == tuple(instance.planted["vector"])
            assert math.dist(instance.target, result.vector) <= result.ladder[-1]["gate"]


class TestPlanting:

    def test_lattice_instance(self, small_basis, rng):
        instance = plant_lattice_instance(small_basis, 0.25, rng)
        delta = instance.planted["delta"]
        assert sum(d * d for d in delta) <= 4
        vector = [t - d for t, d in zip(instance.target, delta)]
        assert vector == instance.planted["vector"]
        assert in_lattice(small_basis, vector)
        assert instance.lambda1_sq == 64

    def test_instance_record(self, small_basis, rng):
        instance = plant_lattice_instance(small_basis, 0.25, rng)
        assert BddInstance.from_json(instance.to_json()) == instance

    def test_infeasible_planting(self, small_basis, rng):
        with pytest.raises(PreconditionError) as exc:
            plant_lattice_instance(small_basis, 0.1, rng)
        assert exc.value.code == "infeasible planting"

    def test_group_instance(self, small_decomp, rng):
        instance = plant_group_instance(small_decomp, 0.25, 8, rng)
        offset = [t - v for t, v in zip(instance.target, instance.planted["vector"])]
        assert modnorm(offset, 16) <= 2
        assert small_decomp.apply(instance.planted["s"]) == tuple(instance.planted["vector"])


class TestRandomQary:

    def test_rank_zero(self, rng):
        sample = random_qary(3, 0, 8, rng)
        assert sample.lambda1 == 8.0
        assert sample.primitive
        assert sample.decomp.r == 0

    def test_primitive_iff_nonzero_prime_modulus(self, rng):
        for _ in range(20):
            sample = random_qary(4, 1, 7, rng)
            assert sample.primitive == any(row[0] % 7 for row in sample.gtilde)
            assert sample.lambda1 <= 7
            assert sample.lambda1 == pytest.approx(lambda1_exact(sample.basis))

    def test_m_below_rank(self, rng):
        with pytest.raises(PreconditionError):
            random_qary(1, 2, 8, rng)

    def test_quantile_fit(self, rng):
        stats = random_qary_stats(4, 1, 16, 30, rng)
        assert stats.draws == 30 and len(stats.lambda1) == 30
        assert 0.0 <= stats.primitive_rate <= 1.0
        assert stats.below_rate <= 2 ** -4 + 1 / 30
        assert stats.delta_fit > 0

    @pytest.mark.slow
    def test_prime_modulus_statistics(self, rng):
        draws = 1000
        stats = random_qary_stats(6, 1, 31, draws, rng)
        assert stats.primitive_rate >= 1 - 31 ** -5 - 3 * math.sqrt(31 ** -5 / draws)
        assert stats.below_rate <= 2 ** -6 + 3 * math.sqrt(2 ** -6 / draws)
        assert stats.delta_fit > 0
        assert max(stats.lambda1) <= 31

    @pytest.mark.slow
    def test_power_of_two_primitive_rate(self, rng):
        # non-primitive exactly when every entry is even
        draws = 400
        stats = random_qary_stats(6, 1, 32, draws, rng)
        expected = 1 - 2 ** -6
        assert abs(stats.primitive_rate - expected) <= 3 * math.sqrt(expected * (1 - expected) / draws)

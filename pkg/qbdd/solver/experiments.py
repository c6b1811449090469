"""
Trial plumbing shared by the command line: instance generation, solver
dispatch, per-trial result rows, calibration sweeps and result auditing.
"""

import hashlib
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import stats
from tqdm import tqdm

from qbdd import conf
from qbdd.errors import PreconditionError, QbddError
from qbdd.solver.calibration import cell_key
from qbdd.solver.classical_rect import rect_bdd, rect_reduce
from qbdd.solver.intlat import (IntMatrix, babai_guarantee_factor, babai_nearest_plane, exact_cvp_enum,
                                gram_schmidt, hnf, lambda1_exact, lll_reduce, norm_sq)
from qbdd.solver.qsim import as_generator
from qbdd.solver.reduction import (ReducedInstance, admissible_m, plant_lattice_instance, poly_eps1_shape,
                                   poly_sample_count, random_qary_stats, regime_polylog, regime_sublinear,
                                   sample_hip_bound, samplebdd_distance_bound, solve_bdd_poly,
                                   solve_bdd_tradeoff, tradeoff_balance, tradeoff_exponent, tradeoff_m,
                                   tradeoff_m_step_a)
from qbdd.solver.zqgroup import (charphase, decompose, modnorm, negate_coefficients,
                                 solve_coefficients)
from qbdd.utils.helpers import derive_seeds, dump_json, format_rational

logger = logging.getLogger(__name__)

SOLVERS = ("poly", "tradeoff", "rect", "babai", "oracle")


@dataclass
class ExperimentSpec:
    """Parameters of one experiment; echoed into every output."""

    n: int
    q: int
    r: int
    seed: int
    eps1: float = 0.0
    trials: int = 1
    solver: str = "poly"
    beta: Optional[int] = None
    m: Optional[int] = None
    backend: str = "gram"
    p_err: float = conf.DEFAULT_P_ERR
    eps1_grid: list = field(default_factory=list)

    def __post_init__(self):
        if self.seed is None:
            raise PreconditionError("a seed is required", code="missing seed")
        if self.solver not in SOLVERS:
            raise PreconditionError(f"unknown solver {self.solver!r}", code="solver")
        if self.solver == "tradeoff" and self.beta is None:
            raise PreconditionError("tradeoff solver needs beta", code="bad beta")

    @classmethod
    def from_json(cls, record):
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in record.items() if k in known})

    def to_json(self):
        return asdict(self)


def random_qperiodic_basis(n, q, r, rng):
    """HNF basis of the lattice spanned by [G | q I] for uniform G in Z_q^(n x r)."""
    rng = as_generator(rng)
    G = rng.integers(q, size=(n, r))
    rows = tuple(tuple(int(x) for x in G[i]) + tuple(q * int(i == k) for k in range(n))
                 for i in range(n))
    return hnf(IntMatrix(rows))


def generate_instance(n, q, r, eps1, rng, allow_zero=False):
    """Random q-periodic lattice with a planted target; falls back to Delta = 0 when allowed."""
    rng = as_generator(rng)
    B = random_qperiodic_basis(n, q, r, rng)
    try:
        return plant_lattice_instance(B, eps1, rng)
    except PreconditionError as err:
        if not allow_zero or err.code != "infeasible planting":
            raise
        logger.debug("planting infeasible at eps1=%s, planting Delta = 0", eps1)
        return plant_lattice_instance(B, 0.0, rng)


def instance_digest(instance):
    return hashlib.sha256(dump_json(instance.to_json()).encode("utf-8")).hexdigest()


def closest_vector(instance):
    """Ground truth: the planted vector when its offset is below lambda1/2, else enumeration."""
    planted = instance.planted
    if planted is not None and instance.lambda1_sq is not None:
        if 4 * norm_sq(planted["delta"]) < instance.lambda1_sq:
            return tuple(planted["vector"])
    B = instance.basis
    return B @ exact_cvp_enum(B, instance.target)


def _solve(instance, solver, seed, beta, backend, p_err, eps1_sizing, m):
    B, t = instance.basis, instance.target
    if solver == "poly":
        res = solve_bdd_poly(B, t, seed, eps1=eps1_sizing, p_err=p_err, backend=backend, m=m)
        return res.vector, res.to_json()
    if solver == "tradeoff":
        res = solve_bdd_tradeoff(B, t, beta, seed, eps1=eps1_sizing, p_err=p_err, backend=backend,
                                 m=m)
        return res.vector, res.to_json()
    if solver == "rect":
        cert = rect_reduce(B, lambda1=instance.lambda1)
        return rect_bdd(B, t, cert), {"certificate": cert.to_json()}
    if solver == "babai":
        C = lll_reduce(B, conf.get_settings().delta_lll)
        return C @ babai_nearest_plane(C, t), {"guarantee_factor": babai_guarantee_factor(B.rows)}
    return B @ exact_cvp_enum(B, t), {}


def run_trial(instance, solver, seed, trial=0, beta=None, backend="gram",
              p_err=conf.DEFAULT_P_ERR, eps1_sizing=None, timings=False, truth=None, m=None):
    """
    Run one solver on one instance and build its result row.

    Solver errors are reported in the row rather than raised.
    """
    row = {"trial": trial, "seed": seed, "solver": solver, "beta": beta, "backend": backend,
           "p_err": p_err, "eps1_sizing": eps1_sizing, "m": m}
    start = time.perf_counter()
    try:
        vector, details = _solve(instance, solver, seed, beta, backend, p_err, eps1_sizing, m)
        row.update(status="ok", vector=list(vector), details=details)
    except QbddError as err:
        row.update(status=err.code, message=err.message, vector=None, details=err.details,
                   exit_code=err.exit_code)
    if timings:
        row["wall_time"] = time.perf_counter() - start
    truth = closest_vector(instance) if truth is None else truth
    if row["vector"] is None:
        row["success"] = False
        row["distance_sq"] = None
    else:
        row["success"] = tuple(row["vector"]) == tuple(truth)
        row["distance_sq"] = norm_sq([a - b for a, b in zip(instance.target, row["vector"])])
    return row


def _trial_worker(args):
    return run_trial(*args[0], **args[1])


def run_trials(instance, solver, seed, trials, jobs=1, progress=False, **kwargs):
    """Repeat a solver on one instance with derived seeds; rows ordered by trial index."""
    truth = closest_vector(instance)
    seeds = derive_seeds(seed, trials)
    tasks = [((instance, solver, s, i), dict(kwargs, truth=truth)) for i, s in enumerate(seeds)]
    return _map(tasks, jobs, progress, f"{solver} trials")


def _map(tasks, jobs, progress, desc):
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = pool.map(_trial_worker, tasks)
            return list(tqdm(results, total=len(tasks), desc=desc, disable=not progress))
    return [_trial_worker(task) for task in tqdm(tasks, desc=desc, disable=not progress)]


def _family_worker(args):
    spec, eps1, trial, seed = args
    rng = np.random.default_rng(seed)
    instance = generate_instance(spec.n, spec.q, spec.r, eps1, rng, allow_zero=True)
    solve_seed = int(rng.integers(2**32))
    return run_trial(instance, spec.solver, solve_seed, trial=trial, beta=spec.beta,
                     backend=spec.backend, p_err=spec.p_err, m=spec.m)


def run_family(spec, eps1, jobs=1, progress=False):
    """One fresh planted instance per trial."""
    seeds = derive_seeds(spec.seed, spec.trials)
    tasks = [(spec, eps1, i, s) for i, s in enumerate(seeds)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(tqdm(pool.map(_family_worker, tasks), total=len(tasks),
                             desc=f"eps1={eps1:g}", disable=not progress))
    return [_family_worker(task) for task in tqdm(tasks, desc=f"eps1={eps1:g}", disable=not progress)]


def success_rate(rows):
    return sum(row["success"] for row in rows) / len(rows) if rows else 0.0


def calibrate_cell(spec, jobs=1, progress=False, target=conf.SUCCESS_TARGET):
    """
    Success rate per eps1 in the grid and the largest eps1 reaching the target.

    Returns:
        (threshold or None, {eps1: rate})
    """
    rates = {}
    threshold = None
    for eps1 in sorted(spec.eps1_grid):
        rate = success_rate(run_family(spec, eps1, jobs, progress))
        rates[repr(float(eps1))] = rate
        logger.info("%s eps1=%g success=%.3f", spec.solver, eps1, rate)
        if rate >= target:
            threshold = float(eps1)
    return threshold, rates


def calibrate(family, store, jobs=1, progress=False, name="default"):
    """Sweep every (n, q, r) cell of a family spec and record thresholds in the store."""
    cells = {}
    for n in family["n"]:
        for q in family["q"]:
            for r in family["r"]:
                spec = ExperimentSpec.from_json({"trials": 20, **family, "n": n, "q": q, "r": r})
                threshold, rates = calibrate_cell(spec, jobs, progress)
                key = cell_key(spec.solver, n, q, r, spec.beta)
                store.record(key, threshold, rates, name)
                cells[key] = {"threshold": threshold, "rates": rates, "spec": spec.to_json()}
    return cells


LABEL_PVALUE_FLOOR = 1e-4


@dataclass
class VerifyReport:
    """Outcome of auditing result rows."""

    rows: int = 0
    failures: list = field(default_factory=list)
    bound_checks: int = 0
    bound_violations: int = 0
    bound_tolerance: float = 0.0
    label_counts: dict = field(default_factory=dict)
    label_checks: list = field(default_factory=list)

    @property
    def passed(self):
        labels_ok = all(check["pvalue"] >= LABEL_PVALUE_FLOOR for check in self.label_checks)
        return not self.failures and self.bound_violations <= self.bound_tolerance and labels_ok

    def fail(self, trial, check, detail=""):
        self.failures.append({"trial": trial, "check": check, "detail": detail})

    def count_label(self, qvec, a):
        counts = self.label_counts.setdefault(tuple(qvec), np.zeros(int(np.prod(qvec)), dtype=np.int64))
        counts[np.ravel_multi_index(tuple(int(x) % qi for x, qi in zip(a, qvec)), tuple(qvec))] += 1

    def check_labels(self):
        for qvec, counts in sorted(self.label_counts.items()):
            # chi-square needs about five expected draws per label
            if len(counts) > 1 and counts.sum() >= 5 * len(counts):
                self.label_checks.append({"qvec": list(qvec), "samples": int(counts.sum()),
                                          "pvalue": chi_square_uniform(counts)})

    def to_json(self):
        return {"passed": self.passed, "rows": self.rows, "failures": self.failures,
                "bound_checks": self.bound_checks, "bound_violations": self.bound_violations,
                "bound_tolerance": self.bound_tolerance, "label_checks": self.label_checks}


def _audit_ladder(row, instance, truth, report):
    """Check the phase estimation and reduced-distance bounds of the accepted ladder step.

    The sigma recorded with the reduced instance must sit inside the window of
    the lambda1 it was checked against. Bounds are only evaluated where their
    hypotheses hold: sigma inside [lambda1/(4 sqrt n), lambda1/(2 sqrt n)] for
    the true lambda1, which also makes the cubes disjoint and the labels uniform.
    """
    details = row.get("details") or {}
    reduced = details.get("reduced")
    if reduced is None or instance.lambda1_sq is None:
        return
    reduced = ReducedInstance.from_json(reduced)
    # the solver works modulo the true periodicity, which may divide instance.q
    decomp = decompose(instance.basis, reduced.q)
    n, q = decomp.n, decomp.q
    if reduced.lambda1 is not None and not _sigma_in_window(reduced.sigma, reduced.lambda1, n):
        report.fail(row["trial"], "sigma window", f"sigma={reduced.sigma} lambda1={reduced.lambda1:g}")
    lam = math.sqrt(instance.lambda1_sq)
    if not _sigma_in_window(reduced.sigma, lam, n):
        return
    for sample in reduced.samples:
        report.count_label(decomp.qvec, sample.a)
    s = solve_coefficients(decomp.G, [v % q for v in truth], q, decomp.qvec)
    offset = math.sqrt(norm_sq([a - b for a, b in zip(instance.target, truth)]))
    eps1 = offset / lam
    if eps1 >= 0.5:
        return
    minus_s = negate_coefficients(s, decomp)
    p_pe = reduced.p_err / (2 * reduced.m)
    hip_bound = sample_hip_bound(q, eps1, n, p_pe)
    for sample in reduced.samples:
        err = modnorm([sample.O - charphase(sample.a, minus_s, decomp)], q)
        report.bound_checks += 1
        if err > hip_bound:
            report.bound_violations += 1
    lam_tilde = lambda1_exact(reduced.basis())
    bound = samplebdd_distance_bound(eps1, q, decomp.r, reduced.m, n, lam_tilde, reduced.p_err)
    report.bound_checks += 1
    if reduced.distance(s) > bound:
        report.bound_violations += 1


def _sigma_in_window(sigma, lambda1, n):
    root = math.sqrt(n)
    return lambda1 / (4 * root) <= sigma <= lambda1 / (2 * root)


def _audit_rect(row, instance, report):
    cert = (row.get("details") or {}).get("certificate")
    if cert is None:
        return
    C = IntMatrix.from_rows(cert["basis"])
    if hnf(C) != hnf(instance.basis):
        report.fail(row["trial"], "certificate basis")
        return
    min_sq = gram_schmidt(C).min_norm_sq()
    if format_rational(min_sq) != cert["min_gs_sq"]:
        report.fail(row["trial"], "certificate min GS length", cert["min_gs_sq"])
    if cert["bound"] > math.sqrt(min_sq) * (1 + 1e-12):
        report.fail(row["trial"], "certificate lower bound", f"{cert['bound']} > {math.sqrt(min_sq)}")
    if row["vector"] is not None and 4 * row["distance_sq"] >= min_sq:
        report.fail(row["trial"], "certified radius")


def verify_rows(rows, load_instance):
    """
    Recompute correctness of every row and check the logged bounds.

    Args:
        rows: result rows as written by the solve command
        load_instance: callable mapping a row to its BddInstance

    Returns:
        VerifyReport; probabilistic bounds pass when the violation count stays
        within p_err + 3 binomial standard deviations
    """
    report = VerifyReport()
    expected_rate = 0.0
    for row in rows:
        report.rows += 1
        instance = load_instance(row)
        truth = closest_vector(instance)
        success = row["vector"] is not None and tuple(row["vector"]) == tuple(truth)
        if success != row["success"]:
            report.fail(row["trial"], "success flag", f"claimed {row['success']}, oracle {success}")
        if row["vector"] is not None:
            dist = norm_sq([a - b for a, b in zip(instance.target, row["vector"])])
            if dist != row["distance_sq"]:
                report.fail(row["trial"], "distance", f"claimed {row['distance_sq']}, actual {dist}")
        if row["solver"] in ("poly", "tradeoff"):
            expected_rate = max(expected_rate, row["p_err"])
            _audit_ladder(row, instance, truth, report)
        elif row["solver"] == "rect":
            _audit_rect(row, instance, report)
    if report.bound_checks:
        p = min(1.0, expected_rate) if expected_rate else conf.DEFAULT_P_ERR
        report.bound_tolerance = binomial_upper_limit(report.bound_checks, p)
    report.check_labels()
    return report


def binomial_upper_limit(trials, p, z=3.0):
    """Largest count of events of probability p still within z standard deviations."""
    return trials * p + z * math.sqrt(trials * p * (1 - p))


def chi_square_uniform(counts):
    """p-value of a chi-square goodness of fit test against the uniform distribution."""
    return float(stats.chisquare(np.asarray(counts)).pvalue)


def estimate_parameters(n, q, r, betas=(), eps=0.25, c=2.0, draws=0, seed=None):
    """
    Sample counts, decodable eps1 shapes and asymptotic regime values for one
    (n, q, r) cell, optionally with random q-ary lattice statistics at m = n.
    """
    if n < 2 or r < 1 or q < 2:
        raise PreconditionError(f"estimates need n >= 2, r >= 1 and q >= 2 (got n={n}, r={r}, q={q})",
                                code="bad parameters")
    m_poly = poly_sample_count(r, q)
    record = {"n": n, "q": q, "r": r,
              "poly": {"m": m_poly, "m_admissible": admissible_m(m_poly, r, q, conf.DEFAULT_P_ERR),
                       "eps1_shape": poly_eps1_shape(r, q)},
              "tradeoff": [],
              "regimes": {"sublinear": regime_sublinear(n, eps), "polylog": regime_polylog(n, c)}}
    for beta in betas:
        if not 2 <= beta <= r * math.log2(q):
            raise PreconditionError(f"beta={beta} outside [2, r log2 q = {r * math.log2(q):.3g}]",
                                    code="bad beta", beta=beta)
        m = tradeoff_m(beta, r, q)
        block, sampling, balanced = tradeoff_balance(beta, r, q, m)
        record["tradeoff"].append({"beta": beta, "m": m, "m_step_a": tradeoff_m_step_a(beta, r, q),
                                   "eps1_shape": tradeoff_exponent(beta, r, q),
                                   "block_term": block, "sampling_term": sampling, "balanced": balanced})
    if draws:
        if seed is None:
            raise PreconditionError("random q-ary statistics need a seed", code="missing seed")
        qary = random_qary_stats(n, r, q, draws, seed)
        record["qary"] = {"m": n, "draws": qary.draws, "primitive_rate": qary.primitive_rate,
                          "primitive_floor": 1 - float(q) ** (-(n - r)), "delta_fit": qary.delta_fit,
                          "below_rate": qary.below_rate, "lambda1_min": min(qary.lambda1)}
    return record

"""
Random self-reduction of BDD on q-periodic lattices and the end-to-end
solvers built on it.

sample_bdd turns one instance (G, t) into a reduced instance (G~, t~) of
dimension m whose closest coefficient vector is the same s; the solvers
decode the reduced instance classically and lift the answer back.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from qbdd import conf
from qbdd.errors import BudgetExceededError, PreconditionError, VerificationError
from qbdd.solver.intlat import (IntMatrix, babai_nearest_plane, block_reduce_cvp, exact_cvp_enum,
                                hnf, lambda1_exact, lambda1_sq_exact, lll_reduce, norm_sq,
                                periodicity)
from qbdd.solver.qsim import HipSample, PeConfig, as_generator, eps_ev_for, sample_hip
from qbdd.solver.zqgroup import (FiniteGroupDecomp, decomp_from_json, decomp_to_json, decompose,
                                 is_primitive, lift_solution, modnorm, solve_coefficients)
from qbdd.utils.helpers import centered

logger = logging.getLogger(__name__)

PLANT_MAX_TRIES = 10**6


@dataclass(frozen=True)
class BddInstance:
    """A BDD instance, optionally with its planted answer."""

    target: tuple
    eps1: float
    q: int
    basis: Optional[IntMatrix] = None
    decomp: Optional[FiniteGroupDecomp] = None
    lambda1_sq: Optional[int] = None
    planted: Optional[dict] = None

    @property
    def n(self):
        return len(self.target)

    @property
    def lambda1(self):
        return None if self.lambda1_sq is None else math.sqrt(self.lambda1_sq)

    def to_json(self):
        record = {"target": list(self.target), "eps1": self.eps1, "q": self.q,
                  "lambda1_sq": self.lambda1_sq, "planted": self.planted}
        if self.basis is not None:
            record["basis"] = self.basis.to_lists()
        if self.decomp is not None:
            record["decomposition"] = decomp_to_json(self.decomp)
        return record

    @classmethod
    def from_json(cls, record):
        basis = record.get("basis")
        decomp = record.get("decomposition")
        return cls(target=tuple(record["target"]), eps1=float(record["eps1"]), q=int(record["q"]),
                   basis=None if basis is None else IntMatrix.from_rows(basis),
                   decomp=None if decomp is None else decomp_from_json(decomp),
                   lambda1_sq=record.get("lambda1_sq"), planted=record.get("planted"))


@dataclass(frozen=True)
class ReducedInstance:
    """Output of sample_bdd: G~ (m x r, row-major) and t~ in Z_q^m."""

    Gtilde: tuple
    ttilde: tuple
    m: int
    q: int
    qvec: tuple
    lambda1_hat: float
    sigma: int
    p_err: float
    samples: tuple = ()
    lambda1: Optional[float] = None

    def basis(self):
        """HNF basis of the lattice spanned by [G~ | q I]."""
        rows = tuple(tuple(self.Gtilde[i]) + tuple(self.q * int(i == k) for k in range(self.m))
                     for i in range(self.m))
        return hnf(IntMatrix(rows))

    def residual(self, s):
        """t~ - G~ s, zero-centred."""
        return tuple(centered(t - sum(g * x for g, x in zip(row, s)), self.q)
                     for t, row in zip(self.ttilde, self.Gtilde))

    def distance(self, s):
        return modnorm(self.residual(s), self.q)

    def to_json(self):
        return {"Gtilde": [list(row) for row in self.Gtilde], "ttilde": list(self.ttilde),
                "m": self.m, "q": self.q, "qvec": list(self.qvec), "lambda1_hat": self.lambda1_hat,
                "sigma": self.sigma, "p_err": self.p_err,
                "samples": [sample.to_json() for sample in self.samples], "lambda1": self.lambda1}

    @classmethod
    def from_json(cls, record):
        return cls(Gtilde=tuple(tuple(row) for row in record["Gtilde"]),
                   ttilde=tuple(record["ttilde"]), m=record["m"], q=record["q"],
                   qvec=tuple(record["qvec"]), lambda1_hat=record["lambda1_hat"],
                   sigma=record["sigma"], p_err=record["p_err"],
                   samples=tuple(HipSample.from_json(s) for s in record["samples"]),
                   lambda1=record.get("lambda1"))


@dataclass
class SolveResult:
    """Answer of a ladder solver together with everything needed to audit it."""

    vector: Optional[tuple]
    coefficients: Optional[tuple]
    q: int
    m: int
    eps1: float
    p_err: float
    lambda1_hat: Optional[float] = None
    ladder: list = field(default_factory=list)
    reduced: Optional[ReducedInstance] = None

    @property
    def accepted(self):
        return self.vector is not None

    def to_json(self):
        return {"vector": None if self.vector is None else list(self.vector),
                "coefficients": None if self.coefficients is None else list(self.coefficients),
                "q": self.q, "m": self.m, "eps1": self.eps1, "p_err": self.p_err,
                "lambda1_hat": self.lambda1_hat, "ladder": self.ladder,
                "reduced": None if self.reduced is None else self.reduced.to_json()}


def poly_sample_count(r, q):
    """ceil(sqrt(r log2 q))."""
    return max(1, math.ceil(math.sqrt(r * math.log2(q))))


def tradeoff_m(beta, r, q):
    """ceil(sqrt(beta r log2 q / log2 beta))."""
    return max(1, math.ceil(math.sqrt(beta * r * math.log2(q) / math.log2(beta))))


def tradeoff_m_step_a(beta, r, q):
    """(beta - 1) sqrt(beta r log2 q) + 1; recorded for comparison, not used by the solver."""
    return (beta - 1) * math.sqrt(beta * r * math.log2(q)) + 1


def tradeoff_exponent(beta, r, q):
    """exp(-4 sqrt(r log2 q log2 beta / beta)), the decodable eps1 shape for block size beta."""
    return math.exp(-4 * math.sqrt(r * math.log2(q) * math.log2(beta) / beta))


def tradeoff_balance(beta, r, q, m):
    """
    The two exponents the choice of m balances (in bits).

    Returns:
        (block term (m-1) log2 beta / (beta-1), sampling term r log2 q / m,
        balanced value 2 sqrt(r log2 q log2 beta / beta))
    """
    block = (m - 1) * math.log2(beta) / (beta - 1)
    sampling = r * math.log2(q) / m
    balanced = 2 * math.sqrt(r * math.log2(q) * math.log2(beta) / beta)
    return block, sampling, balanced


def poly_eps1_shape(r, q):
    return 2 ** (-4 * math.sqrt(r * math.log2(q)))


def regime_sublinear(n, eps):
    """Parameter regime r log q = n log n with beta = n^(1 - 2 eps) (natural logs)."""
    beta = n ** (1 - 2 * eps)
    rlogq = n * math.log(n)
    exponent = -4 * math.sqrt(rlogq * math.log(beta) / beta)
    stated = -4 * n ** eps * math.log(n)
    return {"beta": beta, "exponent": exponent, "stated_exponent": stated,
            "ratio": exponent / stated, "time_log": beta * math.log(beta)}


def regime_polylog(n, c):
    """Regime r = log n^c, q = n^c, beta = log n^c: eps1 = n^(-4c sqrt(log log n^c))."""
    L = c * math.log(n)
    exponent = -4 * math.sqrt(L ** 3 * math.log(L) / L)
    stated = -4 * c * math.log(n) * math.sqrt(math.log(math.log(n ** c)))
    return {"beta": L, "exponent": exponent, "stated_exponent": stated}


def samplebdd_distance_bound(eps1, q, r, m, n, lambda1_tilde, p_err):
    """sqrt(eps1) q^(r/m) lambda1(G~) 260 n^(3/4) m^(5/2) / p_err^2."""
    return (math.sqrt(eps1) * q ** (r / m) * lambda1_tilde * 260 * n ** 0.75 * m ** 2.5
            / p_err ** 2)


def sample_hip_bound(q, eps1, n, p_err):
    """|O - charphase(a, -s)|_q bound holding with probability >= 1 - p_err."""
    return 129 * q * eps_ev_for(eps1, n) / p_err ** 2


def samplebdd_precondition(p_err, m, q, r):
    return p_err / 2 >= 2.0 ** (-m) + float(q) ** (-(m - r))


def admissible_m(m, r, q, p_err):
    """Smallest m' >= max(m, r) meeting p_err/2 >= 2^-m' + q^-(m'-r)."""
    m = max(m, r, 1)
    while not samplebdd_precondition(p_err, m, q, r):
        m += 1
    return m


def sample_bdd(decomp, lambda1_hat, t, eps1, m, p_err, rng, backend="gram", labels=None, lambda1=None):
    """
    Reduce (G, t) to an m-dimensional instance with the same closest coefficients.

    sigma must lie in the window of lambda1 (the estimate lambda1_hat when no
    exact value is given); that value is recorded with the reduced instance.

    Row i of G~ is (-(q/q_j) a_ij mod q)_j for the i-th measured label a_i,
    so t~ - G~ s is exactly the vector of phase estimation errors.
    """
    rng = as_generator(rng)
    r, q, n = decomp.r, decomp.q, decomp.n
    if m < r:
        raise PreconditionError(f"m={m} < r={r}: sampled rows cannot be primitive", code="m < r")
    if not samplebdd_precondition(p_err, m, q, r):
        raise PreconditionError(f"p_err/2 < 2^-m + q^-(m-r) for m={m}, q={q}, r={r}",
                                code="p_err too small", m=m)
    if lambda1_hat <= 0:
        raise PreconditionError("lambda1 estimate must be positive", code="lambda1 estimate")
    sigma = math.floor(lambda1_hat / (2 * math.sqrt(n)))
    if sigma < 1:
        raise PreconditionError(f"sigma = floor({lambda1_hat}/(2 sqrt {n})) < 1", code="sigma clamp",
                                lambda1_hat=lambda1_hat)
    sigma = min(sigma, q // 2)
    window = lambda1_hat if lambda1 is None else lambda1
    p_pe = p_err / (2 * m)
    samples = []
    for i in range(m):
        label = None if labels is None else labels[i]
        samples.append(sample_hip(decomp, sigma, eps1, t, p_pe, rng, backend=backend, lambda1=window,
                                  label=label))
    Gtilde = tuple(tuple((-(q // qj) * int(a)) % q for a, qj in zip(sample.a, decomp.qvec))
                   for sample in samples)
    ttilde = tuple(sample.O for sample in samples)
    return ReducedInstance(Gtilde=Gtilde, ttilde=ttilde, m=m, q=q, qvec=decomp.qvec,
                           lambda1_hat=lambda1_hat, sigma=sigma, p_err=p_err, samples=tuple(samples),
                           lambda1=window)


def check_reduced_instance(reduced, s, eps1, n):
    """
    Evaluate both sample_bdd conclusions for planted coefficients s.

    Returns:
        dict with the reduced distance, its bound, lambda1(G~) and whether s
        is the unique closest coefficient vector
    """
    B = reduced.basis()
    lam = lambda1_exact(B)
    bound = samplebdd_distance_bound(eps1, reduced.q, len(reduced.qvec), reduced.m, n, lam,
                                     reduced.p_err)
    dist = reduced.distance(s)
    closest = B @ exact_cvp_enum(B, reduced.ttilde)
    recovered = solve_coefficients(reduced.Gtilde, [v % reduced.q for v in closest], reduced.q,
                                   reduced.qvec)
    return {"distance": dist, "bound": bound, "lambda1_tilde": lam,
            "distance_ok": dist <= bound, "coefficients_ok": recovered == tuple(s)}


def ladder_values(q):
    """Powers of two 2, 4, ... up to q."""
    values, lam = [], 2
    while lam <= q:
        values.append(lam)
        lam *= 2
    return values


def _babai_cvp(B, t):
    C = lll_reduce(B, conf.get_settings().delta_lll)
    return C @ babai_nearest_plane(C, t)


def _ladder_solve(B, t, rng, m, cvp, eps1, p_err, backend):
    rng = as_generator(rng)
    q = periodicity(B)
    decomp = decompose(B, q)
    n = decomp.n
    t_int = tuple(int(x) for x in t)
    t_mod = tuple(x % q for x in t_int)
    if decomp.r == 0:
        vector = lift_solution(decomp, (), t_int, q)
        return SolveResult(vector=vector, coefficients=(), q=q, m=0, eps1=eps1 or 0.0, p_err=p_err)
    m = admissible_m(m, decomp.r, q, p_err)
    if eps1 is None:
        eps1 = PeConfig.max_feasible_eps1(n, p_err / (2 * m))
    C = lll_reduce(B, conf.get_settings().delta_lll)
    shortest_column = math.sqrt(min(norm_sq(c) for c in C.columns()))
    result = SolveResult(vector=None, coefficients=None, q=q, m=m, eps1=eps1, p_err=p_err)
    for lam in ladder_values(q):
        sigma = math.floor(lam / (2 * math.sqrt(n)))
        gate = min(lam, shortest_column) / 2
        step = {"lambda1_hat": lam, "sigma": sigma, "m": m, "gate": gate}
        result.ladder.append(step)
        if sigma < 1:
            step["status"] = "skipped"
            logger.debug("ladder: lambda1_hat=%d gives sigma < 1, skipped", lam)
            continue
        reduced = sample_bdd(decomp, lam, t_mod, eps1, m, p_err, rng, backend=backend)
        step["T"] = reduced.samples[0].T
        vt = cvp(reduced.basis(), reduced.ttilde)
        s = solve_coefficients(reduced.Gtilde, [v % q for v in vt], q, decomp.qvec)
        if s is None:
            step["status"] = "no coefficients"
            continue
        dist = modnorm([a - b for a, b in zip(t_mod, decomp.apply(s))], q)
        step["distance"] = dist
        if dist > gate:
            step["status"] = "rejected"
            logger.debug("ladder: lambda1_hat=%d distance %.4g above gate %.4g", lam, dist, gate)
            continue
        step["status"] = "accepted"
        result.vector = lift_solution(decomp, s, t_int, q)
        result.coefficients = s
        result.lambda1_hat = lam
        result.reduced = reduced
        logger.info("ladder accepted at lambda1_hat=%d (m=%d, sigma=%d)", lam, m, reduced.sigma)
        return result
    raise VerificationError("no solution found", code="no solution found", ladder=result.ladder)


def solve_bdd_poly(B, t, rng, eps1=None, p_err=conf.DEFAULT_P_ERR, backend="gram", m=None):
    """
    Polynomial-time pipeline: m = ceil(sqrt(r log2 q)) samples, LLL + Babai.

    eps1 sizes the phase estimation; it defaults to the largest value the
    phase estimation precondition admits. m overrides the sample count (it is
    still raised to the smallest admissible value).
    """
    q = periodicity(B)
    r = decompose(B, q).r
    m = poly_sample_count(r, q) if m is None else m
    return _ladder_solve(B, t, rng, m, _babai_cvp, eps1, p_err, backend)


def solve_bdd_tradeoff(B, t, beta, rng, eps1=None, p_err=conf.DEFAULT_P_ERR, backend="gram", m=None):
    """Block size beta variant: m = ceil(sqrt(beta r log2 q / log2 beta)), block CVP."""
    q = periodicity(B)
    r = decompose(B, q).r
    if r and not 2 <= beta <= r * math.log2(q):
        raise PreconditionError(f"beta={beta} outside [2, r log2 q = {r * math.log2(q):.3g}]",
                                code="bad beta", beta=beta)
    if m is None:
        m = tradeoff_m(beta, r, q) if r else 1

    def cvp(basis, target):
        return basis @ block_reduce_cvp(basis, target, min(beta, basis.cols))

    return _ladder_solve(B, t, rng, m, cvp, eps1, p_err, backend)


def random_element(decomp, rng):
    rng = as_generator(rng)
    return tuple(int(rng.integers(qi)) for qi in decomp.qvec)


def _uniform_ball_offset(n, radius, rng):
    """Integer Delta uniform in the Euclidean ball of the given radius (rejection on the cube)."""
    bound = math.floor(radius)
    radius_sq = radius * radius
    for _ in range(PLANT_MAX_TRIES):
        delta = rng.integers(-bound, bound + 1, size=n)
        if int(np.dot(delta, delta)) <= radius_sq:
            return tuple(int(x) for x in delta)
    raise BudgetExceededError("offset rejection sampling did not terminate", code="planting budget")


def _plant_offset(n, eps1, lambda1, rng):
    if eps1 == 0:
        return (0,) * n
    radius = eps1 * lambda1
    if radius < 1:
        raise PreconditionError(
            f"eps1 * lambda1 = {radius:.3g} < 1 leaves no nonzero integer offset; plant with eps1 = 0",
            code="infeasible planting", radius=radius)
    return _uniform_ball_offset(n, radius, rng)


def plant_group_instance(decomp, eps1, lambda1, rng):
    """t = G s + Delta mod q with s uniform in C~ and ||Delta|| <= eps1 lambda1."""
    rng = as_generator(rng)
    s = random_element(decomp, rng)
    delta = _plant_offset(decomp.n, eps1, lambda1, rng)
    v = decomp.apply(s)
    target = tuple((a + d) % decomp.q for a, d in zip(v, delta))
    return BddInstance(target=target, eps1=eps1, q=decomp.q, decomp=decomp,
                       planted={"s": list(s), "delta": list(delta), "vector": list(v)})


def plant_lattice_instance(B, eps1, rng, lambda1_sq=None):
    """Planted integer instance t = v + Delta for a random lattice vector v in [0, q)^n."""
    rng = as_generator(rng)
    q = periodicity(B)
    decomp = decompose(B, q)
    if lambda1_sq is None:
        lambda1_sq = lambda1_sq_exact(B)
    s = random_element(decomp, rng)
    delta = _plant_offset(decomp.n, eps1, math.sqrt(lambda1_sq), rng)
    v = decomp.apply(s)
    target = tuple(a + d for a, d in zip(v, delta))
    return BddInstance(target=target, eps1=eps1, q=q, basis=B, decomp=decomp,
                       lambda1_sq=lambda1_sq,
                       planted={"s": list(s), "delta": list(delta), "vector": list(v)})


@dataclass(frozen=True)
class RandomQary:
    """A uniformly drawn G~ with its q-ary lattice and oracle data."""

    gtilde: tuple
    basis: IntMatrix
    decomp: FiniteGroupDecomp
    lambda1: float
    primitive: bool


def random_qary(m, r, q, rng):
    """Uniform G~ in Z_q^(m x r) and the lattice spanned by [G~ | q I]."""
    if m < r:
        raise PreconditionError(f"m={m} < r={r}", code="m < r")
    rng = as_generator(rng)
    gtilde = tuple(tuple(int(x) for x in row) for row in rng.integers(q, size=(m, r)))
    rows = tuple(gtilde[i] + tuple(q * int(i == k) for k in range(m)) for i in range(m))
    basis = hnf(IntMatrix(rows))
    return RandomQary(gtilde=gtilde, basis=basis, decomp=decompose(basis, q),
                      lambda1=lambda1_exact(basis), primitive=is_primitive(gtilde, q))


@dataclass(frozen=True)
class RandomQaryStats:
    """Empirical shortest vector and primitivity statistics of random q-ary lattices."""

    draws: int
    primitive_rate: float
    lambda1: tuple
    delta_fit: float
    below_rate: float


def random_qary_stats(m, r, q, draws, rng):
    """
    Draw random q-ary lattices and fit delta as the 2^-m quantile of
    lambda1 / (sqrt(m) q^(1 - r/m)).
    """
    rng = as_generator(rng)
    samples = [random_qary(m, r, q, rng) for _ in range(draws)]
    lam = np.array([s.lambda1 for s in samples])
    ratios = lam / (math.sqrt(m) * q ** (1 - r / m))
    delta_fit = float(np.quantile(ratios, 2.0 ** (-m)))
    return RandomQaryStats(draws=draws, primitive_rate=float(np.mean([s.primitive for s in samples])),
                        lambda1=tuple(float(x) for x in lam), delta_fit=delta_fit,
                        below_rate=float(np.mean(ratios < delta_fit)))

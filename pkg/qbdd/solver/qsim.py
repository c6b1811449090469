"""
Exact classical simulation of cube states, phased cube states, shifts,
phase estimation and hidden inner product sampling.

Two backends answer the same queries. ``dense`` keeps the full amplitude
table over Z_q^n; ``gram`` never builds a state and derives every
measurement distribution from overlaps of cubes, which is what makes the
larger instances reachable.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Optional

import numpy as np

from qbdd import conf
from qbdd.errors import BudgetExceededError, PreconditionError
from qbdd.solver.zqgroup import charphase_all, group_elements, group_order

logger = logging.getLogger(__name__)

BACKENDS = ("dense", "gram")


def as_generator(rng):
    """Accept a numpy Generator or anything default_rng accepts."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _check_sigma(sigma, q):
    if int(sigma) != sigma or sigma < 1 or 2 * sigma > q:
        raise PreconditionError(f"cube parameter sigma={sigma} needs 1 <= sigma and 2*sigma <= q={q}",
                                code="sigma out of range", sigma=sigma, q=q)


def cube_overlap_1d(delta, sigma, q):
    """Number of pairs (z, z') in [+-sigma]^2 with z = z' + delta mod q."""
    _check_sigma(sigma, q)
    return int(_overlap_counts(np.array([delta]), sigma, q)[0])


def _overlap_counts(delta, sigma, q):
    # two arcs of length 2*sigma on a cycle of length q, offset by delta
    d = np.mod(delta, q)
    side = 2 * sigma
    return np.maximum(0, side - d) + np.maximum(0, side - (q - d))


def cube_inner_products(diff, sigma, q):
    """<cube_0 | cube_x> for every row x of an integer array."""
    counts = _overlap_counts(np.asarray(diff, dtype=np.int64), sigma, q).astype(np.float64)
    return np.prod(counts / (2 * sigma), axis=-1)


@dataclass
class DenseState:
    """Amplitude table over Z_q^n."""

    q: int
    n: int
    amplitudes: np.ndarray
    ancilla: Optional[int] = None

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def inner(self, other):
        """<self | other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def support_size(self, tol=1e-12):
        return int(np.count_nonzero(np.abs(self.amplitudes) > tol))


def _dense_budget_check(size, what):
    budget = conf.get_settings().dense_budget
    if size > budget:
        raise BudgetExceededError(f"{what} needs {size} amplitudes, dense budget is {budget}; "
                                  f"use the gram backend", code="dense budget", size=size)


def make_cube_state(y, sigma, q):
    """Uniform superposition over y + [+-sigma]^n."""
    _check_sigma(sigma, q)
    n = len(y)
    _dense_budget_check(q ** n, "cube state")
    offsets = np.arange(-sigma + 1, sigma + 1)
    vecs = []
    for yi in y:
        v = np.zeros(q)
        v[np.mod(int(yi) + offsets, q)] = 1.0
        vecs.append(v)
    table = reduce(np.multiply.outer, vecs) if n > 1 else vecs[0]
    amps = table.astype(np.complex128) / (2 * sigma) ** (n / 2)
    return DenseState(q=q, n=n, amplitudes=amps)


def shift_apply(state, x):
    """U_x: amplitude at y moves to y + x."""
    if len(x) != state.n:
        raise PreconditionError("shift length differs from state dimension", code="dimension")
    shift = tuple(int(v) % state.q for v in x)
    amps = np.roll(state.amplitudes, shift=shift, axis=tuple(range(state.n)))
    return DenseState(q=state.q, n=state.n, amplitudes=amps, ancilla=state.ancilla)


def state_distance(psi, phi):
    return float(np.linalg.norm(psi.amplitudes - phi.amplitudes))


@dataclass(frozen=True)
class PcsModel:
    """Parameters of one phased cube state."""

    decomp: object
    label: tuple
    sigma: int
    backend: str
    lambda1: Optional[float] = None

    @property
    def q(self):
        return self.decomp.q

    @property
    def n(self):
        return self.decomp.n

    def sigma_in_range(self):
        """Whether lambda1/(4 sqrt n) <= sigma <= lambda1/(2 sqrt n); None if lambda1 unknown."""
        if self.lambda1 is None or math.isinf(self.lambda1):
            return None
        root = math.sqrt(self.n)
        return self.lambda1 / (4 * root) <= self.sigma <= self.lambda1 / (2 * root)


@dataclass
class GramHandle:
    """Everything the gram backend needs to answer distribution queries."""

    model: PcsModel
    elements: np.ndarray
    phases: np.ndarray
    norm0: float = field(default=1.0)

    @property
    def q(self):
        return self.model.q

    @property
    def n(self):
        return self.model.n


def label_distribution(decomp, sigma):
    """
    Exact probability of each reduced label a' in C~ (lexicographic order).

    A full label a in Z_q^r has probability w(a mod qvec) / prod(q/q_i).
    The distribution is uniform whenever distinct cubes are disjoint.
    """
    _check_sigma(sigma, decomp.q)
    size = group_order(decomp)
    if decomp.r == 0:
        return np.ones(1)
    _, elements = group_elements(decomp)
    overlap = cube_inner_products(elements, sigma, decomp.q)
    if np.count_nonzero(overlap[1:]) == 0:
        return np.full(size, 1.0 / size)
    w = np.fft.ifftn(overlap.reshape(decomp.qvec)).real.reshape(-1)
    w = np.clip(w, 0.0, None)
    return w / w.sum()


def _inverse_cdf(probs, rng):
    cdf = np.cumsum(probs)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(idx, len(probs) - 1)


def draw_label(decomp, sigma, rng):
    """Measured label a in Z_q^r distributed as the label register of the PCS preparation."""
    rng = as_generator(rng)
    if decomp.r == 0:
        return ()
    w = label_distribution(decomp, sigma)
    reduced = np.unravel_index(_inverse_cdf(w, rng), decomp.qvec)
    return tuple(int(a) + qi * int(rng.integers(decomp.q // qi))
                 for a, qi in zip(reduced, decomp.qvec))


def make_pcs(decomp, sigma, rng, backend="gram", label=None, lambda1=None):
    """
    Prepare a phased cube state with a measured label.

    Args:
        decomp: FiniteGroupDecomp of the group
        sigma: cube parameter (cube side 2 sigma)
        rng: Generator or seed
        backend: "dense" or "gram"
        label: forces the label (test hook), otherwise it is sampled
        lambda1: optional lambda_1 recorded for the sigma range check

    Returns:
        (PcsModel, DenseState or GramHandle)
    """
    if backend not in BACKENDS:
        raise PreconditionError(f"unknown backend {backend!r}", code="backend")
    _check_sigma(sigma, decomp.q)
    if label is None:
        label = draw_label(decomp, sigma, rng)
    label = tuple(int(a) % decomp.q for a in label)
    model = PcsModel(decomp=decomp, label=label, sigma=int(sigma), backend=backend, lambda1=lambda1)
    coeffs, elements = group_elements(decomp)
    phases = np.exp(2j * np.pi * charphase_all(label, coeffs, decomp) / decomp.q)
    if backend == "gram":
        norm0 = float(np.real(np.sum(phases * cube_inner_products(elements, sigma, decomp.q))))
        return model, GramHandle(model=model, elements=elements, phases=phases, norm0=norm0)
    _dense_budget_check(decomp.q ** decomp.n, "phased cube state")
    cube = make_cube_state((0,) * decomp.n, sigma, decomp.q).amplitudes
    axes = tuple(range(decomp.n))
    amps = np.zeros_like(cube)
    for phase, v in zip(phases, elements):
        amps += phase * np.roll(cube, shift=tuple(int(x) for x in v), axis=axes)
    amps /= np.linalg.norm(amps)
    return model, DenseState(q=decomp.q, n=decomp.n, amplitudes=amps)


def gram_sequence(handle, t, T):
    """g(d) = <psi | U_t^d psi> for d = 0..T-1, normalised so g(0) = 1."""
    q, n = handle.q, handle.n
    t = np.mod(np.asarray(tuple(t), dtype=np.int64), q)
    size = len(handle.elements)
    budget = conf.get_settings().gram_budget
    if T * size > budget:
        raise BudgetExceededError(f"gram sequence needs {T} x {size} cube overlaps, gram budget is {budget}; "
                                  f"raise eps1 or QBDD_GRAM_BUDGET", code="gram budget", T=T, size=size)
    chunk = max(1, (1 << 22) // max(1, size * n))
    g = np.empty(T, dtype=np.complex128)
    for start in range(0, T, chunk):
        d = np.arange(start, min(T, start + chunk), dtype=np.int64)
        points = handle.elements[None, :, :] + np.mod(d[:, None] * t[None, :], q)[:, None, :]
        overlap = cube_inner_products(points, handle.model.sigma, q)
        g[start:start + len(d)] = overlap @ handle.phases
    return g / handle.norm0


def _pe_from_gram(g):
    T = len(g)
    w = (T - np.arange(T)) * g
    probs = (2.0 * np.real(np.fft.fft(w)) - T * np.real(g[0])) / T ** 2
    return np.clip(probs, 0.0, None)


def _pe_dense(state, t, T):
    _dense_budget_check(T * state.amplitudes.size, "phase register simulation")
    axes = tuple(range(state.n))
    frames = np.empty((T, state.amplitudes.size), dtype=np.complex128)
    for k in range(T):
        shift = tuple(int(k * x) % state.q for x in t)
        frames[k] = np.roll(state.amplitudes, shift=shift, axis=axes).reshape(-1)
    amps = np.fft.fft(frames, axis=0) / T
    return np.sum(np.abs(amps) ** 2, axis=1)


def _check_power_of_two(T):
    if T < 1 or T & (T - 1):
        raise PreconditionError(f"T={T} is not a power of two", code="T not power of two")


def pe_distribution(psi, t, T):
    """Exact distribution of the phase register after the inverse Fourier transform."""
    _check_power_of_two(T)
    if isinstance(psi, GramHandle):
        return _pe_from_gram(gram_sequence(psi, t, T))
    if isinstance(psi, DenseState):
        return _pe_dense(psi, t, T)
    raise TypeError(f"cannot run phase estimation on {type(psi).__name__}")


def exact_pe_distribution(phase, T):
    """Phase estimation on an exact eigenvector with eigenvalue exp(2 pi i phase)."""
    _check_power_of_two(T)
    k = np.arange(T)
    amps = np.fft.fft(np.exp(2j * np.pi * float(phase) * k)) / T
    return np.abs(amps) ** 2


def total_variation(p, p2):
    return 0.5 * float(np.sum(np.abs(np.asarray(p) - np.asarray(p2))))


def _ceil_log2(x):
    k = math.ceil(math.log2(x))
    while k > 0 and 2.0 ** (k - 1) >= x:
        k -= 1
    return k


@dataclass(frozen=True)
class PeConfig:
    """Phase estimation sizing for accuracy eps_ev with failure probability p_err."""

    eps_ev: float
    p_err: float
    q: Optional[int] = None

    def __post_init__(self):
        if not 0 < self.p_err < 1:
            raise PreconditionError(f"p_err={self.p_err} outside (0, 1)", code="p_err range")
        if self.eps_ev < 0:
            raise PreconditionError("eps_ev must be non-negative", code="eps_ev range")
        # relative slack so eps_ev_for(max_feasible_eps1(...)) is admitted
        if self.eps_ev > self.max_feasible_eps_ev(self.p_err) * (1 + 1e-9):
            raise PreconditionError(
                f"pe-approx precondition: p_err^2/(128 eps_ev) < 1 "
                f"(eps_ev={self.eps_ev:.3g}, largest admissible {self.max_feasible_eps_ev(self.p_err):.3g})",
                code="pe-approx precondition", eps_ev=self.eps_ev, p_err=self.p_err)

    @staticmethod
    def max_feasible_eps_ev(p_err):
        return p_err ** 2 / 128

    @staticmethod
    def max_feasible_eps1(n, p_err):
        """Largest eps1 whose eps_ev = sqrt(eps1) 4 n^(3/4) meets the precondition."""
        return (PeConfig.max_feasible_eps_ev(p_err) / (4 * n ** 0.75)) ** 2

    @property
    def b(self):
        return _ceil_log2(2 / self.p_err)

    @property
    def a_bits(self):
        if self.eps_ev == 0:
            # exact eigenvector: enough bits that T >= q
            return max(0, _ceil_log2(self.q) - self.b - 1) if self.q else 0
        return max(0, _ceil_log2(self.p_err ** 2 / (128 * self.eps_ev)))

    @property
    def T(self):
        return 2 ** (self.a_bits + self.b + 1)

    def error_bound(self, q):
        """|O - s|_q bound holding with probability >= 1 - p_err."""
        return 129 * q * self.eps_ev / self.p_err ** 2


def round_phase(h, q, T):
    """round(q h / T) mod q, halves rounded up."""
    return ((2 * q * h + T) // (2 * T)) % q


def phase_estimate(psi, t, cfg, rng):
    """Sample the phase register and return the estimate O in Z_q."""
    rng = as_generator(rng)
    probs = pe_distribution(psi, t, cfg.T)
    h = _inverse_cdf(probs, rng)
    return round_phase(h, psi.q, cfg.T)


def power_drift(state, t, eigenphase, k):
    """||U_t^k psi - omega_q^(eigenphase k) psi|| on a dense state."""
    shifted = shift_apply(state, [k * int(x) for x in t])
    lam = np.exp(2j * np.pi * eigenphase * k / state.q)
    return float(np.linalg.norm(shifted.amplitudes - lam * state.amplitudes))


def phase_state_drift(state, t, eigenphase, T):
    """Distance between the approximate and exact phase states before the Fourier transform."""
    total = sum(power_drift(state, t, eigenphase, k) ** 2 for k in range(T))
    return math.sqrt(total / T)


@dataclass(frozen=True)
class HipSample:
    """One hidden inner product sample (a, O) with its run metadata."""

    a: tuple
    O: int
    T: int
    sigma: int
    eps_ev: float
    p_err: float
    seed: Optional[int] = None

    def to_json(self):
        return {"a": list(self.a), "O": self.O, "T": self.T, "sigma": self.sigma,
                "eps_ev": self.eps_ev, "p_err": self.p_err, "seed": self.seed}

    @classmethod
    def from_json(cls, record):
        return cls(a=tuple(record["a"]), O=record["O"], T=record["T"], sigma=record["sigma"],
                   eps_ev=record["eps_ev"], p_err=record["p_err"], seed=record.get("seed"))


def eps_ev_for(eps1, n):
    return math.sqrt(eps1) * 4 * n ** 0.75


def sample_hip(decomp, sigma, eps1, t, p_err, rng, backend="gram", lambda1=None, label=None):
    """
    Sample (a, O) with O close to charphase(a, -s), s the coefficients of the
    group element closest to t.

    Args:
        decomp: FiniteGroupDecomp
        sigma: cube parameter
        eps1: BDD distance parameter, 0 <= eps1 < 1/2
        t: target in Z_q^n
        p_err: phase estimation failure probability
        rng: Generator or integer seed (an integer is recorded in the sample)
        backend: "gram" or "dense"
        lambda1: when given, sigma must lie in [lambda1/(4 sqrt n), lambda1/(2 sqrt n)]
        label: forces the measured label (test hook)

    Returns:
        HipSample
    """
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = as_generator(rng)
    if not 0 <= eps1 < 0.5:
        raise PreconditionError(f"eps1={eps1} outside [0, 1/2)", code="eps1 range")
    _check_sigma(sigma, decomp.q)
    window = PcsModel(decomp=decomp, label=(), sigma=int(sigma), backend=backend, lambda1=lambda1)
    if window.sigma_in_range() is False:
        raise PreconditionError(
            f"sigma={sigma} outside [lambda1/(4 sqrt n), lambda1/(2 sqrt n)] for lambda1={lambda1:.4g}",
            code="sigma out of range", sigma=sigma, lambda1=lambda1)
    eps_ev = eps_ev_for(eps1, decomp.n)
    try:
        cfg = PeConfig(eps_ev=eps_ev, p_err=p_err, q=decomp.q)
    except PreconditionError as err:
        err.details["max_eps1"] = PeConfig.max_feasible_eps1(decomp.n, p_err)
        err.message += f"; use eps1 <= {err.details['max_eps1']:.3g}"
        raise
    model, handle = make_pcs(decomp, sigma, rng, backend=backend, label=label, lambda1=lambda1)
    O = phase_estimate(handle, t, cfg, rng)
    logger.debug("sample_hip: a=%s O=%d T=%d sigma=%d", model.label, O, cfg.T, sigma)
    return HipSample(a=model.label, O=int(O), T=cfg.T, sigma=int(sigma), eps_ev=eps_ev,
                     p_err=p_err, seed=None if seed is None else int(seed))

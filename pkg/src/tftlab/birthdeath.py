"""Biased random walks on the nonnegative integers: exact series for the heat
MGF, free-energy bounds, and divergence certificates.

The walk has unit total exit rate everywhere (p_j + q_j = 1, p_0 = 1), so jump
times form a unit-rate Poisson process and the chain factorizes into a Poisson
jump count and an embedded discrete walk.  That factorization turns the heat
MGF into a series over jump counts, computed here by a dynamic program over
the embedded walk's occupation weights.

Everything is evaluated in log space from end to end: under strong bias the
series terms reach exp(2000) and beyond, so partial sums, tail bounds, and
growth factors are all tracked as logarithms.

The heat accumulated by time t depends only on the endpoint X_t: every down
jump cancels the log rate ratio of the matching up jump, leaving the product
over the first X_t sites.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gammaln, logsumexp
from scipy.stats import poisson

from .verify import _mean_exp_with_se

__all__ = [
    "BiasSpec",
    "MGFSeries",
    "FreeEnergyEstimate",
    "DivergenceReport",
    "BDStripReport",
    "bd_protocol",
    "bd_heat",
    "bd_heat_vector",
    "bd_mgf_truncated",
    "bd_free_energy",
    "bd_divergence_scan",
    "simulate_bd",
    "bd_exact_law",
    "bd_tft_check",
]

N_MAX_CAP = 10**4


@dataclass(frozen=True, eq=False)
class BiasSpec:
    """Up/down probabilities of the embedded walk: p_j up, q_j = 1 - p_j down,
    with the reflecting boundary p_0 = 1.

    variants: constant (p_j = alpha/(alpha+1), alpha > 1), strong
    (p_j = 2^j/(2^j+1)), linear (p_j/q_j = j), custom (explicit p_1, p_2, ...).
    """

    variant: str
    alpha: Optional[float] = None
    table: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.variant not in ("constant", "strong", "linear", "custom"):
            raise ValueError(f"unknown bias variant {self.variant!r}")
        if self.variant == "constant":
            if self.alpha is None or self.alpha <= 1.0:
                raise ValueError("constant bias needs alpha > 1 (a rightward bias)")
        if self.variant == "custom":
            tab = np.array(self.table, dtype=float)
            if tab.ndim != 1 or len(tab) == 0:
                raise ValueError("custom bias needs a vector of p_j for j >= 1")
            if np.any(tab <= 0.0) or np.any(tab >= 1.0):
                raise ValueError("need 0 < p_j < 1 for j >= 1")
            tab.flags.writeable = False
            object.__setattr__(self, "table", tab)

    @classmethod
    def constant(cls, alpha: float) -> "BiasSpec":
        return cls(variant="constant", alpha=float(alpha))

    @classmethod
    def strong(cls) -> "BiasSpec":
        return cls(variant="strong")

    @classmethod
    def linear(cls) -> "BiasSpec":
        return cls(variant="linear")

    @classmethod
    def custom(cls, p_values: Sequence[float]) -> "BiasSpec":
        return cls(variant="custom", table=np.asarray(p_values, dtype=float))

    def log_pq(self, k_max: int) -> Tuple[np.ndarray, np.ndarray]:
        """(log p_j, log q_j) for j = 0..k_max."""
        j = np.arange(k_max + 1, dtype=float)
        if self.variant == "constant":
            lp = np.full(k_max + 1, math.log(self.alpha) - math.log(self.alpha + 1.0))
            lq = np.full(k_max + 1, -math.log(self.alpha + 1.0))
        elif self.variant == "strong":
            denom = np.logaddexp(j * math.log(2.0), 0.0)  # log(2^j + 1)
            lp = j * math.log(2.0) - denom
            lq = -denom
        elif self.variant == "linear":
            with np.errstate(divide="ignore"):
                lp = np.log(j) - np.log(j + 1.0)
            lq = -np.log(j + 1.0)
        else:
            if k_max > len(self.table):
                raise ValueError(f"custom bias table covers j <= {len(self.table)}, need {k_max}")
            p = np.concatenate(([1.0], self.table[: k_max]))
            lp = np.log(p)
            with np.errstate(divide="ignore"):
                lq = np.log(1.0 - p)
        lp[0] = 0.0  # p_0 = 1 exactly
        lq[0] = -np.inf  # q_0 = 0
        return lp, lq


def bd_protocol(b: BiasSpec, k_max: int) -> Tuple[np.ndarray, np.ndarray]:
    """Explicit (p_j, q_j) tables for j = 0..k_max, with p_j + q_j = 1."""
    lp, lq = b.log_pq(k_max)
    return np.exp(lp), np.exp(lq)


def bd_heat_vector(b: BiasSpec, k_max: int) -> np.ndarray:
    """Heat as a function of the endpoint: heat[k] = log prod_{j<k} p_j / q_{j+1}."""
    lp, lq = b.log_pq(k_max + 1)
    out = np.zeros(k_max + 1)
    if k_max >= 1:
        out[1:] = np.cumsum(lp[:k_max] - lq[1 : k_max + 1])
    return out


def bd_heat(b: BiasSpec, k: int) -> float:
    """Heat exported by a trajectory ending at site k (0 for k = 0)."""
    if k < 0:
        raise ValueError("k must be a nonnegative site")
    return float(bd_heat_vector(b, k)[k])


def _walk_log_weights(b: BiasSpec, n_max: int) -> Iterator[Tuple[int, np.ndarray]]:
    """Yield (n, log w_n) where w_n(k) is the probability that the embedded
    walk started at 0 sits at site k after n steps.  Rows must not be mutated
    by the consumer."""
    size = n_max + 2
    lp, lq = b.log_pq(size - 1)
    lw = np.full(size, -np.inf)
    lw[0] = 0.0
    yield 0, lw
    up = np.empty(size)
    down = np.empty(size)
    for n in range(1, n_max + 1):
        up[0] = -np.inf
        up[1:] = lw[:-1] + lp[:-1]
        down[-1] = -np.inf
        down[:-1] = lw[1:] + lq[1:]
        lw = np.logaddexp(up, down)
        yield n, lw


def _log_poisson_pmf(t: float, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1, dtype=float)
    return -t + n * math.log(t) - gammaln(n + 1.0)


@dataclass(frozen=True, eq=False)
class MGFSeries:
    """Truncated heat-MGF series M(lam, t) = sum_n P(N_t = n) E[e^{lam Q} | n].

    log_partials[n] is the log of the partial sum through jump count n;
    partial sums are nondecreasing in n since every term is nonnegative.
    log_tail_bound is nan when no analytic bound applies (non-constant bias
    with lam > 0)."""

    bias: BiasSpec
    lam: float
    t: float
    n_max: int
    log_terms: np.ndarray
    log_partials: np.ndarray
    log_tail_bound: float
    converged: bool
    rel_tail: float

    @property
    def log_value(self) -> float:
        return float(self.log_partials[-1])

    @property
    def term_log_ratios(self) -> np.ndarray:
        return np.diff(self.log_terms)


def _tail_bound_log(b: BiasSpec, lam: float, t: float, n: np.ndarray) -> np.ndarray:
    """Log upper bound on the series tail beyond jump count n.

    For lam <= 0 the heat weight is at most 1 (heat >= 0), leaving the Poisson
    tail.  For constant bias and lam > 0 the weight of an n-jump path is at
    most (alpha+1)^(lam n), which resums to a rescaled Poisson tail."""
    if lam <= 0.0:
        return poisson.logsf(n, t)
    if b.variant == "constant":
        scale = (b.alpha + 1.0) ** lam
        return t * (scale - 1.0) + poisson.logsf(n, t * scale)
    return np.full(np.shape(n), np.nan)


def bd_mgf_truncated(
    b: BiasSpec, lam: float, t: float, n_max: int, rel_tail: float = 1e-8
) -> MGFSeries:
    """Evaluate the MGF series through jump count n_max, entirely in log space.

    The k = 0 term rides along with weight 1 (heat 0), so at lam = 0 the
    partial sum is exactly the Poisson CDF.  converged means the tail bound
    sits below rel_tail of the partial sum; with no bound available it falls
    back to the term ratios at the truncation edge staying below 1.
    """
    if t <= 0.0:
        raise ValueError("t must be positive")
    if not 1 <= n_max <= N_MAX_CAP:
        raise ValueError(f"n_max must be in [1, {N_MAX_CAP}]")
    lam_heats = lam * bd_heat_vector(b, n_max + 1)  # matches the DP row size
    lpois = _log_poisson_pmf(t, n_max)
    terms = np.empty(n_max + 1)
    for n, lw in _walk_log_weights(b, n_max):
        terms[n] = lpois[n] + logsumexp(lw + lam_heats)
    partials = np.logaddexp.accumulate(terms)
    tail = float(_tail_bound_log(b, lam, t, np.array(n_max)))
    if math.isnan(tail):
        edge = np.diff(terms)[-10:]
        converged = bool(np.all(edge < 0.0))
    else:
        converged = bool(tail <= math.log(rel_tail) + partials[-1])
    return MGFSeries(
        bias=b, lam=lam, t=t, n_max=n_max, log_terms=terms, log_partials=partials,
        log_tail_bound=tail, converged=converged, rel_tail=rel_tail,
    )


@dataclass(frozen=True)
class FreeEnergyEstimate:
    """(1/t) log of the truncated MGF, with the two analytic bounds.

    lower_bound = alpha^(1+lam)/(alpha+1) - 1 and upper_bound =
    (alpha+1)^lam - 1, both direct evaluations; inside is the strict
    enclosure check.  reliable means the truncation tail bound met rel_tail."""

    lam: float
    t: float
    n_used: int
    log_mgf: float
    log_tail: float
    estimate: float
    lower_bound: float
    upper_bound: float
    inside: bool
    reliable: bool


def bd_free_energy(
    b: BiasSpec,
    lam: float,
    t: float,
    n_max: Optional[int] = None,
    rel_tail: float = 1e-8,
) -> FreeEnergyEstimate:
    """Finite-t free-energy estimate (1/t) log M(lam, t) for the constant bias,
    against the analytic bounds.

    With n_max omitted, the truncation is the smallest jump count whose tail
    bound is below rel_tail of the partial sum (so at lam = 0 the partial sum
    stays strictly below 1 by about the admitted tail)."""
    if b.variant != "constant":
        raise ValueError("free-energy estimation is supported for the constant bias only")
    alpha = b.alpha
    lower = alpha ** (1.0 + lam) / (alpha + 1.0) - 1.0
    upper = (alpha + 1.0) ** lam - 1.0

    guess = int(math.ceil(t * max(1.0, (alpha + 1.0) ** max(lam, 0.0)))) + 25
    n_cap = min(max(2 * guess, 64), N_MAX_CAP) if n_max is None else n_max
    series = bd_mgf_truncated(b, lam, t, n_cap, rel_tail)
    n_used = n_cap
    reliable = series.converged
    if n_max is None:
        while not series.converged and n_cap < N_MAX_CAP:
            n_cap = min(2 * n_cap, N_MAX_CAP)
            series = bd_mgf_truncated(b, lam, t, n_cap, rel_tail)
        reliable = series.converged
        if reliable:
            ns = np.arange(series.n_max + 1)
            tails = _tail_bound_log(b, lam, t, ns)
            ok = tails <= math.log(rel_tail) + series.log_partials
            n_used = int(np.argmax(ok))  # smallest truncation meeting the bound
        else:
            n_used = series.n_max
    log_mgf = float(series.log_partials[n_used])
    log_tail = float(_tail_bound_log(b, lam, t, np.asarray(n_used)))
    est = log_mgf / t
    return FreeEnergyEstimate(
        lam=lam, t=t, n_used=n_used, log_mgf=log_mgf, log_tail=log_tail,
        estimate=est, lower_bound=lower, upper_bound=upper,
        inside=bool(lower < est < upper), reliable=reliable,
    )


@dataclass(frozen=True, eq=False)
class DivergenceReport:
    """Growth certificate for the MGF series at one (lam, t).

    diverged: term ratios at the truncation edge exceed 1 and keep increasing,
    so partial sums grow without bound.  converged: edge ratios are below 1
    and shrinking; log_tail_estimate then bounds the remainder geometrically.
    eta_log_partials are the partial products of prod_k 2^k/(2^k+1)."""

    lam: float
    t: float
    n_list: np.ndarray
    log_partials_at: np.ndarray
    log_terms: np.ndarray
    log_term_ratios: np.ndarray
    diverged: bool
    converged: bool
    log_tail_estimate: float
    eta: float
    eta_log_partials: np.ndarray

    def log_growth_factor(self, n_from: int, n_to: int) -> float:
        """log of partial_sum(n_to) / partial_sum(n_from)."""
        i, j = list(self.n_list).index(n_from), list(self.n_list).index(n_to)
        return float(self.log_partials_at[j] - self.log_partials_at[i])


def _eta_log_partials(k_max: int = 100) -> np.ndarray:
    k = np.arange(k_max + 1, dtype=float)
    return np.cumsum(k * math.log(2.0) - np.logaddexp(k * math.log(2.0), 0.0))


def bd_divergence_scan(
    b: BiasSpec, lam: float, t: float, n_list: Sequence[int], window: int = 20
) -> DivergenceReport:
    """Partial sums at each truncation in n_list plus a divergence or
    convergence certificate from the term-ratio behaviour at the edge."""
    n_list = np.asarray(sorted(n_list), dtype=int)
    series = bd_mgf_truncated(b, lam, t, int(n_list[-1]))
    ratios = series.term_log_ratios
    edge = ratios[-window:]
    diverged = bool(np.all(edge > 0.0) and np.all(np.diff(edge) > 0.0))
    converged = bool(np.all(edge < 0.0))
    if converged:
        r = float(np.exp(edge.max()))
        log_tail = float(series.log_terms[-1] + math.log(r) - math.log(1.0 - r))
    else:
        log_tail = math.nan
    eta_partials = _eta_log_partials()
    return DivergenceReport(
        lam=lam, t=t, n_list=n_list,
        log_partials_at=series.log_partials[n_list],
        log_terms=series.log_terms, log_term_ratios=ratios,
        diverged=diverged, converged=converged, log_tail_estimate=log_tail,
        eta=float(np.exp(eta_partials[-1])), eta_log_partials=eta_partials,
    )


def _p_table(b: BiasSpec, k_max: int) -> np.ndarray:
    lp, _ = b.log_pq(k_max)
    return np.exp(lp)


def _walk_batch(
    b: BiasSpec, start: np.ndarray, steps: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Advance every path by its own number of embedded-walk steps, in
    lockstep.  One uniform per path per round keeps the draw count a pure
    function of (n, max steps), so results never depend on how the paths
    interleave."""
    x = start.astype(np.int64, copy=True)
    m = int(steps.max(initial=0))
    p_tab = _p_table(b, int(start.max(initial=0)) + m + 1)
    for j in range(m):
        u = rng.random(len(x))
        up = u < p_tab[x]  # p_0 = 1 and u < 1 always, so 0 never steps down
        x = np.where(steps > j, np.where(up, x + 1, x - 1), x)
    return x


def simulate_bd(
    b: BiasSpec, t: float, n: int, seed: int, lane: int = 0
) -> Tuple[np.ndarray, np.ndarray]:
    """n independent trajectories: (endpoints X_t, heats Q(0, t)).

    Jump times are a unit-rate Poisson process, so each trajectory is a
    Poisson(t) number of embedded-walk steps; the heat follows from the
    endpoint alone.  The ensemble is a pure function of (seed, lane, n)."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, lane)))
    steps = rng.poisson(t, size=n)
    states = _walk_batch(b, np.zeros(n, dtype=np.int64), steps, rng)
    k_max = int(states.max(initial=0))
    heats = bd_heat_vector(b, k_max)[states]
    return states, heats


def bd_exact_law(b: BiasSpec, t: float, n_floor: int = 0, k_pad: float = 40.0) -> np.ndarray:
    """log mu(k, t) for k = 0..n_used: the time-t law of the walk, by mixing
    the embedded-walk weights with Poisson(t) jump-count probabilities.

    The jump-count truncation keeps the neglected Poisson tail far below
    double precision (roughly t + k_pad sqrt(t) + 60 steps), so the returned
    law is exact for all practical purposes."""
    n_used = max(int(math.ceil(t + k_pad * math.sqrt(t) + 60.0)), n_floor)
    lpois = _log_poisson_pmf(t, n_used)
    acc = np.full(n_used + 2, -np.inf)
    for n, lw in _walk_log_weights(b, n_used):
        acc = np.logaddexp(acc, lpois[n] + lw)
    return acc


@dataclass(frozen=True, eq=False)
class BDStripReport:
    """Two-sided MGF agreement for the walk on the strip lam in [-1, 0].

    The forward measure starts at site 0 while the backward comparison starts
    from the time-t law, so absolute continuity holds in one direction only:
    backward trajectories that do not land on 0 carry an infinite backward
    score and enter every estimate with weight zero (that is the convention
    the change of variables dictates across the whole strip, endpoints
    included).  finite_fraction records how many backward trajectories
    contributed."""

    lambdas: np.ndarray
    lhs: np.ndarray
    lhs_se: np.ndarray
    rhs: np.ndarray
    rhs_se: np.ndarray
    agree: np.ndarray
    lhs_max_share: np.ndarray
    rhs_max_share: np.ndarray
    finite_fraction: float

    @property
    def all_agree(self) -> bool:
        return bool(np.all(self.agree))


def bd_tft_check(
    b: BiasSpec, t: float, lam_grid: Sequence[float], n: int, seed: int
) -> BDStripReport:
    """Simulation check of E_P[e^{lam S_P}] = E_Q[e^{-(1+lam) S_Q}] on the
    strip, for the walk started at 0 against the protocol-reversed walk
    started from the exact time-t law.

    Both scores have closed forms through the endpoint: S_P = heat(X_t) -
    log mu(X_t, t) for forward trajectories, and S_Q = log mu(X_0, t) -
    heat(X_0) for backward trajectories landing on 0 (infinite otherwise).
    """
    lams = np.asarray(lam_grid, dtype=float)
    if np.any(lams < -1.0) or np.any(lams > 0.0):
        raise ValueError("strip check is defined for lambda in [-1, 0]")

    states_p, heats_p = simulate_bd(b, t, n, seed, lane=0)

    # backward ensemble: start from the time-t law (drawn exactly by running a
    # fresh forward walk), then run the reversed-protocol walk, which has the
    # same rates since the protocol is time-independent
    rng = np.random.default_rng(np.random.SeedSequence((seed, 1)))
    start_q = _walk_batch(b, np.zeros(n, dtype=np.int64), rng.poisson(t, size=n), rng)
    end_q = _walk_batch(b, start_q, rng.poisson(t, size=n), rng)

    k_top = int(max(states_p.max(initial=0), start_q.max(initial=0)))
    log_mu = bd_exact_law(b, t, n_floor=k_top + 2)
    heats_all = bd_heat_vector(b, k_top + 1)

    s_p = heats_p - log_mu[states_p]
    finite = end_q == 0
    s_q = np.where(finite, log_mu[start_q] - heats_all[start_q], 0.0)

    lhs = np.empty(len(lams)); lhs_se = np.empty(len(lams)); lhs_sh = np.empty(len(lams))
    rhs = np.empty(len(lams)); rhs_se = np.empty(len(lams)); rhs_sh = np.empty(len(lams))
    for i, lam in enumerate(lams):
        lhs[i], lhs_se[i], lhs_sh[i] = _mean_exp_with_se(lam * s_p)
        log_w = np.where(finite, -(1.0 + lam) * s_q, -np.inf)
        rhs[i], rhs_se[i], rhs_sh[i] = _mean_exp_with_se(log_w)
    agree = np.abs(lhs - rhs) <= 3.0 * np.sqrt(lhs_se**2 + rhs_se**2)
    return BDStripReport(
        lambdas=lams, lhs=lhs, lhs_se=lhs_se, rhs=rhs, rhs_se=rhs_se, agree=agree,
        lhs_max_share=lhs_sh, rhs_max_share=rhs_sh, finite_fraction=float(finite.mean()),
    )

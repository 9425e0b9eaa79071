"""State spaces, driving protocols, and process measures for Markov jump processes.

A process measure is the path law of a continuous-time Markov chain on a finite
state space, driven by a (possibly time-dependent) rate protocol over a fixed
horizon [0, T].  Protocols come in two forms: piecewise-constant in time (a
rate matrix per interval, integrals and reversals exact) and functional (an
arbitrary rate evaluator with a global bound, for thinning-based simulation).

Rates are stored as off-diagonal matrices k[i, j] = rate of the jump i -> j;
diagonals are identically zero and exit rates are row sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import expm
from scipy.integrate import RK45

__all__ = [
    "StateSpace",
    "PiecewiseProtocol",
    "FunctionalProtocol",
    "RateProtocol",
    "InitialDistribution",
    "Hamiltonian",
    "ProcessMeasure",
    "protocol_reverse",
    "build_ldb_protocol",
    "gibbs_distribution",
    "evolve_law",
]

_SUPPORT_GRID = 65  # validation grid for functional protocols


def _frozen_array(x, dtype=float) -> np.ndarray:
    a = np.array(x, dtype=dtype)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Finite state space {0, ..., size-1}, or the nonnegative integers.

    size is None for the countable (birth-death) kind; the general CTMC
    machinery requires a finite space with at least two states.
    """

    size: Optional[int]
    labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        if self.size is not None:
            if self.size < 2:
                raise ValueError("finite state space needs at least 2 states")
            if self.labels is not None and len(self.labels) != self.size:
                raise ValueError("label count does not match state count")

    @classmethod
    def finite(cls, n: int, labels: Optional[Sequence[str]] = None) -> "StateSpace":
        return cls(size=int(n), labels=tuple(labels) if labels is not None else None)

    @classmethod
    def nonnegative_integers(cls) -> "StateSpace":
        return cls(size=None)

    @property
    def is_finite(self) -> bool:
        return self.size is not None


def _validate_rate_matrix(k: np.ndarray) -> None:
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError("rate matrix must be square")
    if not np.all(np.isfinite(k)):
        raise ValueError("rates must be finite")
    off = ~np.eye(k.shape[0], dtype=bool)
    if np.any(k[off] < 0):
        raise ValueError("off-diagonal rates must be nonnegative")


@dataclass(frozen=True, eq=False)
class PiecewiseProtocol:
    """Piecewise-constant rates: matrix matrices[m] applies on [breakpoints[m], breakpoints[m+1])."""

    breakpoints: np.ndarray  # (m+1,), 0 = b_0 < ... < b_m = T
    matrices: np.ndarray  # (m, N, N), zero diagonal

    def __post_init__(self):
        b = _frozen_array(self.breakpoints)
        if b.ndim != 1 or len(b) < 2:
            raise ValueError("need at least one interval")
        if b[0] != 0.0 or np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must start at 0 and increase strictly")
        mats = np.array(self.matrices, dtype=float)
        if mats.ndim != 3 or mats.shape[0] != len(b) - 1:
            raise ValueError("need one rate matrix per interval")
        for k in mats:
            _validate_rate_matrix(k)
        n = mats.shape[1]
        mats[:, np.arange(n), np.arange(n)] = 0.0
        # the support of the rates must not change with time, and supported
        # rates must be strictly positive everywhere on [0, T]
        supp = mats[0] > 0
        if not all(np.array_equal(k > 0, supp) for k in mats[1:]):
            raise ValueError("rate support must be constant in time")
        mats.flags.writeable = False
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "matrices", mats)

    @property
    def horizon(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def n_states(self) -> int:
        return self.matrices.shape[1]

    def interval_index(self, s: float) -> int:
        m = len(self.breakpoints) - 1
        idx = int(np.searchsorted(self.breakpoints, s, side="right")) - 1
        return min(max(idx, 0), m - 1)

    def rates(self, s: float) -> np.ndarray:
        return self.matrices[self.interval_index(s)]

    def exit_rates(self, s: float) -> np.ndarray:
        return self.rates(s).sum(axis=1)

    @property
    def support(self) -> np.ndarray:
        return self.matrices[0] > 0


@dataclass(frozen=True, eq=False)
class FunctionalProtocol:
    """Rates given by an evaluator s -> off-diagonal rate matrix, with a true global bound.

    rate_bound must dominate every individual rate k_ij(s) on [0, T]; it is
    spot-checked on a validation grid at construction and enforced again at
    simulation time by the thinning sampler.
    """

    horizon: float
    n_states: int
    rate_fn: Callable[[float], np.ndarray]
    rate_bound: float

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.rate_bound <= 0 or not math.isfinite(self.rate_bound):
            raise ValueError("rate bound must be positive and finite")
        grid = np.linspace(0.0, self.horizon, _SUPPORT_GRID)
        supp = None
        for s in grid:
            k = np.asarray(self.rate_fn(float(s)), dtype=float)
            _validate_rate_matrix(k)
            if k.shape[0] != self.n_states:
                raise ValueError("rate evaluator dimension mismatch")
            off = ~np.eye(self.n_states, dtype=bool)
            if np.max(k[off], initial=0.0) > self.rate_bound:
                raise ValueError("rate bound violated on validation grid")
            here = k > 0
            here[np.arange(self.n_states), np.arange(self.n_states)] = False
            if supp is None:
                supp = here
            elif not np.array_equal(here, supp):
                raise ValueError("rate support must be constant in time")

    def rates(self, s: float) -> np.ndarray:
        k = np.asarray(self.rate_fn(float(s)), dtype=float).copy()
        k[np.arange(self.n_states), np.arange(self.n_states)] = 0.0
        return k

    def exit_rates(self, s: float) -> np.ndarray:
        return self.rates(s).sum(axis=1)

    @property
    def support(self) -> np.ndarray:
        return self.rates(0.0) > 0


RateProtocol = Union[PiecewiseProtocol, FunctionalProtocol]


@dataclass(frozen=True, eq=False)
class InitialDistribution:
    """Probability vector over the finite state space."""

    masses: np.ndarray

    def __post_init__(self):
        m = _frozen_array(self.masses)
        if m.ndim != 1:
            raise ValueError("masses must be a vector")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise ValueError("masses must be finite and nonnegative")
        if abs(m.sum() - 1.0) > 1e-12:
            raise ValueError("masses must sum to 1 within 1e-12")
        object.__setattr__(self, "masses", m)

    @classmethod
    def uniform(cls, n: int) -> "InitialDistribution":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def point(cls, n: int, x: int) -> "InitialDistribution":
        m = np.zeros(n)
        m[x] = 1.0
        return cls(m)


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """Energy landscape H(x, s) in units of beta^-1, with inverse temperature beta.

    energies(s) returns the vector of energies of all states at time s.
    """

    beta: float
    n_states: int
    energies: Callable[[float], np.ndarray]

    def __post_init__(self):
        if self.beta < 0 or not math.isfinite(self.beta):
            raise ValueError("beta must be finite and nonnegative")
        e = np.asarray(self.energies(0.0), dtype=float)
        if e.shape != (self.n_states,) or not np.all(np.isfinite(e)):
            raise ValueError("energy evaluator must return a finite vector per state")

    def energy(self, x: int, s: float) -> float:
        return float(np.asarray(self.energies(s), dtype=float)[x])

    @classmethod
    def constant(cls, energies: Sequence[float], beta: float) -> "Hamiltonian":
        vec = _frozen_array(energies)
        return cls(beta=float(beta), n_states=len(vec), energies=lambda s: vec)

    @classmethod
    def piecewise(
        cls, breakpoints: Sequence[float], tables: Sequence[Sequence[float]], beta: float
    ) -> "Hamiltonian":
        """One energy vector per interval of the breakpoint grid (same convention
        as PiecewiseProtocol: the value at s = T is the last interval's)."""
        b = _frozen_array(breakpoints)
        tabs = _frozen_array(tables)
        if tabs.ndim != 2 or tabs.shape[0] != len(b) - 1:
            raise ValueError("need one energy vector per interval")
        m = len(b) - 1

        def ev(s: float) -> np.ndarray:
            idx = min(max(int(np.searchsorted(b, s, side="right")) - 1, 0), m - 1)
            return tabs[idx]

        return cls(beta=float(beta), n_states=tabs.shape[1], energies=ev)


@dataclass(frozen=True, eq=False)
class ProcessMeasure:
    """Path law of a CTMC: state space, rate protocol, initial distribution."""

    space: StateSpace
    protocol: RateProtocol
    initial: InitialDistribution

    def __post_init__(self):
        if not self.space.is_finite:
            raise ValueError("ProcessMeasure requires a finite state space")
        if self.space.size != self.protocol.n_states:
            raise ValueError("protocol dimension does not match state space")
        if len(self.initial.masses) != self.space.size:
            raise ValueError("initial distribution does not match state space")

    @property
    def horizon(self) -> float:
        return float(self.protocol.horizon)


def protocol_reverse(p: RateProtocol) -> RateProtocol:
    """The protocol driven backwards: rates s -> k(T - s).

    Piecewise breakpoints are reflected (b -> T - b) and the interval matrices
    reordered; functional protocols wrap the evaluator, keeping the bound.
    """
    if isinstance(p, PiecewiseProtocol):
        T = p.horizon
        b = T - p.breakpoints[::-1]
        b = b.copy()
        b[0] = 0.0  # guard reflection roundoff at the endpoints
        b[-1] = T
        return PiecewiseProtocol(breakpoints=b, matrices=p.matrices[::-1])
    T = p.horizon
    fn = p.rate_fn
    return FunctionalProtocol(
        horizon=T,
        n_states=p.n_states,
        rate_fn=lambda s: fn(T - s),
        rate_bound=p.rate_bound,
    )


def build_ldb_protocol(
    h: Hamiltonian,
    base_rate: float,
    horizon: float,
    breakpoints: Optional[Sequence[float]] = None,
    connectivity: Optional[np.ndarray] = None,
    bound_margin: float = 1.05,
) -> RateProtocol:
    """Rates obeying local detailed balance k_ij/k_ji = exp(-beta (H_j - H_i)).

    Uses the symmetric kinetic rule k_ij(s) = base_rate * exp(-beta (H(j,s) -
    H(i,s)) / 2) on the given connectivity graph (default: complete graph).
    With breakpoints the energies must be constant on each interval and the
    result is an exact PiecewiseProtocol; otherwise a FunctionalProtocol whose
    rate bound is taken from a dense time grid with a safety margin.
    """
    if base_rate <= 0:
        raise ValueError("base rate must be positive")
    n = h.n_states
    if connectivity is None:
        conn = ~np.eye(n, dtype=bool)
    else:
        conn = np.asarray(connectivity, dtype=bool)
        if conn.shape != (n, n) or not np.array_equal(conn, conn.T):
            raise ValueError("connectivity must be a symmetric boolean matrix")
        conn = conn & ~np.eye(n, dtype=bool)

    def rate_matrix(s: float) -> np.ndarray:
        e = np.asarray(h.energies(s), dtype=float)
        if not np.all(np.isfinite(e)):
            raise ValueError("non-finite energies")
        k = base_rate * np.exp(-h.beta * (e[None, :] - e[:, None]) / 2.0)
        k[~conn] = 0.0
        return k

    if breakpoints is not None:
        b = np.asarray(breakpoints, dtype=float)
        if abs(b[-1] - horizon) > 0:
            raise ValueError("breakpoints must end at the horizon")
        mids = (b[:-1] + b[1:]) / 2.0
        mats = np.stack([rate_matrix(float(s)) for s in mids])
        return PiecewiseProtocol(breakpoints=b, matrices=mats)

    grid = np.linspace(0.0, horizon, 513)
    kmax = max(float(rate_matrix(float(s)).max()) for s in grid)
    return FunctionalProtocol(
        horizon=float(horizon),
        n_states=n,
        rate_fn=rate_matrix,
        rate_bound=bound_margin * kmax,
    )


def gibbs_distribution(h: Hamiltonian, s: float) -> Tuple[InitialDistribution, float]:
    """Gibbs law at time s, masses proportional to exp(-beta H(x, s)), and log Z(s)."""
    e = np.asarray(h.energies(s), dtype=float)
    w = -h.beta * e
    shift = w.max()  # overflow guard
    z = np.exp(w - shift)
    log_z = shift + math.log(z.sum())
    return InitialDistribution(z / z.sum()), log_z


def _generator(k: np.ndarray) -> np.ndarray:
    g = k.copy()
    np.fill_diagonal(g, 0.0)
    np.fill_diagonal(g, -g.sum(axis=1))
    return g


def evolve_law(m: ProcessMeasure, s: float) -> InitialDistribution:
    """The law of X_s under m, by solving the forward (master) equation.

    Piecewise-constant protocols use exact per-interval matrix exponentials;
    functional protocols integrate with an adaptive RK45 stepper at absolute
    tolerance 1e-10, renormalizing the probability vector after each accepted
    step.
    """
    if s < 0 or s > m.horizon:
        raise ValueError("time outside [0, T]")
    mu = m.initial.masses.astype(float).copy()
    if s == 0.0:
        return m.initial
    p = m.protocol
    if isinstance(p, PiecewiseProtocol):
        for idx in range(len(p.breakpoints) - 1):
            a, b = p.breakpoints[idx], min(p.breakpoints[idx + 1], s)
            if b <= a:
                break
            mu = mu @ expm(_generator(p.matrices[idx]) * (b - a))
            if b >= s:
                break
    else:
        def rhs(t, y):
            return y @ _generator(p.rates(float(t)))

        solver = RK45(rhs, 0.0, mu, t_bound=s, atol=1e-10, rtol=1e-10)
        while solver.status == "running":
            solver.step()
            solver.y /= solver.y.sum()
        if solver.status == "failed":
            raise RuntimeError("forward equation integration failed to meet tolerance")
        mu = solver.y
    mu = np.where(mu < 0, 0.0, mu)  # clip integrator roundoff
    return InitialDistribution(mu / mu.sum())

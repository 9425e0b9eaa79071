"""Log path densities and thermodynamic trajectory functionals.

All path likelihoods are taken with respect to the same reference measure
(jump count times Lebesgue on the jump-time simplex), so differences of log
densities are log Radon-Nikodym derivatives between process measures and
transformed process measures.  The transforms module guarantees its bijections
preserve that reference measure, which is the condition making this valid.

Everything stays in log space; nothing is exponentiated until an expectation
is actually formed (see the verify module).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad

from .process import (
    FunctionalProtocol,
    PiecewiseProtocol,
    ProcessMeasure,
    evolve_law,
    gibbs_distribution,
    protocol_reverse,
    Hamiltonian,
)
from .sampler import JumpPath
from .transforms import PathTransform, TimeReversal, apply_transform

__all__ = [
    "SupportError",
    "Score",
    "log_path_density",
    "log_path_density_batch",
    "score",
    "score_batch",
    "backward_measure_bc1",
    "backward_measure_bc2",
    "entropy_production",
    "dissipated_work",
    "heat_dissipation",
    "heat_batch",
    "gibbs_boundary_consistent",
]

_QUAD_ABS_TOL = 1e-10


class SupportError(ValueError):
    """The path lies outside the measure's support (zero initial mass or zero
    rate along the trajectory).  Distinct from numerical failure: it signals
    that an absolute-continuity hypothesis does not hold for this input."""


@dataclass(frozen=True)
class Score:
    """A log Radon-Nikodym value split into boundary and current parts.

    boundary collects the initial-mass log ratio (entropy change, or energy
    and free-energy differences under Gibbs boundary data); current collects
    the dynamical part (the heat, whenever holding integrals cancel).
    """

    value: float
    direction: str  # "forward" (S_P) or "backward" (S_Q)
    boundary: float
    current: float

    def __post_init__(self):
        if self.direction not in ("forward", "backward"):
            raise ValueError("direction must be forward or backward")
        if abs(self.value - (self.boundary + self.current)) > 1e-10:
            raise ValueError("score components do not add up")


def _occupation_integral_piecewise(p: PiecewiseProtocol, w: JumpPath) -> float:
    exit_rates = p.matrices.sum(axis=2)
    total = 0.0
    for a, b, x in w.segments():
        for k in range(len(p.breakpoints) - 1):
            lo = max(a, p.breakpoints[k])
            hi = min(b, p.breakpoints[k + 1])
            if hi > lo:
                total += exit_rates[k, x] * (hi - lo)
    return total


def _occupation_integral_functional(p: FunctionalProtocol, w: JumpPath) -> float:
    total = 0.0
    for a, b, x in w.segments():
        val, err = quad(
            lambda s, x=x: p.rates(s)[x].sum(), a, b, epsabs=_QUAD_ABS_TOL, limit=200
        )
        if err > 100 * _QUAD_ABS_TOL:
            raise RuntimeError(f"occupation integral tolerance failure on [{a}, {b}]")
        total += val
    return total


def _density_parts(m: ProcessMeasure, w: JumpPath) -> Tuple[float, float]:
    """(log initial mass, log dynamical part) of the density of w under m."""
    if w.horizon != m.horizon:
        raise ValueError("path horizon does not match measure horizon")
    mass = m.initial.masses[w.x0]
    if mass <= 0.0:
        raise SupportError(f"initial state {w.x0} has zero mass")
    p = m.protocol
    log_jumps = 0.0
    prev = w.x0
    for t, x in zip(w.times, w.states):
        k = p.rates(float(t))[prev, int(x)]
        if k <= 0.0:
            raise SupportError(f"zero rate for jump {prev}->{int(x)} at t={float(t)}")
        log_jumps += np.log(k)
        prev = int(x)
    if isinstance(p, PiecewiseProtocol):
        occ = _occupation_integral_piecewise(p, w)
    else:
        occ = _occupation_integral_functional(p, w)
    return float(np.log(mass)), float(log_jumps - occ)


def log_path_density(m: ProcessMeasure, w: JumpPath) -> float:
    """log density of w under m w.r.t. the common path reference measure:
    log mu0(x0) + sum_i log k(t_i) - integral of the occupied exit rate."""
    init, dyn = _density_parts(m, w)
    return init + dyn


def _density_parts_batch(
    m: ProcessMeasure, paths: Sequence[JumpPath]
) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized _density_parts over an ensemble (piecewise protocols only;
    functional protocols fall back to the per-path loop)."""
    p = m.protocol
    n = len(paths)
    if not isinstance(p, PiecewiseProtocol):
        parts = [_density_parts(m, w) for w in paths]
        return np.array([a for a, _ in parts]), np.array([b for _, b in parts])

    x0s = np.array([w.x0 for w in paths])
    masses = m.initial.masses[x0s]
    if np.any(masses <= 0.0):
        bad = int(np.argmax(masses <= 0.0))
        raise SupportError(f"initial state of path {bad} has zero mass")
    log_init = np.log(masses)

    # flatten jumps
    pid = np.concatenate(
        [np.full(w.n_jumps, i, dtype=np.int64) for i, w in enumerate(paths)]
    ) if n else np.empty(0, dtype=np.int64)
    if len(pid):
        tt = np.concatenate([w.times for w in paths])
        to = np.concatenate([w.states for w in paths])
        frm = np.concatenate(
            [np.concatenate(([w.x0], w.states[:-1])) if w.n_jumps else np.empty(0, dtype=np.int64) for w in paths]
        )
        iv = np.clip(
            np.searchsorted(p.breakpoints, tt, side="right") - 1,
            0,
            len(p.breakpoints) - 2,
        )
        rates = p.matrices[iv, frm, to]
        if np.any(rates <= 0.0):
            bad = int(pid[np.argmax(rates <= 0.0)])
            raise SupportError(f"zero rate along path {bad}")
        log_jumps = np.zeros(n)
        np.add.at(log_jumps, pid, np.log(rates))
    else:
        log_jumps = np.zeros(n)

    # flatten occupation segments and overlap them with the protocol grid
    seg_pid, seg_a, seg_b, seg_x = [], [], [], []
    for i, w in enumerate(paths):
        bounds = np.concatenate(([0.0], w.times, [w.horizon]))
        occ_states = np.concatenate(([w.x0], w.states))
        seg_pid.append(np.full(len(occ_states), i, dtype=np.int64))
        seg_a.append(bounds[:-1])
        seg_b.append(bounds[1:])
        seg_x.append(occ_states)
    seg_pid = np.concatenate(seg_pid)
    seg_a = np.concatenate(seg_a)
    seg_b = np.concatenate(seg_b)
    seg_x = np.concatenate(seg_x).astype(np.int64)

    exit_rates = p.matrices.sum(axis=2)
    occ = np.zeros(n)
    for k in range(len(p.breakpoints) - 1):
        overlap = np.minimum(seg_b, p.breakpoints[k + 1]) - np.maximum(seg_a, p.breakpoints[k])
        overlap = np.where(overlap > 0.0, overlap, 0.0)
        np.add.at(occ, seg_pid, exit_rates[k, seg_x] * overlap)

    return log_init, log_jumps - occ


def log_path_density_batch(m: ProcessMeasure, paths: Sequence[JumpPath]) -> np.ndarray:
    init, dyn = _density_parts_batch(m, paths)
    return init + dyn


def score(
    P: ProcessMeasure,
    Q: ProcessMeasure,
    phi: PathTransform,
    w: JumpPath,
    direction: str = "forward",
) -> Score:
    """S_P(w) = log dP/d(phi Q)(w) or S_Q(w) = log dQ/d(phi^-1 P)(w),
    computed as log-density differences through the transform."""
    if direction == "forward":
        a_init, a_dyn = _density_parts(P, w)
        b_init, b_dyn = _density_parts(Q, apply_transform(phi, w))
    elif direction == "backward":
        a_init, a_dyn = _density_parts(Q, w)
        b_init, b_dyn = _density_parts(P, apply_transform(phi.inverse(), w))
    else:
        raise ValueError("direction must be forward or backward")
    boundary = a_init - b_init
    current = a_dyn - b_dyn
    return Score(value=boundary + current, direction=direction, boundary=boundary, current=current)


def score_batch(
    P: ProcessMeasure,
    Q: ProcessMeasure,
    phi: PathTransform,
    paths: Sequence[JumpPath],
    direction: str = "forward",
) -> np.ndarray:
    """Score values over an ensemble (vectorized densities)."""
    if direction == "forward":
        transformed = [apply_transform(phi, w) for w in paths]
        a_init, a_dyn = _density_parts_batch(P, paths)
        b_init, b_dyn = _density_parts_batch(Q, transformed)
    elif direction == "backward":
        inv = phi.inverse()
        transformed = [apply_transform(inv, w) for w in paths]
        a_init, a_dyn = _density_parts_batch(Q, paths)
        b_init, b_dyn = _density_parts_batch(P, transformed)
    else:
        raise ValueError("direction must be forward or backward")
    return (a_init - b_init) + (a_dyn - b_dyn)


def backward_measure_bc1(P: ProcessMeasure) -> ProcessMeasure:
    """Protocol-reversed measure started from the forward law at the horizon:
    the boundary choice under which the score is the entropy production."""
    return ProcessMeasure(
        space=P.space,
        protocol=protocol_reverse(P.protocol),
        initial=evolve_law(P, P.horizon),
    )


def backward_measure_bc2(P: ProcessMeasure, h: Hamiltonian) -> ProcessMeasure:
    """Protocol-reversed measure started from the Gibbs law at the horizon:
    the boundary choice under which the score is the dissipated work."""
    init, _ = gibbs_distribution(h, P.horizon)
    return ProcessMeasure(space=P.space, protocol=protocol_reverse(P.protocol), initial=init)


def entropy_production(
    P: ProcessMeasure, w: JumpPath, backward: Optional[ProcessMeasure] = None
) -> Score:
    """Entropy production of w: boundary part log mu(x0, 0) - log mu(x_T, T)
    plus the heat.  backward can be passed in to amortize the forward-law solve
    over an ensemble; it must equal backward_measure_bc1(P)."""
    if backward is None:
        backward = backward_measure_bc1(P)
    return score(P, backward, TimeReversal(), w, "forward")


def gibbs_boundary_consistent(P: ProcessMeasure, h: Hamiltonian, tol: float = 1e-10) -> bool:
    """Whether P's initial data are the Gibbs law of h at time 0.

    This is the check that the initial condition is a fixed function of the
    driving at the boundary, which is what gives the backward score its
    physical reading; it is decided here only for Gibbs data."""
    init, _ = gibbs_distribution(h, 0.0)
    return bool(np.max(np.abs(init.masses - P.initial.masses)) <= tol)


def dissipated_work(
    P: ProcessMeasure,
    h: Hamiltonian,
    w: JumpPath,
    backward: Optional[ProcessMeasure] = None,
) -> Score:
    """Dissipated work along w, beta W - beta dF: boundary part
    beta dH - beta dF plus the heat.  Requires Gibbs initial data for h."""
    if not gibbs_boundary_consistent(P, h):
        raise ValueError("initial distribution is not the Gibbs law of h at time 0")
    if backward is None:
        backward = backward_measure_bc2(P, h)
    return score(P, backward, TimeReversal(), w, "forward")


def heat_dissipation(P: ProcessMeasure, w: JumpPath) -> float:
    """Heat exported along w: the sum over jumps of the log ratio of the
    forward rate to the reverse rate at the jump time.  The holding-time
    integrals of the forward and protocol-reversed densities cancel exactly,
    so only jump terms remain."""
    p = P.protocol
    total = 0.0
    prev = w.x0
    for t, x in zip(w.times, w.states):
        k = p.rates(float(t))
        fwd, rev = k[prev, int(x)], k[int(x), prev]
        if fwd <= 0.0 or rev <= 0.0:
            raise SupportError(f"heat undefined: zero rate at t={float(t)}")
        total += np.log(fwd) - np.log(rev)
        prev = int(x)
    return float(total)


def heat_batch(P: ProcessMeasure, paths: Sequence[JumpPath]) -> np.ndarray:
    """Vectorized heat over an ensemble (piecewise protocols; functional
    protocols fall back to the per-path loop)."""
    p = P.protocol
    if not isinstance(p, PiecewiseProtocol):
        return np.array([heat_dissipation(P, w) for w in paths])
    n = len(paths)
    pid = np.concatenate(
        [np.full(w.n_jumps, i, dtype=np.int64) for i, w in enumerate(paths)]
    ) if n else np.empty(0, dtype=np.int64)
    out = np.zeros(n)
    if len(pid):
        tt = np.concatenate([w.times for w in paths])
        to = np.concatenate([w.states for w in paths])
        frm = np.concatenate(
            [np.concatenate(([w.x0], w.states[:-1])) if w.n_jumps else np.empty(0, dtype=np.int64) for w in paths]
        )
        iv = np.clip(np.searchsorted(p.breakpoints, tt, side="right") - 1, 0, len(p.breakpoints) - 2)
        fwd = p.matrices[iv, frm, to]
        rev = p.matrices[iv, to, frm]
        if np.any(fwd <= 0.0) or np.any(rev <= 0.0):
            bad = int(pid[np.argmax((fwd <= 0.0) | (rev <= 0.0))])
            raise SupportError(f"heat undefined along path {bad}")
        np.add.at(out, pid, np.log(fwd) - np.log(rev))
    return out

"""Bijections of path space with explicit inverses.

Every transform here preserves the jump count and maps the jump-time vector by
a piecewise isometry, so it preserves the reference measure on paths (jump
count times Lebesgue).  That property is what lets log-density differences
compute Radon-Nikodym derivatives between a measure and a transformed measure;
any new variant added to this module carries the same proof obligation.

Time reversal is the classical involution.  Holding permutations rearrange the
holding durations along a fixed jump skeleton and are genuinely noninvolutive
for permutation families that are not self-inverse (e.g. cyclic shifts), which
is the point: the identities verified downstream do not rely on transforms
being their own inverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple, Union

import numpy as np

from .sampler import JumpPath

__all__ = [
    "Identity",
    "TimeReversal",
    "HoldingPermutation",
    "Composition",
    "PathTransform",
    "PermutationFamily",
    "identity_family",
    "reverse_family",
    "cyclic_family",
    "table_family",
    "apply_transform",
    "invert_transform",
]


@dataclass(frozen=True, eq=False)
class PermutationFamily:
    """A permutation of {0, ..., m-1} for every segment count m.

    perms maps segment counts to explicit permutation arrays; counts not in
    the table fall back to the named rule.  rule is one of 'identity',
    'reverse', 'cyclic' (shift by `shift`).
    """

    rule: str = "identity"
    shift: int = 1
    perms: Dict[int, Tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if self.rule not in ("identity", "reverse", "cyclic"):
            raise ValueError(f"unknown permutation rule {self.rule!r}")
        for m, p in self.perms.items():
            if sorted(p) != list(range(m)):
                raise ValueError(f"table entry for m={m} is not a permutation")

    def perm(self, m: int) -> np.ndarray:
        if m in self.perms:
            return np.array(self.perms[m], dtype=np.int64)
        if self.rule == "identity":
            return np.arange(m)
        if self.rule == "reverse":
            return np.arange(m)[::-1]
        return (np.arange(m) + self.shift) % m

    def inverse(self) -> "PermutationFamily":
        inv_tab = {m: tuple(np.argsort(np.array(p)).tolist()) for m, p in self.perms.items()}
        rule, shift = self.rule, self.shift
        if rule == "cyclic":
            shift = -shift
        return PermutationFamily(rule=rule, shift=shift, perms=inv_tab)

    def is_involution(self) -> bool:
        table_ok = all(
            np.array_equal(np.array(p)[np.array(p)], np.arange(m))
            for m, p in self.perms.items()
        )
        if self.rule in ("identity", "reverse"):
            return table_ok
        # cyclic shift is self-inverse only in degenerate cases, and those only
        # for every m when the shift is 0
        return table_ok and self.shift == 0


def identity_family() -> PermutationFamily:
    return PermutationFamily(rule="identity")


def reverse_family() -> PermutationFamily:
    return PermutationFamily(rule="reverse")


def cyclic_family(shift: int = 1) -> PermutationFamily:
    return PermutationFamily(rule="cyclic", shift=shift)


def table_family(perms: Dict[int, Sequence[int]]) -> PermutationFamily:
    return PermutationFamily(rule="identity", perms={m: tuple(p) for m, p in perms.items()})


def _nudge_interior(times: np.ndarray, horizon: float) -> np.ndarray:
    """Push times one ulp inward if rounding collided with 0, T, or a neighbor."""
    lo = 0.0
    for i in range(len(times)):
        if times[i] <= lo:
            times[i] = np.nextafter(lo, horizon)
        lo = times[i]
    hi = horizon
    for i in reversed(range(len(times))):
        if times[i] >= hi:
            times[i] = np.nextafter(hi, 0.0)
        hi = times[i]
    return times


def _prefix_sums(d: np.ndarray) -> np.ndarray:
    # correctly rounded prefix sums keep round trips within an ulp of the
    # horizon scale per time (plain cumsum drifts)
    return np.array([math.fsum(d[: i + 1]) for i in range(len(d))])


@dataclass(frozen=True, eq=False)
class Identity:
    is_involution: bool = True

    def apply(self, w: JumpPath) -> JumpPath:
        return w

    def inverse(self) -> "Identity":
        return self


@dataclass(frozen=True, eq=False)
class TimeReversal:
    """w reversed in time: value at s becomes the left limit of w at T - s.

    The reversed path starts in the final state of w; its jump at T - t_i
    enters the state w occupied just before t_i.  Right-continuity is
    preserved.
    """

    is_involution: bool = True

    def apply(self, w: JumpPath) -> JumpPath:
        n = w.n_jumps
        if n == 0:
            return w
        times = (w.horizon - w.times)[::-1]
        entered = np.concatenate(([w.x0], w.states[:-1]))[::-1]
        times = _nudge_interior(times.copy(), w.horizon)
        return JumpPath(x0=w.final_state, times=times, states=entered, horizon=w.horizon)

    def inverse(self) -> "TimeReversal":
        return self


@dataclass(frozen=True, eq=False)
class HoldingPermutation:
    """Permute the holding durations along the jump skeleton.

    A path with n jumps is split into n+1 holding segments by the event times
    (0, t_1, ..., t_n, T); the output keeps the initial state and the
    jump-target sequence and permutes the segment durations by family.perm(n+1).
    """

    family: PermutationFamily

    @property
    def is_involution(self) -> bool:
        return self.family.is_involution()

    def apply(self, w: JumpPath) -> JumpPath:
        n = w.n_jumps
        if n == 0:
            return w
        bounds = np.concatenate(([0.0], w.times, [w.horizon]))
        durations = np.diff(bounds)
        p = self.family.perm(n + 1)
        times = _prefix_sums(durations[p][:-1])
        times = _nudge_interior(times, w.horizon)
        return JumpPath(x0=w.x0, times=times, states=w.states, horizon=w.horizon)

    def inverse(self) -> "HoldingPermutation":
        return HoldingPermutation(family=self.family.inverse())


@dataclass(frozen=True, eq=False)
class Composition:
    """Apply parts in listed order; the inverse reverses and inverts."""

    parts: Tuple["PathTransform", ...]

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))

    @property
    def is_involution(self) -> bool:
        if not self.parts:
            return True
        if len(self.parts) == 1:
            return self.parts[0].is_involution
        return False  # not decided structurally for longer chains

    def apply(self, w: JumpPath) -> JumpPath:
        for part in self.parts:
            w = part.apply(w)
        return w

    def inverse(self) -> "Composition":
        return Composition(tuple(p.inverse() for p in reversed(self.parts)))


PathTransform = Union[Identity, TimeReversal, HoldingPermutation, Composition]


def apply_transform(phi: PathTransform, w: JumpPath) -> JumpPath:
    return phi.apply(w)


def invert_transform(phi: PathTransform) -> PathTransform:
    return phi.inverse()

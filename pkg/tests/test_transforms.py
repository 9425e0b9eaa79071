"""Path-space bijections: hand examples, inverses, round trips."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from tftlab import (
    Composition,
    HoldingPermutation,
    Identity,
    JumpPath,
    TimeReversal,
    cyclic_family,
    reverse_family,
)


@st.composite
def jump_paths(draw, horizon=1.0, n_states=3):
    n = draw(st.integers(min_value=0, max_value=6))
    ticks = draw(
        st.lists(st.integers(min_value=1, max_value=127), min_size=n, max_size=n, unique=True)
    )
    times = np.sort(np.array(ticks, dtype=float)) * (horizon / 128.0)
    x0 = draw(st.integers(min_value=0, max_value=n_states - 1))
    states = []
    for _ in range(n):
        prev = states[-1] if states else x0
        step = draw(st.integers(min_value=0, max_value=n_states - 2))
        states.append(step + 1 if step >= prev else step)
    return JumpPath(x0=x0, times=times, states=np.array(states, dtype=np.int64), horizon=horizon)


def test_time_reversal_hand_example():
    w = JumpPath(x0=1, times=np.array([0.3]), states=np.array([2]), horizon=1.0)
    r = TimeReversal().apply(w)
    assert r.x0 == 2
    assert np.allclose(r.times, [0.7])
    assert np.array_equal(r.states, [1])


def test_time_reversal_two_jump_example():
    w = JumpPath(x0=0, times=np.array([0.2, 0.5]), states=np.array([1, 2]), horizon=1.0)
    r = TimeReversal().apply(w)
    assert r.x0 == 2
    assert np.allclose(r.times, [0.5, 0.8])
    # backward path passes through the same states in reverse order
    assert np.array_equal(r.states, [1, 0])


@given(jump_paths())
@settings(max_examples=200, deadline=None)
def test_time_reversal_roundtrip(w):
    rr = TimeReversal().apply(TimeReversal().apply(w))
    assert rr.x0 == w.x0
    assert np.array_equal(rr.states, w.states)
    assert np.all(np.abs(rr.times - w.times) <= 2 * np.spacing(w.horizon))


@given(jump_paths())
@settings(max_examples=200, deadline=None)
def test_cyclic_inverse_roundtrip(w):
    phi = HoldingPermutation(cyclic_family(1))
    back = phi.inverse().apply(phi.apply(w))
    assert back.x0 == w.x0
    assert np.array_equal(back.states, w.states)
    assert np.all(np.abs(back.times - w.times) <= len(w.times) * 4 * np.spacing(w.horizon))


def test_holding_permutation_moves_durations():
    w = JumpPath(x0=0, times=np.array([0.1, 0.6]), states=np.array([1, 2]), horizon=1.0)
    # reversal family: durations (0.1, 0.5, 0.4) -> (0.4, 0.5, 0.1)
    out = HoldingPermutation(reverse_family()).apply(w)
    assert np.allclose(out.times, [0.4, 0.9])
    assert out.x0 == w.x0 and np.array_equal(out.states, w.states)


def test_involution_flags():
    assert Identity().is_involution
    assert TimeReversal().is_involution
    assert HoldingPermutation(reverse_family()).is_involution
    assert not HoldingPermutation(cyclic_family(1)).is_involution
    assert Composition(()).is_involution
    assert Composition((TimeReversal(),)).is_involution
    assert not Composition((TimeReversal(), HoldingPermutation(cyclic_family(1)))).is_involution


def test_composition_applies_in_order_and_inverts():
    w = JumpPath(x0=0, times=np.array([0.25]), states=np.array([1]), horizon=1.0)
    phi = Composition((TimeReversal(), HoldingPermutation(cyclic_family(1))))
    a = HoldingPermutation(cyclic_family(1)).apply(TimeReversal().apply(w))
    b = phi.apply(w)
    assert b.x0 == a.x0 and np.allclose(b.times, a.times)
    back = phi.inverse().apply(b)
    assert back.x0 == w.x0
    assert np.all(np.abs(back.times - w.times) <= 8 * np.spacing(w.horizon))


def test_zero_jump_paths_are_fixed_points():
    w = JumpPath(x0=2, times=np.array([]), states=np.array([]), horizon=3.0)
    for phi in (Identity(), TimeReversal(), HoldingPermutation(cyclic_family(2))):
        assert phi.apply(w) is w

"""Path densities, scores, and trajectory functionals."""

import math

import numpy as np
import pytest

from tftlab import (
    InitialDistribution,
    JumpPath,
    ProcessMeasure,
    SupportError,
    TimeReversal,
    backward_measure_bc1,
    backward_measure_bc2,
    dissipated_work,
    entropy_production,
    evolve_law,
    gibbs_boundary_consistent,
    gibbs_distribution,
    heat_batch,
    heat_dissipation,
    log_path_density,
    log_path_density_batch,
    sample_ensemble,
    score,
    score_batch,
)

from conftest import build_driven, build_reversible


def hand_path():
    return JumpPath(x0=0, times=np.array([0.25, 0.75]), states=np.array([1, 2]), horizon=1.0)


def test_log_density_hand_computation():
    # first half: all energies 0, so every rate is 2 and every exit rate is 4;
    # second half: energies (0, 1, 2), k_xy = 2 exp(-(H_y - H_x)/2)
    P, _ = build_driven(beta=1.0, base_rate=2.0)
    w = hand_path()
    jumps = math.log(2.0) + (math.log(2.0) - 0.5)
    occupation = (
        4.0 * 0.25  # state 0 on [0, 0.25)
        + 4.0 * 0.25  # state 1 on [0.25, 0.5)
        + 2.0 * (math.exp(0.5) + math.exp(-0.5)) * 0.25  # state 1 on [0.5, 0.75)
        + 2.0 * (math.exp(1.0) + math.exp(0.5)) * 0.25  # state 2 on [0.75, 1)
    )
    expected = math.log(1.0 / 3.0) + jumps - occupation
    assert math.isclose(log_path_density(P, w), expected, rel_tol=1e-12)


def test_batch_density_matches_scalar():
    P, _ = build_driven()
    paths = sample_ensemble(P, 50, seed=8)
    batch = log_path_density_batch(P, paths)
    alone = np.array([log_path_density(P, w) for w in paths])
    assert np.allclose(batch, alone, rtol=1e-12, atol=1e-12)


def test_forward_backward_antisymmetry():
    P, h = build_driven()
    Q = backward_measure_bc2(P, h)
    phi = TimeReversal()
    for w in sample_ensemble(P, 40, seed=12):
        s_p = score(P, Q, phi, w, "forward").value
        s_q = score(P, Q, phi, phi.apply(w), "backward").value
        assert abs(s_p + s_q) < 1e-10


def test_score_batch_matches_scalar_both_directions():
    P, h = build_driven()
    Q = backward_measure_bc2(P, h)
    phi = TimeReversal()
    paths = sample_ensemble(P, 30, seed=13)
    for direction in ("forward", "backward"):
        batch = score_batch(P, Q, phi, paths, direction)
        alone = np.array([score(P, Q, phi, w, direction).value for w in paths])
        assert np.allclose(batch, alone, rtol=1e-12, atol=1e-12)


def test_reversible_system_has_zero_score():
    P, h = build_reversible(energies=(0.0, 0.5, 1.25))
    Q = backward_measure_bc2(P, h)
    for w in sample_ensemble(P, 60, seed=3):
        assert abs(score(P, Q, TimeReversal(), w).value) < 1e-10


def test_entropy_production_decomposition():
    P, _ = build_driven()
    mu0 = P.initial.masses
    mu1 = evolve_law(P, 1.0).masses
    for w in sample_ensemble(P, 40, seed=21):
        s = entropy_production(P, w)
        assert math.isclose(s.current, heat_dissipation(P, w), rel_tol=1e-10, abs_tol=1e-10)
        want = math.log(mu0[w.x0]) - math.log(mu1[w.final_state])
        assert math.isclose(s.boundary, want, rel_tol=1e-10, abs_tol=1e-10)
        assert math.isclose(s.value, s.boundary + s.current, rel_tol=1e-12)


def test_dissipated_work_pathwise_identity():
    P, h = build_driven()
    _, log_z0 = gibbs_distribution(h, 0.0)
    _, log_z1 = gibbs_distribution(h, 1.0)
    for w in sample_ensemble(P, 40, seed=22):
        s = dissipated_work(P, h, w)
        boundary = h.beta * (h.energy(w.final_state, 1.0) - h.energy(w.x0, 0.0))
        boundary += log_z1 - log_z0
        assert math.isclose(s.boundary, boundary, rel_tol=1e-10, abs_tol=1e-10)
        assert math.isclose(s.current, heat_dissipation(P, w), rel_tol=1e-10, abs_tol=1e-10)


def test_dissipated_work_requires_gibbs_start():
    P, h = build_driven()
    shifted = ProcessMeasure(
        space=P.space, protocol=P.protocol, initial=InitialDistribution.point(3, 0)
    )
    assert gibbs_boundary_consistent(P, h)
    assert not gibbs_boundary_consistent(shifted, h)
    with pytest.raises(ValueError):
        dissipated_work(shifted, h, hand_path())


def test_heat_single_jump_and_cycle():
    P, _ = build_reversible(energies=(0.0, 0.5))
    one = JumpPath(x0=0, times=np.array([0.4]), states=np.array([1]), horizon=1.0)
    # log k01 - log k10 = -(H_1 - H_0) under the symmetric rule
    assert math.isclose(heat_dissipation(P, one), -0.5, rel_tol=1e-12)
    cycle = JumpPath(x0=0, times=np.array([0.3, 0.6]), states=np.array([1, 0]), horizon=1.0)
    assert abs(heat_dissipation(P, cycle)) < 1e-14


def test_heat_batch_matches_scalar():
    P, _ = build_driven()
    paths = sample_ensemble(P, 80, seed=29)
    batch = heat_batch(P, paths)
    alone = np.array([heat_dissipation(P, w) for w in paths])
    assert np.allclose(batch, alone, rtol=1e-12, atol=1e-12)


def test_entropy_production_mean_is_positive_when_driven():
    P, _ = build_driven()
    paths = sample_ensemble(P, 4000, seed=31)
    backward = backward_measure_bc1(P)
    vals = score_batch(P, backward, TimeReversal(), paths)
    se = float(np.std(vals) / math.sqrt(len(vals)))
    assert float(np.mean(vals)) > 3 * se  # strictly dissipative protocol


def test_support_error_outside_initial_support():
    P, _ = build_driven()
    pinned = ProcessMeasure(
        space=P.space, protocol=P.protocol, initial=InitialDistribution.point(3, 1)
    )
    with pytest.raises(SupportError):
        log_path_density(pinned, hand_path())  # starts at 0, mass only on 1

"""Acceptance gate: one test per advertised guarantee, at the stated
tolerances and runtime budgets.  Each test prints a single summary line
(criterion k: PASS/FAIL plus the measured numbers) before asserting, so a red
run still reports every criterion it reached.
"""

import math
import time

import numpy as np
import pytest

from tftlab import (
    BiasSpec,
    CoordinatePermutation,
    DiscreteChain,
    HoldingPermutation,
    TimeReversal,
    backward_measure_bc1,
    backward_measure_bc2,
    bd_divergence_scan,
    bd_free_energy,
    bd_tft_check,
    cyclic_family,
    dissipated_work,
    distributional_test,
    entropy_production,
    estimate_mgf_pair,
    exact_verify,
    integral_ft_check,
    sample_ensemble,
    score_batch,
)

from conftest import ACCEPT_SEED, N_BIG, build_reversible

LAM_GRID = (-1.0, -0.75, -0.5, -0.25, 0.0)


def _report(k, ok, detail):
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'} - {detail}")


def _random_chain(rng, n_states, n_steps):
    init = rng.uniform(0.05, 1.0, size=n_states)
    init /= init.sum()
    mats = rng.uniform(0.05, 1.0, size=(n_steps, n_states, n_states))
    mats /= mats.sum(axis=2, keepdims=True)
    return DiscreteChain(initial=init, matrices=mats)


def _random_sigma(rng, n_steps):
    kind = int(rng.integers(0, 3))
    if kind == 0:
        return CoordinatePermutation.reversal(n_steps)
    if kind == 1:
        return CoordinatePermutation.cyclic(n_steps, 1 + int(rng.integers(0, n_steps)))
    return CoordinatePermutation(rng.permutation(n_steps + 1))


def test_criterion_01_exact_oracle_randomized_chains():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240817)
    worst_ratio, worst_mgf, worst_int = 0.0, 0.0, 0.0
    for _ in range(25):
        n_states = int(rng.integers(2, 4))
        n_steps = int(rng.integers(1, 5))
        f = _random_chain(rng, n_states, n_steps)
        g = _random_chain(rng, n_states, n_steps)
        r = exact_verify(f, g, _random_sigma(rng, n_steps), lam_grid=LAM_GRID)
        worst_ratio = max(worst_ratio, r.ratio_max_rel_err)
        worst_mgf = max(worst_mgf, r.mgf_max_rel_err)
        worst_int = max(worst_int, abs(r.integral_ft - 1.0))
        assert r.all_ok
    dt = time.perf_counter() - t0
    ok = worst_ratio < 1e-10 and worst_mgf < 1e-12 and worst_int < 1e-12 and dt < 10.0
    _report(
        1,
        ok,
        f"25 chains, worst ratio err {worst_ratio:.2e}, worst mgf err {worst_mgf:.2e}, "
        f"worst |integral-1| {worst_int:.2e}, {dt:.2f}s",
    )
    assert ok


def test_criterion_02_noninvolutive_generality(driven, driven_bc2, big_ensembles):
    # exact side: non-self-inverse coordinate permutations
    rng = np.random.default_rng(7)
    worst = 0.0
    for n_steps in (2, 3, 4):
        sigma = CoordinatePermutation.cyclic(n_steps, 1)
        assert not sigma.is_involution
        f = _random_chain(rng, 3, n_steps)
        g = _random_chain(rng, 3, n_steps)
        r = exact_verify(f, g, sigma, lam_grid=LAM_GRID)
        assert r.all_ok
        worst = max(worst, r.ratio_max_rel_err)
    # Monte Carlo side: the criterion 3-4 checks under a noninvolutive
    # path transform (holding-time cyclic shift) on the driven chain
    P, _ = driven
    phi = HoldingPermutation(cyclic_family(1))
    assert not phi.is_involution
    pair = (big_ensembles["p"], big_ensembles["q_bc2"])
    r_int = integral_ft_check(P, driven_bc2, phi, n=N_BIG, seed=ACCEPT_SEED, ensembles=pair)
    grid = estimate_mgf_pair(
        P, driven_bc2, phi, LAM_GRID, n=N_BIG, seed=ACCEPT_SEED, ensembles=pair
    )
    ok = r_int.passed and bool(np.all(grid.agree))
    _report(
        2,
        ok,
        f"exact worst ratio err {worst:.2e}; cyclic-transform integral "
        f"{r_int.estimate:.5f} +- {r_int.se:.5f}, mgf agree {int(grid.agree.sum())}/5",
    )
    assert ok


def test_criterion_03_integral_ft_driven_chain(driven, driven_bc2, big_ensembles):
    t0 = time.perf_counter()
    P, _ = driven
    pair = (big_ensembles["p"], big_ensembles["q_bc2"])
    r = integral_ft_check(P, driven_bc2, TimeReversal(), n=N_BIG, seed=ACCEPT_SEED, ensembles=pair)
    dt = time.perf_counter() - t0 + big_ensembles["build_seconds"]
    ok = r.passed and dt < 60.0
    _report(
        3,
        ok,
        f"|{r.estimate:.5f} - 1| = {abs(r.estimate - 1.0):.5f} vs 3 SE = {3 * r.se:.5f}, "
        f"{dt:.1f}s including sampling",
    )
    assert ok


def test_criterion_04_mgf_symmetry_grid(driven, driven_bc2, big_ensembles):
    P, _ = driven
    pair = (big_ensembles["p"], big_ensembles["q_bc2"])
    g = estimate_mgf_pair(P, driven_bc2, TimeReversal(), LAM_GRID, n=N_BIG, seed=ACCEPT_SEED, ensembles=pair)
    gaps = np.abs(g.lhs - g.rhs)
    ok = bool(np.all(g.agree)) and g.lhs[-1] == 1.0 and g.rhs[0] == 1.0
    detail = ", ".join(
        f"lam={lam:+.2f}: |{l:.4f}-{r:.4f}|={d:.4f}"
        for lam, l, r, d in zip(g.lambdas, g.lhs, g.rhs, gaps)
    )
    _report(4, ok, detail + f"; endpoints exact: {g.lhs[-1] == 1.0 and g.rhs[0] == 1.0}")
    assert ok


def test_criterion_05_distributional_symmetry(driven, driven_bc1, driven_bc2, big_ensembles):
    P, _ = driven
    ent = distributional_test(
        P, driven_bc1, TimeReversal(), functional="entropy", n=N_BIG, seed=ACCEPT_SEED,
        ensembles=(big_ensembles["p"], big_ensembles["q_bc1"]),
    )
    wrk = distributional_test(
        P, driven_bc2, TimeReversal(), functional="work", n=N_BIG, seed=ACCEPT_SEED,
        ensembles=(big_ensembles["p"], big_ensembles["q_bc2"]),
    )
    ok = (
        ent.passed and wrk.passed
        and ent.frac_within >= 0.95 and wrk.frac_within >= 0.95
    )
    _report(
        5,
        ok,
        f"entropy: {ent.frac_within:.2%} of {int(ent.scored.sum())} bins within 3 SE; "
        f"work: {wrk.frac_within:.2%} of {int(wrk.scored.sum())} bins",
    )
    assert ok


def test_criterion_06_heat_fails_where_work_passes(driven, driven_bc2, big_ensembles):
    P, _ = driven
    pair = (big_ensembles["p"], big_ensembles["q_bc2"])
    heat = distributional_test(
        P, driven_bc2, TimeReversal(), functional="heat", n=N_BIG, seed=ACCEPT_SEED, ensembles=pair
    )
    work = distributional_test(
        P, driven_bc2, TimeReversal(), functional="work", n=N_BIG, seed=ACCEPT_SEED, ensembles=pair
    )
    ok = (
        (not heat.passed) and (not heat.inconclusive) and heat.frac_within < 0.95
        and work.passed
    )
    _report(
        6,
        ok,
        f"heat: only {heat.frac_within:.2%} of {int(heat.scored.sum())} bins within 3 SE "
        f"(fails as it must); work on the same trajectories: {work.frac_within:.2%} (passes)",
    )
    assert ok


def test_criterion_07_constant_bias_free_energy_bounds():
    t0 = time.perf_counter()
    b = BiasSpec.constant(2.0)
    rows = []
    for lam in (-1.0, -0.5, 0.0, 0.5, 1.0):
        r = bd_free_energy(b, lam, t=40.0)
        rows.append(r)
    dt = time.perf_counter() - t0
    # spot check the bound formulas at lam = -0.5 against their quoted values
    mid = rows[1]
    assert math.isclose(mid.lower_bound, -0.5286, abs_tol=5e-5)
    assert math.isclose(mid.upper_bound, -0.4226, abs_tol=5e-5)
    ok = all(r.reliable and r.inside for r in rows) and dt < 30.0
    detail = "; ".join(
        f"lam={r.lam:+.1f}: est {r.estimate:.6f} in ({r.lower_bound:.4f}, {r.upper_bound:.4f})"
        f" -> {'yes' if r.inside else 'NO'}"
        for r in rows
    )
    _report(7, ok, detail + f"; {dt:.2f}s")
    assert ok


def test_criterion_08_strong_bias_divergence_with_strip_tft():
    b = BiasSpec.strong()
    up = bd_divergence_scan(b, lam=0.25, t=1.0, n_list=(100, 200))
    down = bd_divergence_scan(b, lam=-0.5, t=1.0, n_list=(100, 200))
    growth = up.log_growth_factor(100, 200)
    strip = bd_tft_check(b, t=1.0, lam_grid=LAM_GRID, n=10**6, seed=3)
    ok = (
        up.diverged and not up.converged and growth > math.log(1e6)
        and down.converged and not down.diverged
        and strip.all_agree
    )
    _report(
        8,
        ok,
        f"lam=+0.25 diverged, partial-sum growth factor e^{growth:.0f} > 1e6; "
        f"lam=-0.5 converged; strip identity holds at all "
        f"{len(strip.lambdas)} points (finite fraction {strip.finite_fraction:.2f})",
    )
    assert ok


def test_criterion_09_trivial_physics_regressions():
    P, h = build_reversible(energies=(0.0, 0.5, 1.0))
    paths = sample_ensemble(P, 10**4, seed=ACCEPT_SEED)
    bc1 = backward_measure_bc1(P)
    bc2 = backward_measure_bc2(P, h)
    worst_ep = float(np.max(np.abs(score_batch(P, bc1, TimeReversal(), paths))))
    worst_all = float(np.max(np.abs(score_batch(P, bc2, TimeReversal(), paths))))
    # the scalar entry points agree with the batched scores
    assert abs(entropy_production(P, paths[0], backward=bc1).value) < 1e-10
    assert abs(dissipated_work(P, h, paths[0], backward=bc2).value) < 1e-10
    ok = worst_ep < 1e-10 and worst_all < 1e-10
    _report(
        9,
        ok,
        f"max |entropy production| {worst_ep:.2e}, max |dissipated work| {worst_all:.2e} "
        f"over 10^4 stationary reversible paths",
    )
    assert ok

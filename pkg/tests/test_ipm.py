import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commflow import ipm, numerics, oracle
from commflow.commsim import Channel, Party, RowPartition
from tests.generators import random_box_lp


def toy_lp(c=(1.0, 2.0), L=8):
    return ipm.DistributedLP([[1.0], [1.0]], [3.0], list(c), [0.0, 0.0], [2.0, 2.0], RowPartition.alternating(2), L=L)


def centered_start(lp, delta=1e-3):
    mod = ipm.build_modified_lp(lp, delta)
    return mod, ipm.StepConstants.practical(mod.lp.m, mod.lp.n)


# --- barrier ---------------------------------------------------------------


def test_barrier_midpoint():
    phi, d1, d2 = ipm.barrier(np.array([1.0]), 0.0, 2.0)
    assert (phi[0], d1[0], d2[0]) == (0.0, 0.0, 2.0)


def test_barrier_off_center():
    _, d1, d2 = ipm.barrier(np.array([0.5]), 0.0, 2.0)
    assert d1[0] == pytest.approx(-4 / 3)
    assert d2[0] == pytest.approx(4 + 4 / 9)


def test_barrier_domain():
    for x in (0.0, 2.0, 3.0):
        with pytest.raises(ipm.DomainError):
            ipm.barrier(np.array([x]), 0.0, 2.0)


def test_barrier_self_concordance_sanity():
    rng = np.random.default_rng(0)
    lo = rng.uniform(-10, 10, 1000)
    hi = lo + rng.uniform(1e-3, 10, 1000)
    x = lo + (hi - lo) * rng.uniform(1e-6, 1 - 1e-6, 1000)
    _, d1, d2 = ipm.barrier(x, lo, hi)
    assert np.all(d2 > 0)
    assert np.all(np.abs(d1) <= np.sqrt(d2) * (1 + 1e-12))


# --- potential -------------------------------------------------------------


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_potential_gradient_finite_differences(seed):
    rng = np.random.default_rng(seed)
    lam = 4.0
    y = rng.uniform(-20 / lam, 20 / lam, 6)
    grad, clamps = ipm.potential_gradient(y, lam)
    assert clamps == 0
    h = 1e-4
    for i in range(len(y)):
        # the other terms are constant in y_i; leaving them out avoids cancellation
        fd = (ipm.potential(y[i : i + 1] + h, lam) - ipm.potential(y[i : i + 1] - h, lam)) / (2 * h)
        assert fd == pytest.approx(grad[i], rel=1e-5, abs=1e-6)


def test_gradient_zero_at_center():
    grad, _ = ipm.potential_gradient(np.zeros(4), 4.0)
    assert not grad.any()


def test_gradient_clamp_counted():
    _, clamps = ipm.potential_gradient(np.array([100.0, 0.0]), 1.0)
    assert clamps == 1


# --- constants and schedule ------------------------------------------------


def test_theoretical_constants_relations():
    k = ipm.StepConstants.theoretical(100, 10)
    alpha = 1 / (4 * math.log(40))
    assert k.alpha == pytest.approx(alpha)
    assert k.eps == pytest.approx(alpha / 100)
    assert k.lam == pytest.approx(100 * math.log(100 * 100 / k.eps**2) / k.eps)
    assert k.gamma == pytest.approx(k.eps / (100 * k.lam))
    assert k.r == pytest.approx(k.eps * k.gamma / (k.C_norm * math.sqrt(10)))
    assert k.conforming
    assert not ipm.StepConstants.practical(100, 10).conforming


def test_iteration_count_examples():
    assert ipm.iteration_count(1.0, 1.0, 0.01) == 0
    assert ipm.iteration_count(math.e, 1.0, 0.01) == 100
    assert ipm.iteration_count(math.e, 1.0, 0.01) == math.ceil(1 / -math.log(0.99))


def test_path_following_zero_iterations_returns_input():
    mod, k = centered_start(random_box_lp(1))
    out = ipm.path_following(mod.lp, mod.initial, mod.mu_init, k)
    assert out is mod.initial
    assert out.info["iterations"] == 0


def test_mu_schedule_exact():
    mod, k = centered_start(random_box_lp(2))
    mu_final = mod.mu_init * (1 - k.r) ** 5
    out = ipm.path_following(mod.lp, mod.initial, mu_final, k)
    assert out.info["iterations"] == 5
    assert out.mu == mod.mu_init * (1 - k.r) ** 5


# --- modified LP -----------------------------------------------------------


def test_modified_lp_toy():
    mod = ipm.build_modified_lp(toy_lp(), pad_aux_box=True)
    assert mod.xi == 2.0
    assert mod.beta == 0.5
    assert mod.initial.x.tolist() == [1.0, 1.0, 2.0]
    assert mod.lp.l[2] == -2.0 and mod.lp.u[2] == 6.0
    assert mod.lp.A[2].tolist() == [0.5]
    assert mod.lp.owners.owners[2] is Party.ALICE


def test_modified_lp_default_aux_box():
    mod = ipm.build_modified_lp(toy_lp())
    assert (mod.lp.l[2], mod.lp.u[2]) == (0.0, 4.0)


def test_modified_lp_beta_zero_shortcut():
    lp = ipm.DistributedLP([[1.0], [1.0]], [2.0], [1.0, 1.0], [0.0, 0.0], [2.0, 2.0])
    mod = ipm.build_modified_lp(lp)
    assert mod.beta == 0.0 and mod.n_aux == 0 and mod.lp is lp


def test_modified_lp_degenerate_box():
    lp = ipm.DistributedLP([[1.0]], [1.0], [1.0], [1.0], [1.0])
    with pytest.raises(ipm.DegenerateBoxError):
        ipm.build_modified_lp(lp)


def test_modified_lp_mu_init():
    lp = toy_lp()
    mod = ipm.build_modified_lp(lp, delta=1e-3)
    dp = 1e-3 / (10 * 2 * 2.0**16)
    assert mod.delta_prime == dp
    assert mod.mu_init == pytest.approx(8 * 2 * 3 * 2 / (0.25 * dp))


def test_modified_lp_initial_point_is_centered():
    for seed in range(10):
        mod, k = centered_start(random_box_lp(seed))
        assert ipm.check_centered(mod.lp, mod.initial, constants=k).is_centered


# --- check_centered --------------------------------------------------------


def test_check_centered_exact_center():
    lp = ipm.DistributedLP([[1.0], [1.0]], [2.0], [0.0, 0.0], [0.0, 0.0], [2.0, 2.0])
    k = ipm.StepConstants.practical(2, 1)
    x = np.array([1.0, 1.0])
    triple = ipm.CenteredTriple(x, np.zeros(2), 1.0)
    rep = ipm.check_centered(lp, triple, constants=k)
    assert rep.centrality_norm == 0 and rep.dual_residual == 0 and rep.primal_residual_weighted == 0
    assert rep.is_centered


def test_check_centered_perturbation_is_continuous():
    mod, k = centered_start(random_box_lp(3))
    base = ipm.check_centered(mod.lp, mod.initial, constants=k)
    x = mod.initial.x.copy()
    x[0] += 2.0**-16
    moved = ipm.check_centered(mod.lp, ipm.CenteredTriple(x, mod.initial.s, mod.initial.mu), constants=k)
    assert abs(moved.centrality_norm - base.centrality_norm) < 1e-3
    assert moved.primal_residual_weighted < 1e-2


# --- sampling --------------------------------------------------------------


def test_identity_sampling():
    k = ipm.StepConstants.practical(10, 2)
    R = ipm.make_sampling_matrix(np.ones(10), np.full(10, 0.2), k)
    assert R.tolist() == [1.0] * 10


def test_bernoulli_capped_is_identity():
    k = ipm.StepConstants.practical(10, 2)
    R = ipm.make_sampling_matrix(np.ones(10), np.ones(10), k, "bernoulli", np.random.default_rng(0))
    assert R.tolist() == [1.0] * 10


def test_bernoulli_monte_carlo_axioms():
    k = ipm.StepConstants.practical(4, 1)
    dr = np.array([0.02, 0.03, 0.04, 0.05])
    sigma = np.zeros(4)
    p = ipm.bernoulli_probabilities(dr, sigma, k)
    assert np.all((p > 0) & (p < 1))
    rng = np.random.default_rng(0)
    draws = np.array([ipm.make_sampling_matrix(dr, sigma, k, "bernoulli", rng) for _ in range(10_000)])
    se = np.sqrt((1 / p - 1) / len(draws))
    assert np.all(np.abs(draws.mean(axis=0) - 1) <= 3 * se)
    var = (draws * dr).var(axis=0)
    assert np.all(var <= k.gamma * np.abs(dr) / k.C_valid**2)


# --- steps -----------------------------------------------------------------


def test_step_too_large():
    mod, k = centered_start(random_box_lp(4))
    with pytest.raises(ipm.StepTooLargeError):
        ipm.short_step(mod.lp, mod.initial, mod.mu_init * (1 - 2 * k.r), k)


def test_step_requires_centered_start():
    mod, k = centered_start(random_box_lp(4))
    bad = ipm.CenteredTriple(mod.initial.x, mod.initial.s + 1e3 * mod.mu_init, mod.mu_init)
    with pytest.raises(ipm.NotCenteredError) as info:
        ipm.short_step(mod.lp, bad, mod.mu_init * (1 - k.r), k)
    assert info.value.report is not None


def test_two_party_message_count():
    lp = random_box_lp(5, n=3, m=12)
    mod, k = centered_start(lp)
    ch = Channel(32)
    ipm.short_step(mod.lp, mod.initial, mod.mu_init * (1 - k.r), k, "two_party", ch)
    vec = [e for e in ch.transcript.events if e.phase in ("v1", "v2", "u1", "u2")]
    assert sum(e.elements for e in vec) == 8 * mod.lp.n
    assert any(e.phase == "sketch" for e in ch.transcript.events)


def test_mode_equivalence_at_l52():
    for seed in range(3):
        mod, k = centered_start(random_box_lp(10 + seed))
        mu_final = mod.mu_init * (1 - k.r) ** 10
        seq = ipm.path_following(mod.lp, mod.initial, mu_final, k, "sequential", rng=np.random.default_rng(0))
        two = ipm.path_following(mod.lp, mod.initial, mu_final, k, "two_party", Channel(52), rng=np.random.default_rng(0))
        scale = max(1.0, float(np.max(np.abs(seq.x))))
        assert np.max(np.abs(seq.x - two.x)) <= 1e-6 * scale


def test_iterates_stay_in_box_and_dual_feasible():
    lp = random_box_lp(6)
    mod, k = centered_start(lp)
    mu_final = mod.mu_init * (1 - k.r) ** 30
    t = mod.initial
    for i in range(30):
        t = ipm.short_step(mod.lp, t, mod.mu_init * (1 - k.r) ** (i + 1), k)
        assert np.all(t.x > mod.lp.l) and np.all(t.x < mod.lp.u)
        rep = ipm.check_centered(mod.lp, t, constants=k)
        assert rep.dual_ok
    assert t.mu == pytest.approx(mu_final)


# --- final point -----------------------------------------------------------


def test_extract_final_feasible_point_needs_no_correction():
    lp = ipm.DistributedLP([[1.0], [1.0]], [2.0], [1.0, 1.0], [0.0, 0.0], [2.0, 2.0])
    t = ipm.CenteredTriple(np.array([1.0, 1.0]), np.ones(2), 1.0)
    fp = ipm.extract_final(lp, t)
    assert fp.corrections == 0 and fp.x.tolist() == [1.0, 1.0]


def test_extract_final_reports_residual():
    lp = ipm.DistributedLP([[1.0], [1.0]], [3.0], [1.0, 1.0], [0.0, 0.0], [2.0, 2.0])
    t = ipm.CenteredTriple(np.array([1.0, 1.0]), np.ones(2), 1.0)
    with pytest.raises(ipm.ResidualError):
        ipm.extract_final(lp, t, max_corrections=0)


def test_toy_lp_matches_oracle():
    lp = toy_lp()
    # oracle: endpoints of the segment x1 + x2 = 3 inside [0, 2]^2
    assert oracle.oracle_lp(lp).optimum == 4
    sol = ipm.solve_lp(lp, 1e-3)
    assert sol.primal_residual_inf <= 1e-3
    assert sol.objective <= 4 + 1e-3


def test_solve_lp_two_party_transcript():
    ch = Channel(32, seed=1)
    sol = ipm.solve_lp(random_box_lp(7), 1e-3, mode="two_party", channel=ch)
    assert sol.primal_residual_inf <= 1e-3
    assert sol.transcript_summary["total_bits"] == ch.transcript.total_bits > 0
    assert set(sol.to_dict()) == {"x", "objective", "primal_residual_inf", "iterations", "transcript_summary"}

"""Samplers, posterior updates, exchangeability, and reproducibility."""

import numpy as np
import pytest

from qndsim.probes import BinaryPhase, GaussianReadout, bind_extension
from qndsim.spectral import (
    StateKernel,
    build_spectral_model,
    diagonal_state,
    pure_state,
)
from qndsim.trajectories import (
    Trajectory,
    definetti_sample,
    exact_tuple_distribution,
    log_prior_weights,
    posterior_kernel,
    posterior_snapshot,
    posterior_weights,
    sample_ensemble,
    sequential_sample,
    trajectory_rng,
)

SEED = 20260810


def _two_atoms(w0=0.3, w1=0.7):
    model = build_spectral_model(atoms=[(0.0, w0), (1.0, w1)])
    probe = bind_extension(BinaryPhase.embedded(0.0, 1.0), model)
    state = diagonal_state(model, np.array([w0, w1]))
    return model, probe, state


def _gaussian_setup(n=100):
    model = build_spectral_model(intervals=[(0.0, 1.0)], nodes_per_interval=n)
    probe = bind_extension(GaussianReadout(sigma=1.0), model)
    state = pure_state(model, lambda nu: np.ones_like(nu))
    return model, probe, state


# ---------------------------------------------------------------------------
# mixture sampler

def test_point_mass_hidden_value_is_constant():
    model = build_spectral_model(atoms=[(0.7, 1.0)])
    probe = bind_extension(BinaryPhase.embedded(0.0, 1.0), model)
    state = diagonal_state(model, np.array([1.0]))
    for i in range(5):
        traj = definetti_sample(state, probe, 3, trajectory_rng(SEED, i))
        assert traj.hidden_nu == 0.7


def test_hidden_value_frequencies():
    _, probe, state = _two_atoms()
    hits = 0
    m = 2000
    for i in range(m):
        traj = definetti_sample(state, probe, 1, trajectory_rng(SEED, i))
        hits += traj.hidden_nu == 1.0
    assert abs(hits / m - 0.7) <= 3.0 * np.sqrt(0.3 * 0.7 / m)


def test_outcome_mean_at_fixed_hidden_value():
    _, probe, state = _gaussian_setup()
    traj = definetti_sample(
        state, probe, 10_000, trajectory_rng(SEED, 0), hidden_nu=0.37
    )
    assert abs(traj.outcomes.mean() - 0.37) <= 3.0 / np.sqrt(10_000)


def test_degenerate_spectral_weights_raise():
    model = build_spectral_model(atoms=[(0.0, 0.5), (1.0, 0.5)])
    values = np.zeros((2, 2, 1, 1), dtype=complex)
    state = StateKernel(values, model)
    with pytest.raises(ValueError):
        log_prior_weights(state)


# ---------------------------------------------------------------------------
# sampler equivalence (exchangeability made literal)

def test_exact_laws_agree_for_all_short_tuples():
    _, probe, state = _two_atoms(0.5, 0.5)
    for k in (1, 2, 3):
        d_mix = exact_tuple_distribution(state, probe, k, "de-finetti")
        d_seq = exact_tuple_distribution(state, probe, k, "sequential")
        assert abs(sum(d_mix.values()) - 1.0) < 1e-12
        for key in d_mix:
            assert abs(d_mix[key] - d_seq[key]) < 1e-10


def test_exact_law_against_hand_rolled_chain_rule():
    model, probe, state = _two_atoms(0.4, 0.6)
    f = probe.density(np.array([0.0, 1.0])[:, None], model.nodes[None, :])  # (2, 2)
    prior = np.array([0.4, 0.6])
    # two-step chain rule written out longhand
    for o1 in (0, 1):
        p1 = prior @ f[o1]
        w = prior * f[o1] / p1
        for o2 in (0, 1):
            expected = p1 * (w @ f[o2])
            got = exact_tuple_distribution(state, probe, 2, "sequential")[
                (float(o1), float(o2))
            ]
            assert got == pytest.approx(expected, abs=1e-14)


def test_point_mass_samplers_share_one_law():
    model = build_spectral_model(atoms=[(0.6, 1.0)])
    probe = bind_extension(BinaryPhase.embedded(0.0, 1.0), model)
    state = diagonal_state(model, np.array([1.0]))
    d_mix = exact_tuple_distribution(state, probe, 3, "de-finetti")
    d_seq = exact_tuple_distribution(state, probe, 3, "sequential")
    for key in d_mix:
        assert abs(d_mix[key] - d_seq[key]) < 1e-14


def test_first_outcome_marginal():
    model, probe, state = _two_atoms(0.25, 0.75)
    f = probe.density(np.array([0.0])[:, None], model.nodes[None, :])[0]
    target = float(np.array([0.25, 0.75]) @ f)
    m = 20_000
    hits = 0
    for i in range(m):
        traj = sequential_sample(state, probe, 1, trajectory_rng(SEED, i))
        hits += traj.outcomes[0] == 0.0
    assert abs(hits / m - target) <= 4.0 * np.sqrt(target * (1 - target) / m)


# ---------------------------------------------------------------------------
# posterior updates

def test_posterior_weights_at_zero_steps():
    _, probe, state = _two_atoms()
    traj = definetti_sample(state, probe, 5, trajectory_rng(SEED, 0))
    w = posterior_weights(state, traj, 0)
    assert np.allclose(w.values, [0.3, 0.7], atol=1e-14)


def test_single_step_bayes_ratio():
    model, probe, state = _two_atoms(0.3, 0.7)
    traj = definetti_sample(state, probe, 1, trajectory_rng(SEED, 1))
    xi = traj.outcomes[0]
    f = probe.density(np.array([xi])[:, None], model.nodes[None, :])[0]
    w = posterior_weights(state, traj, 1)
    expected_ratio = (0.7 / 0.3) * (f[1] / f[0])
    assert w.values[1] / w.values[0] == pytest.approx(expected_ratio, rel=1e-12)


def test_iterative_updates_match_batch_formula():
    model, probe, state = _gaussian_setup(60)
    traj = definetti_sample(state, probe, 50, trajectory_rng(SEED, 2))
    # iterate one-step Bayes updates by hand in plain probability space
    w = np.exp(log_prior_weights(state))
    for xi in traj.outcomes:
        f = probe.density(np.array([xi])[:, None], model.nodes[None, :])[0]
        w = w * f
        w = w / w.sum()
    batch = posterior_weights(state, traj, 50)
    assert np.max(np.abs(w - batch.values)) < 1e-10


def test_posterior_weights_sum_to_one_deep():
    _, probe, state = _gaussian_setup(60)
    traj = definetti_sample(state, probe, 10_000, trajectory_rng(SEED, 3))
    w = posterior_weights(state, traj, 10_000)
    assert abs(w.values.sum() - 1.0) < 1e-12


def test_posterior_kernel_at_zero_is_initial():
    _, probe, state = _gaussian_setup(30)
    traj = definetti_sample(state, probe, 4, trajectory_rng(SEED, 4))
    k0 = posterior_kernel(state, traj, 0)
    assert np.allclose(k0.values, state.values, atol=1e-14)


def test_posterior_kernel_diagonal_matches_weights():
    model, probe, state = _gaussian_setup(40)
    traj = definetti_sample(state, probe, 200, trajectory_rng(SEED, 5))
    kern = posterior_kernel(state, traj, 200)
    diag = model.mass * kern.block_traces()
    w = posterior_weights(state, traj, 200)
    assert np.max(np.abs(diag - w.values)) < 1e-10


def test_posterior_kernel_stays_rank_one():
    model, probe, state = _gaussian_setup(40)
    traj = definetti_sample(state, probe, 500, trajectory_rng(SEED, 6))
    kern = posterior_kernel(state, traj, 500)
    svals = np.linalg.svd(kern.weighted_matrix(), compute_uv=False)
    assert svals[0] == pytest.approx(1.0, abs=1e-10)
    assert svals[1] < 1e-8


def test_append_increments_exactly():
    model, probe, state = _gaussian_setup(25)
    traj = definetti_sample(state, probe, 10, trajectory_rng(SEED, 7))
    increment = probe.loglik_node_sums(model.nodes, np.asarray([0.42]))
    appended = traj.append(0.42, probe, model.nodes)
    assert np.array_equal(appended.loglik_sums, traj.loglik_sums + increment)
    assert len(appended) == 11


def test_martingale_property_binary_exact():
    model, probe, state = _two_atoms(0.35, 0.65)
    traj = definetti_sample(state, probe, 7, trajectory_rng(SEED, 8))
    w = posterior_weights(state, traj, 7).values
    f = probe.density(np.array([0.0, 1.0])[:, None], model.nodes[None, :])
    avg = np.zeros_like(w)
    for o in (0, 1):
        pred = float(w @ f[o])
        avg += pred * (w * f[o] / pred)
    assert np.max(np.abs(avg - w)) < 1e-12


def test_martingale_property_gaussian_quadrature():
    model, probe, state = _gaussian_setup(30)
    traj = definetti_sample(state, probe, 5, trajectory_rng(SEED, 9))
    w = posterior_weights(state, traj, 5).values
    # average the one-step update over outcomes with a dense rule
    xs, wq = np.polynomial.legendre.leggauss(96)
    lo, hi = -9.0, 10.0
    xq = 0.5 * (hi + lo) + 0.5 * (hi - lo) * xs
    qw = 0.5 * (hi - lo) * wq
    f = probe.density(xq[:, None], model.nodes[None, :])  # (Q, N)
    pred = f @ w
    avg = ((qw * pred)[:, None] * (w[None, :] * f / pred[:, None])).sum(axis=0)
    assert np.max(np.abs(avg - w)) < 1e-8


def test_purification_onto_hidden_atom():
    model, probe, state = _two_atoms(0.5, 0.5)
    weights = []
    for i in range(200):
        traj = definetti_sample(state, probe, 500, trajectory_rng(SEED, i))
        node = int(np.argmin(np.abs(model.nodes - traj.hidden_nu)))
        weights.append(posterior_weights(state, traj, 500).values[node])
    assert np.median(weights) > 0.99


# ---------------------------------------------------------------------------
# reproducibility and bookkeeping

def test_identical_seeds_reproduce_bitwise():
    _, probe, state = _gaussian_setup(20)
    a = definetti_sample(state, probe, 100, trajectory_rng(123, 4), checkpoints=[50])
    b = definetti_sample(state, probe, 100, trajectory_rng(123, 4), checkpoints=[50])
    assert np.array_equal(a.outcomes, b.outcomes)
    assert np.array_equal(a.loglik_sums, b.loglik_sums)
    assert np.array_equal(a.checkpoint_sums[50], b.checkpoint_sums[50])
    c = definetti_sample(state, probe, 100, trajectory_rng(123, 5))
    assert not np.array_equal(a.outcomes, c.outcomes)


def test_sequential_reproducible_and_checkpointed():
    _, probe, state = _two_atoms()
    a = sequential_sample(state, probe, 40, trajectory_rng(9, 0), checkpoints=[0, 20])
    b = sequential_sample(state, probe, 40, trajectory_rng(9, 0), checkpoints=[0, 20])
    assert np.array_equal(a.outcomes, b.outcomes)
    assert a.hidden_nu is None
    assert np.array_equal(a.checkpoint_sums[20], b.checkpoint_sums[20])
    assert np.array_equal(a.checkpoint_sums[0], np.zeros(2))


def test_ensemble_indices_are_stable_under_splitting():
    _, probe, state = _two_atoms()
    full = sample_ensemble(state, probe, 20, 6, SEED)
    part = sample_ensemble(state, probe, 20, 6, SEED, indices=[2, 3])
    assert np.array_equal(full[2].outcomes, part[0].outcomes)
    assert np.array_equal(full[3].outcomes, part[1].outcomes)
    assert full[2].seed.index == 2 and full[2].seed.master == SEED


def test_loglik_at_contract():
    model, probe, state = _gaussian_setup(15)
    traj = definetti_sample(
        state, probe, 30, trajectory_rng(SEED, 11), checkpoints=[10]
    )
    assert np.array_equal(traj.loglik_at(10), traj.checkpoint_sums[10])
    assert np.array_equal(traj.loglik_at(0), np.zeros(model.size))
    recomputed = traj.loglik_at(17, probe, model.nodes)
    direct = probe.loglik_node_sums(model.nodes, traj.outcomes[:17])
    assert np.array_equal(recomputed, direct)
    with pytest.raises(ValueError):
        traj.loglik_at(31)
    with pytest.raises(ValueError):
        traj.loglik_at(17)  # no checkpoint, no probe to recompute with


def test_exact_enumeration_guards():
    model, probe, state = _gaussian_setup(10)
    with pytest.raises(ValueError):
        exact_tuple_distribution(state, probe, 2)
    _, bprobe, bstate = _two_atoms()
    with pytest.raises(ValueError):
        exact_tuple_distribution(bstate, bprobe, 64)


def test_posterior_snapshot():
    _, probe, state = _two_atoms()
    traj = definetti_sample(state, probe, 12, trajectory_rng(SEED, 12))
    snap = posterior_snapshot(state, traj, 12, with_kernel=True)
    assert snap.step == 12
    assert abs(snap.weights.values.sum() - 1.0) < 1e-12
    assert abs(snap.kernel.trace() - 1.0) < 1e-12

"""Trajectory engine: outcome records and posterior evolution over the grid.

Two samplers generate outcome sequences with provably identical laws:

* ``definetti_sample`` draws a hidden value of the observable from the
  initial spectral weights and then i.i.d. outcomes from its law — the
  mixture form of the outcome process.
* ``sequential_sample`` draws each outcome from the one-step predictive
  density given the running posterior — the chain-rule form.

Both maintain the running per-node log-likelihood sums
``L_k[i] = sum_{j<=k} log f(xi_j | nu_i)``, which is all the posterior
needs: weights are ``prior * exp(L_k)`` renormalized, and the posterior
kernel multiplies the initial kernel by ``exp(L_k/2)`` on both sides.
All weight arithmetic runs in log space with running-max subtraction, so
sequences of length 1e4 and beyond are safe from underflow.

Reproducibility: per-trajectory generators are spawned from a master seed
as ``default_rng(SeedSequence(master, spawn_key=(index,)))``; identical
seeds give bitwise-identical trajectories regardless of scheduling.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from .spectral import SpectralWeights, StateKernel

__all__ = [
    "SeedRecord",
    "Trajectory",
    "PosteriorSnapshot",
    "trajectory_rng",
    "definetti_sample",
    "sequential_sample",
    "sample_ensemble",
    "log_prior_weights",
    "posterior_weights",
    "posterior_kernel",
    "posterior_snapshot",
    "exact_tuple_distribution",
]


@dataclass(frozen=True)
class SeedRecord:
    """Provenance of a trajectory's random stream."""

    master: int
    index: int

    def to_dict(self) -> dict:
        return {"master": self.master, "index": self.index}


def trajectory_rng(master: int, index: int) -> np.random.Generator:
    """The documented splitting rule: child ``index`` of the master seed."""
    return np.random.default_rng(np.random.SeedSequence(master, spawn_key=(index,)))


@dataclass
class Trajectory:
    """A recorded outcome sequence with running log-likelihood sums.

    ``loglik_sums[i]`` is the total log-likelihood of the sequence at grid
    node ``i``; ``checkpoint_sums`` holds snapshots at requested steps.
    ``hidden_nu`` is set only by the mixture sampler.
    """

    outcomes: np.ndarray
    loglik_sums: np.ndarray
    checkpoint_sums: dict[int, np.ndarray] = field(default_factory=dict)
    hidden_nu: float | None = None
    seed: SeedRecord | None = None

    def __len__(self) -> int:
        return int(self.outcomes.size)

    def loglik_at(self, k: int, probe=None, nodes=None) -> np.ndarray:
        """Log-likelihood sums after the first k outcomes.

        Uses the stored checkpoint when available; otherwise recomputes
        from the retained outcomes, which requires the probe and grid.
        """
        if k > len(self):
            raise ValueError(f"k={k} exceeds trajectory length {len(self)}")
        if k == len(self):
            return self.loglik_sums
        if k in self.checkpoint_sums:
            return self.checkpoint_sums[k]
        if k == 0:
            return np.zeros_like(self.loglik_sums)
        if probe is None or nodes is None:
            raise ValueError(
                f"no checkpoint at k={k}; pass probe and nodes to recompute"
            )
        return probe.loglik_node_sums(nodes, self.outcomes[:k])

    def append(self, xi: float, probe, nodes) -> "Trajectory":
        """New trajectory with one more outcome; sums increment exactly."""
        increment = probe.loglik_node_sums(nodes, np.asarray([xi]))
        return Trajectory(
            outcomes=np.append(self.outcomes, xi),
            loglik_sums=self.loglik_sums + increment,
            checkpoint_sums=dict(self.checkpoint_sums),
            hidden_nu=self.hidden_nu,
            seed=self.seed,
        )


@dataclass(frozen=True)
class PosteriorSnapshot:
    """Posterior spectral weights (and optionally the kernel) at one step."""

    weights: SpectralWeights
    step: int
    kernel: StateKernel | None = None


def log_prior_weights(state: StateKernel) -> np.ndarray:
    """Log of the initial spectral weights; -inf where the prior vanishes."""
    prior = state.grid.mass * state.block_traces()
    prior = np.clip(prior, 0.0, None)
    total = prior.sum()
    if total <= 0:
        raise ValueError("state has degenerate spectral weights (all zero)")
    with np.errstate(divide="ignore"):
        return np.log(prior / total)


def _normalize_checkpoints(checkpoints: Iterable[int], k: int) -> list[int]:
    cps = sorted({int(c) for c in checkpoints if 0 <= int(c) <= k})
    return cps


def definetti_sample(
    state: StateKernel,
    probe,
    k: int,
    rng: np.random.Generator,
    checkpoints: Iterable[int] = (),
    hidden_nu: float | None = None,
    seed: SeedRecord | None = None,
) -> Trajectory:
    """Mixture sampler: hidden value first, then i.i.d. outcomes from its law.

    The hidden value is drawn from the initial spectral weights unless
    ``hidden_nu`` pins it (it need not be a grid node).  The returned
    trajectory records the hidden value.
    """
    grid = state.grid
    if hidden_nu is None:
        prior = np.exp(log_prior_weights(state))
        prior = prior / prior.sum()
        hidden_nu = float(grid.nodes[rng.choice(grid.nodes.size, p=prior)])
    outcomes = probe.sample(hidden_nu, int(k), rng)
    sums = np.zeros(grid.nodes.size)
    checkpoint_sums: dict[int, np.ndarray] = {}
    prev = 0
    for cp in _normalize_checkpoints(checkpoints, k):
        sums = sums + probe.loglik_node_sums(grid.nodes, outcomes[prev:cp])
        checkpoint_sums[cp] = sums
        prev = cp
    sums = sums + probe.loglik_node_sums(grid.nodes, outcomes[prev:])
    return Trajectory(
        outcomes=outcomes,
        loglik_sums=sums,
        checkpoint_sums=checkpoint_sums,
        hidden_nu=hidden_nu,
        seed=seed,
    )


def sequential_sample(
    state: StateKernel,
    probe,
    k: int,
    rng: np.random.Generator,
    checkpoints: Iterable[int] = (),
    seed: SeedRecord | None = None,
) -> Trajectory:
    """Chain-rule sampler: each outcome from the one-step predictive density.

    The predictive density is the posterior-weighted mixture of node laws;
    sampling draws a node from the current posterior, then an outcome from
    that node's law.  No hidden value is recorded.
    """
    grid = state.grid
    nodes = grid.nodes
    log_prior = log_prior_weights(state)
    sums = np.zeros(nodes.size)
    outcomes = np.empty(int(k))
    checkpoint_sums: dict[int, np.ndarray] = {}
    wanted = set(_normalize_checkpoints(checkpoints, k))
    if 0 in wanted:
        checkpoint_sums[0] = sums.copy()
    one = np.empty(1)
    for step in range(int(k)):
        logw = log_prior + sums
        w = np.exp(logw - logw.max())
        cdf = np.cumsum(w)
        node = int(np.searchsorted(cdf, rng.random() * cdf[-1]))
        xi = float(probe.sample(float(nodes[node]), 1, rng)[0])
        outcomes[step] = xi
        one[0] = xi
        sums = sums + probe.loglik_values(nodes, one)[0]
        if step + 1 in wanted:
            checkpoint_sums[step + 1] = sums.copy()
    return Trajectory(
        outcomes=outcomes,
        loglik_sums=sums,
        checkpoint_sums=checkpoint_sums,
        hidden_nu=None,
        seed=seed,
    )


def sample_ensemble(
    state: StateKernel,
    probe,
    k: int,
    size: int,
    master_seed: int,
    sampler: str = "de-finetti",
    checkpoints: Iterable[int] = (),
    hidden_nu: float | None = None,
    indices: Sequence[int] | None = None,
) -> list[Trajectory]:
    """Independent trajectories with per-index rng streams.

    ``indices`` selects which ensemble members to produce (all by default),
    so distributed callers can split the work without changing any stream.
    """
    if size < 1:
        raise ValueError("ensemble size must be at least 1")
    if indices is None:
        indices = range(size)
    out = []
    for i in indices:
        rng = trajectory_rng(master_seed, i)
        rec = SeedRecord(master_seed, i)
        if sampler == "de-finetti":
            out.append(
                definetti_sample(
                    state, probe, k, rng, checkpoints, hidden_nu=hidden_nu, seed=rec
                )
            )
        elif sampler == "sequential":
            out.append(sequential_sample(state, probe, k, rng, checkpoints, seed=rec))
        else:
            raise ValueError(f"unknown sampler: {sampler!r}")
    return out


def posterior_weights(state: StateKernel, trajectory: Trajectory, k: int, probe=None) -> SpectralWeights:
    """Spectral weights of the posterior after k outcomes (log-space)."""
    sums = trajectory.loglik_at(k, probe, state.grid.nodes)
    logw = log_prior_weights(state) + sums
    shift = logsumexp(logw)
    if not np.isfinite(shift):
        raise AssertionError("posterior weights underflowed despite max subtraction")
    w = np.exp(logw - shift)
    return SpectralWeights(values=w / w.sum(), grid=state.grid)


def posterior_kernel(state: StateKernel, trajectory: Trajectory, k: int, probe=None) -> StateKernel:
    """Posterior kernel after k outcomes.

    Multiplies the initial kernel by ``exp(L_k/2)`` on both sides and
    renormalizes by the discrete trace, all in log space.
    """
    sums = trajectory.loglik_at(k, probe, state.grid.nodes)
    shift = sums.max()
    half = np.exp(0.5 * (sums - shift))
    values = state.values * half[:, None, None, None] * half[None, :, None, None]
    scaled = StateKernel(values, state.grid)
    z = scaled.trace()
    if z <= 0:
        raise ValueError("posterior kernel has zero normalizer")
    return StateKernel(values / z, state.grid)


def posterior_snapshot(
    state: StateKernel,
    trajectory: Trajectory,
    k: int,
    probe=None,
    with_kernel: bool = False,
) -> PosteriorSnapshot:
    return PosteriorSnapshot(
        weights=posterior_weights(state, trajectory, k, probe),
        step=int(k),
        kernel=posterior_kernel(state, trajectory, k, probe) if with_kernel else None,
    )


def exact_tuple_distribution(
    state: StateKernel, probe, k: int, method: str = "de-finetti"
) -> dict[tuple[float, ...], float]:
    """Exact law of the first k outcomes for a finite outcome space.

    ``de-finetti`` enumerates the mixture form; ``sequential`` applies the
    chain rule with explicit Bayes updates.  The two must agree — this is
    exchangeability made literal, and the sampler-equivalence tests lean
    on it.
    """
    if not probe.outcome_space.finite:
        raise ValueError("exact enumeration needs a finite outcome space")
    values = np.asarray(probe.outcome_space.values, dtype=float)
    if values.size**k > 2_000_000:
        raise ValueError("outcome tuple space too large to enumerate")
    nodes = state.grid.nodes
    prior = np.exp(log_prior_weights(state))
    prior = prior / prior.sum()
    dens = probe.density(values[:, None], nodes[None, :])  # (O, N)
    out: dict[tuple[float, ...], float] = {}
    for combo in itertools.product(range(values.size), repeat=int(k)):
        if method == "de-finetti":
            prob = float(np.dot(prior, np.prod(dens[list(combo)], axis=0)))
        elif method == "sequential":
            w = prior.copy()
            prob = 1.0
            for o in combo:
                step_prob = float(np.dot(w, dens[o]))
                prob *= step_prob
                w = w * dens[o] / step_prob
            prob = float(prob)
        else:
            raise ValueError(f"unknown method: {method!r}")
        out[tuple(float(values[o]) for o in combo)] = prob
    return out

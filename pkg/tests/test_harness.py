"""Experiment orchestration: statistical tests, determinism, persistence."""

import json
from pathlib import Path

import numpy as np
import pytest
from scipy import stats
from scipy.special import ndtr

from qndsim.harness import (
    ConfigError,
    DEFAULT_SEED,
    ExperimentConfig,
    ValidationFailure,
    build_model,
    build_probe,
    build_state,
    chi_square_gof,
    git_blob_sha1,
    ks_test,
    load_trajectories,
    persist_trajectories,
    run_experiment,
    simulate_ensemble,
    uniform_lln_residual,
    validate_config,
)
from qndsim.trajectories import definetti_sample, trajectory_rng

SEED = 20260810


def _born_config(**overrides):
    base = {
        "kind": "born-frequency",
        "spectral": {"atoms": [[0.0, 0.3], [1.0, 0.7]]},
        "probe": {"kind": "binary-phase", "embed": {"source": [0.0, 1.0]}},
        "state": {"type": "diagonal", "weights": [0.3, 0.7]},
        "k_max": 60,
        "ensemble": 60,
        "seed": SEED,
        "region": [1.0],
    }
    base.update(overrides)
    return ExperimentConfig.from_dict(base)


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov

def test_ks_calibration_under_the_null():
    rng = np.random.default_rng(SEED)
    rejects = 0
    pvals = []
    for _ in range(500):
        result = ks_test(rng.standard_normal(2000), ndtr)
        pvals.append(result.pvalue)
        rejects += result.pvalue < 0.01
    # about 1% of 500 draws; a 3-sigma binomial band around 5
    assert rejects <= 13
    assert 0.4 < np.mean(pvals) < 0.6


def test_ks_degenerate_sample():
    samples = np.zeros(100)
    assert ks_test(samples, ndtr).statistic >= 0.5


def test_ks_power_against_shift():
    rng = np.random.default_rng(SEED)
    result = ks_test(rng.standard_normal(2000) + 1.0, ndtr)
    assert result.pvalue < 1e-6


def test_ks_needs_fifty_samples():
    with pytest.raises(ValueError):
        ks_test(np.zeros(49), ndtr)


def test_ks_agrees_with_scipy():
    rng = np.random.default_rng(SEED)
    samples = rng.standard_normal(1500)
    ours = ks_test(samples, ndtr)
    ref = stats.kstest(samples, "norm", mode="asymp")
    assert ours.statistic == pytest.approx(ref.statistic, abs=1e-12)
    assert ours.pvalue == pytest.approx(ref.pvalue, rel=1e-6, abs=1e-12)


def test_chi_square_on_exact_proportions():
    stat, p = chi_square_gof([250, 250, 250, 250], [0.25, 0.25, 0.25, 0.25])
    assert stat == 0.0 and p == 1.0


# ---------------------------------------------------------------------------
# uniform law of large numbers diagnostic

def test_uniform_lln_residual_shrinks():
    cfg = ExperimentConfig.from_dict(
        {
            "kind": "clt",
            "spectral": {
                "intervals": [[0.0, 1.0]],
                "h": {"name": "uniform"},
                "nodes_per_interval": 60,
            },
            "probe": {"kind": "gaussian-readout", "sigma": 1.0},
            "state": {"type": "pure", "psi": {"name": "flat"}},
            "k_max": 40_000,
            "checkpoints": [10_000, 40_000],
            "ensemble": 100,
            "seed": SEED,
            "hidden_nu": 0.5,
        }
    )
    model = build_model(cfg)
    state = build_state(model, cfg.state)
    probe = build_probe(cfg, model)
    trajs = simulate_ensemble(cfg)
    res = uniform_lln_residual(trajs, probe, 0.5, [0, 10_000, 40_000], model.nodes)
    baseline = res[:, 0]
    assert np.allclose(baseline, baseline[0])  # k=0 column is the sup |E|
    assert np.mean(res[:, 1] < 0.05) >= 0.95
    # the paired sups share their first ten thousand outcomes, so the
    # per-trajectory decrease rate sits near 0.8, not 1; the median halves
    assert np.mean(res[:, 2] < res[:, 1]) >= 0.70
    assert np.median(res[:, 2]) < 0.7 * np.median(res[:, 1])


# ---------------------------------------------------------------------------
# determinism, parallelism, persistence

def test_run_experiment_is_byte_deterministic(tmp_path):
    cfg = _born_config()
    run_experiment(cfg, out_dir=tmp_path / "a")
    run_experiment(cfg, out_dir=tmp_path / "b")
    for name in ("summary.json", "estimator_report.json", "tables/born_frequency.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_worker_count_does_not_change_results(tmp_path):
    cfg = _born_config(ensemble=30)
    one = simulate_ensemble(cfg, workers=1)
    two = simulate_ensemble(cfg, workers=2)
    for x, y in zip(one, two):
        assert np.array_equal(x.outcomes, y.outcomes)
        assert np.array_equal(x.loglik_sums, y.loglik_sums)
    a = run_experiment(cfg, out_dir=tmp_path / "w1", workers=1)
    b = run_experiment(cfg, out_dir=tmp_path / "w2", workers=2)
    assert (tmp_path / "w1" / "summary.json").read_bytes() == (
        tmp_path / "w2" / "summary.json"
    ).read_bytes()
    assert a.passed and b.passed


def test_trajectory_persistence_round_trip(tmp_path):
    cfg = _born_config(ensemble=8, k_max=30)
    trajs = simulate_ensemble(cfg)
    persist_trajectories(tmp_path, trajs, cfg)
    loaded = load_trajectories(tmp_path)
    assert len(loaded) == 8
    for orig, back in zip(trajs, loaded):
        assert np.array_equal(orig.outcomes, back.outcomes)
        assert np.array_equal(orig.loglik_sums, back.loglik_sums)
        assert orig.hidden_nu == back.hidden_nu
        assert orig.seed == back.seed


def test_replay_audit_matches_bundle(tmp_path):
    cfg = _born_config(ensemble=40, persist_trajectories=True)
    bundle = run_experiment(cfg, out_dir=tmp_path)
    loaded = load_trajectories(tmp_path)
    model = build_model(cfg)
    hits = 0
    mask = model.region_mask(cfg.region)
    for traj in loaded:
        hits += bool(mask[int(np.argmax(traj.loglik_sums))])
    assert hits / len(loaded) == bundle.report.consistency["frequency"]


def test_missing_trajectories_raise(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_trajectories(tmp_path)


# ---------------------------------------------------------------------------
# configuration and validation

def test_config_defaults_and_checkpoints():
    cfg = _born_config()
    assert cfg.checkpoints == (10, 30, 60)
    assert cfg.tolerances["ks_alpha"] == 0.01
    assert cfg.seed == SEED
    assert ExperimentConfig.from_dict(
        {
            "kind": "born-frequency",
            "spectral": {"atoms": [[0.0, 1.0]]},
            "probe": {"kind": "binary-phase", "embed": {"source": [0.0, 1.0]}},
            "state": {"type": "diagonal", "weights": [1.0]},
        }
    ).seed == DEFAULT_SEED


def test_config_rejects_bad_input():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"kind": "nope", "spectral": {}, "probe": {}, "state": {}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"kind": "clt"})
    with pytest.raises(ConfigError):
        _born_config(checkpoints=[10, 500])  # beyond k_max
    with pytest.raises(ConfigError):
        _born_config(typo=1)
    with pytest.raises(ConfigError):
        _born_config(ensemble=0)
    with pytest.raises(ConfigError):
        _born_config(sampler="bogus")


def test_config_hash_tracks_content():
    a, b = _born_config(), _born_config()
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != _born_config(seed=1).config_hash()


def test_git_blob_hash_matches_git_convention():
    # `echo -n '' | git hash-object --stdin` is the well-known empty blob
    assert git_blob_sha1(b"") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"


def test_validation_failure_aborts_run():
    cfg = ExperimentConfig.from_dict(
        {
            "kind": "born-frequency",
            "spectral": {
                "intervals": [[np.pi - 1.0, np.pi + 1.0]],
                "nodes_per_interval": 10,
            },
            "probe": {"kind": "binary-phase"},
            "state": {"type": "pure", "psi": {"name": "flat"}},
            "k_max": 10,
            "ensemble": 2,
            "region": [[np.pi - 0.5, np.pi]],
        }
    )
    with pytest.raises(ValidationFailure, match="identifiability"):
        run_experiment(cfg)


def test_validate_config_returns_both_reports():
    probe_report, state_report = validate_config(_born_config())
    assert probe_report.passed
    assert state_report.passed


def test_assumption_validation_experiment(tmp_path):
    cfg = ExperimentConfig.from_dict(
        {
            "kind": "assumption-validation",
            "spectral": {"intervals": [[0.0, 1.0]], "nodes_per_interval": 30},
            "probe": {"kind": "gaussian-readout", "sigma": 1.0},
            "state": {"type": "pure", "psi": {"name": "flat"}},
            "k_max": 5,
            "ensemble": 1,
            "seed": SEED,
        }
    )
    bundle = run_experiment(cfg, out_dir=tmp_path)
    assert bundle.passed
    names = {r.name for r in bundle.results}
    assert "assumption-normalization" in names
    assert "state-validity" in names
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["passed"] is True
    assert summary["config_hash"] == cfg.config_hash()

"""Experiment harness: declarative configs, statistical tests, report bundles.

An experiment is a JSON-compatible configuration naming a spectral model,
an initial state, a probe family, a sampler, an ensemble size, a master
seed, and the kind of statistical question being asked:

* ``born-frequency``: frequency of the limiting estimate in a region
  against the exact spectral probability,
* ``rate-convergence``: decay rate of posterior mass on an excluded region
  against the relative-entropy target,
* ``clt``: normality of standardized estimator residuals,
* ``kernel-convergence``: trace-norm approach of the rescaled posterior
  kernel to its Gaussian limit, gated by the Laplace-integral diagnostic,
* ``assumption-validation``: the probe and state validator suites.

Runs are deterministic given the master seed: per-trajectory streams come
from the documented splitting rule, results merge in ensemble order
regardless of worker count, and reports carry no timestamps, so identical
configs produce byte-identical bundles.
"""

from __future__ import annotations

import csv
import functools
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import kolmogorov, ndtr
from scipy.stats import chi2

from . import estimators as est
from .probes import (
    ProbeModel,
    bind_extension,
    probe_from_config,
    validate_probe,
)
from .spectral import (
    SpectralModel,
    StateKernel,
    diagonal_state,
    model_from_dict,
    pure_state,
    state_from_dict,
    validate_state,
)
from .trajectories import Trajectory, posterior_weights, sample_ensemble

__all__ = [
    "DEFAULT_SEED",
    "DEFAULT_CHECKPOINTS",
    "ExperimentConfig",
    "ConfigError",
    "ValidationFailure",
    "TestResult",
    "KsResult",
    "ReportBundle",
    "ks_test",
    "chi_square_gof",
    "uniform_lln_residual",
    "build_model",
    "build_state",
    "build_probe",
    "validate_config",
    "simulate_ensemble",
    "estimate_ensemble",
    "run_experiment",
    "persist_trajectories",
    "load_trajectories",
    "git_blob_sha1",
    "canonical_json",
]

DEFAULT_SEED = 1729  # documented constant; never derived from the clock
DEFAULT_CHECKPOINTS = (10, 30, 100, 300, 1000, 3000, 10000)

EXPERIMENT_KINDS = (
    "born-frequency",
    "rate-convergence",
    "clt",
    "kernel-convergence",
    "assumption-validation",
)

DEFAULT_TOLERANCES = {
    "born_ci_sigmas": 3.0,
    "rate_rel_tol": 0.10,
    "ks_alpha": 0.01,
    "clt_mean_sigmas": 3.0,
    "clt_var_tol": 0.1,
    "boundary_margin_stds": 5.0,
    "kernel_distance_final": 0.1,
    "laplace_rel_tol": 0.05,
}

DEFAULT_WINDOW = {"sigmas": 8.0, "nodes": 201, "min_sigmas": 2.0}


class ConfigError(ValueError):
    """Raised for malformed or inconsistent experiment configurations."""


class ValidationFailure(RuntimeError):
    """Raised when a run aborts because the probe fails its validators."""

    def __init__(self, report):
        super().__init__("probe failed assumption validation:\n" + report.summary())
        self.report = report


# ---------------------------------------------------------------------------
# configuration

@dataclass
class ExperimentConfig:
    kind: str
    spectral: dict
    probe: dict
    state: dict
    sampler: str = "de-finetti"
    k_max: int = 1000
    checkpoints: tuple[int, ...] = ()
    ensemble: int = 1
    seed: int = DEFAULT_SEED
    region: tuple = ()
    hidden_nu: float | None = None
    tolerances: dict = field(default_factory=dict)
    window: dict = field(default_factory=dict)
    persist_trajectories: bool = False

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind: {self.kind!r}")
        if self.sampler not in ("de-finetti", "sequential"):
            raise ConfigError(f"unknown sampler: {self.sampler!r}")
        if self.ensemble < 1:
            raise ConfigError("ensemble size must be at least 1")
        if self.k_max < 1:
            raise ConfigError("k_max must be at least 1")
        if not self.checkpoints:
            cps = [c for c in DEFAULT_CHECKPOINTS if c <= self.k_max]
            self.checkpoints = tuple(cps + ([self.k_max] if self.k_max not in cps else []))
        self.checkpoints = tuple(sorted({int(c) for c in self.checkpoints}))
        if self.checkpoints[-1] > self.k_max:
            raise ConfigError("checkpoints must not exceed k_max")
        self.region = tuple(
            tuple(c) if isinstance(c, (list, tuple)) else float(c) for c in self.region
        )
        self.tolerances = {**DEFAULT_TOLERANCES, **self.tolerances}
        self.window = {**DEFAULT_WINDOW, **self.window}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {"kind", "spectral", "probe", "state"} - set(d)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        d = dict(d)
        for key in ("checkpoints", "region"):
            if key in d:
                d[key] = tuple(
                    tuple(c) if isinstance(c, list) else c for c in d[key]
                )
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["checkpoints"] = list(self.checkpoints)
        d["region"] = [list(c) if isinstance(c, tuple) else c for c in self.region]
        return d

    def canonical_json(self) -> str:
        return canonical_json(self.to_dict())

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def canonical_json(tree) -> str:
    return json.dumps(tree, sort_keys=True, separators=(",", ":"))


def git_blob_sha1(data: bytes) -> str:
    """Content hash the way git hashes a blob."""
    h = hashlib.sha1()
    h.update(b"blob %d\0" % len(data))
    h.update(data)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# builders

def build_model(config: ExperimentConfig) -> SpectralModel:
    try:
        return model_from_dict(config.spectral)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad spectral declaration: {exc}") from exc


def _psi_from_spec(spec: dict) -> Callable[[np.ndarray], np.ndarray]:
    name = spec.get("name", "flat")
    if name == "flat":
        return lambda nu: np.ones_like(nu)
    if name == "exp":
        rate = float(spec.get("rate", 0.5))
        return lambda nu: np.exp(rate * nu)
    if name == "linear":
        a = float(spec.get("intercept", 1.0))
        b = float(spec.get("slope", 0.5))
        return lambda nu: a + b * nu
    if name == "cosine":
        amp = float(spec.get("amplitude", 0.5))
        freq = float(spec.get("frequency", np.pi))
        return lambda nu: 1.0 + amp * np.cos(freq * nu)
    raise ConfigError(f"unknown wave-function name: {name!r}")


def build_state(model: SpectralModel, spec: dict) -> StateKernel:
    kind = spec.get("type", "pure")
    if kind == "pure":
        psi_spec = spec.get("psi", {"name": "flat"})
        if "re" in psi_spec:
            psi = np.asarray(psi_spec["re"], dtype=float) + 1j * np.asarray(
                psi_spec.get("im", np.zeros_like(psi_spec["re"])), dtype=float
            )
            return pure_state(model, psi)
        return pure_state(model, _psi_from_spec(psi_spec))
    if kind == "diagonal":
        return diagonal_state(model, np.asarray(spec["weights"], dtype=float))
    if kind == "kernel":
        return state_from_dict(model, spec)
    raise ConfigError(f"unknown state type: {kind!r}")


def build_probe(config_or_dict, model: SpectralModel) -> ProbeModel:
    spec = (
        config_or_dict.probe
        if isinstance(config_or_dict, ExperimentConfig)
        else config_or_dict
    )
    probe = probe_from_config(spec)
    return bind_extension(probe, model)


@functools.lru_cache(maxsize=8)
def _build_cached(config_json: str):
    config = ExperimentConfig.from_dict(json.loads(config_json))
    model = build_model(config)
    state = build_state(model, config.state)
    probe = build_probe(config, model)
    return config, model, state, probe


# ---------------------------------------------------------------------------
# statistical tests

@dataclass(frozen=True)
class KsResult:
    statistic: float
    pvalue: float
    n: int


def ks_test(samples, reference_cdf) -> KsResult:
    """One-sample Kolmogorov-Smirnov statistic with its asymptotic p-value."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 50:
        raise ValueError(f"Kolmogorov-Smirnov test needs at least 50 samples, got {n}")
    cdf = np.asarray(reference_cdf(x), dtype=float)
    steps = np.arange(1, n + 1) / n
    d = float(np.max(np.maximum(steps - cdf, cdf - (steps - 1.0 / n))))
    return KsResult(statistic=d, pvalue=float(kolmogorov(math.sqrt(n) * d)), n=n)


def chi_square_gof(counts, probs) -> tuple[float, float]:
    """Pearson goodness-of-fit statistic and p-value against exact cell laws."""
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(probs, dtype=float)
    expected = counts.sum() * probs / probs.sum()
    stat = float(np.sum((counts - expected) ** 2 / expected))
    return stat, float(chi2.sf(stat, counts.size - 1))


def uniform_lln_residual(
    trajectories: Sequence[Trajectory],
    probe: ProbeModel,
    nu: float,
    checkpoints: Iterable[int],
    nodes: np.ndarray,
) -> np.ndarray:
    """Sup over the grid of |mean log-likelihood - its expectation|.

    Row per trajectory, column per checkpoint; checkpoint 0 reports the
    baseline sup |expectation|.
    """
    expected = probe.expected_loglik(nu, nodes)
    cps = sorted({int(c) for c in checkpoints})
    out = np.empty((len(trajectories), len(cps)))
    for r, traj in enumerate(trajectories):
        for c, k in enumerate(cps):
            if k == 0:
                out[r, c] = float(np.max(np.abs(expected)))
            else:
                sums = traj.loglik_at(k, probe, nodes)
                out[r, c] = float(np.max(np.abs(sums / k - expected)))
    return out


@dataclass(frozen=True)
class TestResult:
    """One quantitative check: pass iff the statistic meets its threshold."""

    name: str
    description: str
    statistic: float
    threshold: float
    comparison: str  # "<=" or ">="
    sample_size: int
    config_hash: str
    content_hash: str

    @property
    def passed(self) -> bool:
        if self.comparison == "<=":
            return self.statistic <= self.threshold
        if self.comparison == ">=":
            return self.statistic >= self.threshold
        raise ValueError(f"unknown comparison {self.comparison!r}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "comparison": self.comparison,
            "passed": self.passed,
            "sample_size": self.sample_size,
            "config_hash": self.config_hash,
            "content_hash": self.content_hash,
        }

    def summary(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (
            f"{self.name}: {status} ({self.statistic:.6g} {self.comparison} "
            f"{self.threshold:.6g}, n={self.sample_size})"
        )


# ---------------------------------------------------------------------------
# simulation

def _simulate_chunk(config_json: str, indices: tuple[int, ...]) -> list[Trajectory]:
    config, _, state, probe = _build_cached(config_json)
    return sample_ensemble(
        state,
        probe,
        config.k_max,
        config.ensemble,
        config.seed,
        sampler=config.sampler,
        checkpoints=config.checkpoints,
        hidden_nu=config.hidden_nu,
        indices=indices,
    )


def simulate_ensemble(config: ExperimentConfig, workers: int = 1) -> list[Trajectory]:
    """All ensemble trajectories, identical for any worker count."""
    config_json = config.canonical_json()
    indices = list(range(config.ensemble))
    if workers <= 1 or config.ensemble == 1:
        return _simulate_chunk(config_json, tuple(indices))
    chunk = max(1, math.ceil(len(indices) / (workers * 4)))
    batches = [tuple(indices[i : i + chunk]) for i in range(0, len(indices), chunk)]
    out: list[Trajectory] = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for batch in pool.map(_simulate_chunk, [config_json] * len(batches), batches):
            out.extend(batch)  # map preserves submission order
    return out


# ---------------------------------------------------------------------------
# estimation per experiment kind

def _standard_normal_cdf(x):
    return ndtr(x)


def estimate_ensemble(
    config: ExperimentConfig,
    trajectories: Sequence[Trajectory],
    model: SpectralModel,
    state: StateKernel,
    probe: ProbeModel,
    hashes: tuple[str, str],
) -> tuple[est.EstimatorReport, list[TestResult], dict]:
    """Estimator outputs, test results and tables for one experiment."""
    config_hash, content_hash = hashes
    tol = config.tolerances
    report = est.EstimatorReport(
        kind=config.kind,
        seeds={
            "master": config.seed,
            "splitting": "default_rng(SeedSequence(master, spawn_key=(index,)))",
        },
        tolerances=dict(sorted(tol.items())),
    )
    results: list[TestResult] = []
    tables: dict[str, tuple[list[str], list[list]]] = {}

    def add_result(name, description, statistic, threshold, comparison, n):
        results.append(
            TestResult(
                name=name,
                description=description,
                statistic=float(statistic),
                threshold=float(threshold),
                comparison=comparison,
                sample_size=int(n),
                config_hash=config_hash,
                content_hash=content_hash,
            )
        )

    k_max = config.k_max
    report.extra["checkpoints"] = list(config.checkpoints)

    # posterior-mean diagnostic (no limit statement attached to it)
    for traj in trajectories[: min(len(trajectories), 100)]:
        report.posterior_means.append(
            float(posterior_weights(state, traj, k_max, probe).mean())
        )

    if config.kind == "born-frequency":
        stat = est.mle_consistency_stat(
            trajectories,
            k_max,
            model,
            config.region,
            state,
            probe,
            ci_sigmas=tol["born_ci_sigmas"],
        )
        report.consistency = stat.to_dict()
        add_result(
            "born-frequency",
            "frequency of the limiting estimate in the region equals the "
            "spectral probability of the region",
            abs(stat.frequency - stat.exact_probability),
            stat.ci_halfwidth,
            "<=",
            stat.count,
        )
        tables["born_frequency"] = (
            ["frequency", "exact_probability", "ci_halfwidth", "count"],
            [[stat.frequency, stat.exact_probability, stat.ci_halfwidth, stat.count]],
        )

    elif config.kind == "rate-convergence":
        traces = [
            est.rate_trace(state, t, config.region, config.checkpoints, model, probe)
            for t in trajectories
        ]
        report.rate_traces = [t.to_dict() for t in traces]
        cps = traces[0].checkpoints
        medians = [
            float(np.median([t.values[i] for t in traces])) for i in range(len(cps))
        ]
        target = float(np.median([t.target for t in traces]))
        add_result(
            "rate-convergence",
            "posterior mass of the excluded region decays at the "
            "relative-entropy rate",
            abs(medians[-1] / target - 1.0) if target else abs(medians[-1]),
            tol["rate_rel_tol"],
            "<=",
            len(traces),
        )
        tables["rate_trace"] = (
            ["checkpoint", "median_rate", "target"],
            [[c, m, target] for c, m in zip(cps, medians)],
        )

    elif config.kind == "clt":
        samples = est.clt_samples(
            trajectories, k_max, model, probe, margin_stds=tol["boundary_margin_stds"]
        )
        res = samples.residuals
        report.clt_residuals = res.tolist()
        report.extra["clt_excluded_boundary"] = samples.excluded_boundary
        report.extra["clt_excluded_atoms"] = samples.excluded_atoms
        ks = ks_test(res, _standard_normal_cdf)
        add_result(
            "clt-ks",
            "standardized estimator residuals are standard normal "
            "(Kolmogorov-Smirnov)",
            ks.pvalue,
            tol["ks_alpha"],
            ">=",
            ks.n,
        )
        add_result(
            "clt-mean",
            "standardized residuals have zero mean",
            abs(float(res.mean())),
            tol["clt_mean_sigmas"] / math.sqrt(res.size),
            "<=",
            res.size,
        )
        add_result(
            "clt-variance",
            "standardized residuals have unit variance",
            abs(float(res.var()) - 1.0),
            tol["clt_var_tol"],
            "<=",
            res.size,
        )
        tables["clt_residuals"] = (["residual"], [[r] for r in res.tolist()])

    elif config.kind == "kernel-convergence":
        cps = [c for c in config.checkpoints if c > 0]
        per_cp: list[list[float]] = [[] for _ in cps]
        ratios = []
        for traj in trajectories:
            for i, c in enumerate(cps):
                zoom = est.rescaled_posterior_kernel(
                    state,
                    traj,
                    c,
                    model,
                    probe,
                    window_sigmas=config.window["sigmas"],
                    window_nodes=int(config.window["nodes"]),
                    min_sigmas=config.window["min_sigmas"],
                )
                limit = est.limit_kernel(
                    model, state, zoom.estimate, zoom.fisher, zoom.window
                )
                per_cp[i].append(est.trace_norm_distance(zoom.kernel, limit))
            ratios.append(est.laplace_condition_check(traj, k_max, model, probe).ratio)
        medians = [float(np.median(d)) for d in per_cp]
        report.distance_series = [
            {"checkpoint": c, "median_distance": m} for c, m in zip(cps, medians)
        ]
        report.laplace_checks = [{"ratio": r} for r in ratios]
        add_result(
            "laplace-ratio",
            "rescaled likelihood integral matches its Gaussian value",
            abs(float(np.median(ratios)) - 1.0),
            tol["laplace_rel_tol"],
            "<=",
            len(ratios),
        )
        add_result(
            "kernel-distance-monotone",
            "trace-norm distance to the Gaussian kernel decreases across "
            "checkpoints",
            max(np.diff(medians)) if len(medians) > 1 else 0.0,
            0.0,
            "<=",
            len(trajectories),
        )
        add_result(
            "kernel-distance-final",
            "trace-norm distance to the Gaussian kernel is small at the "
            "final checkpoint",
            medians[-1],
            tol["kernel_distance_final"],
            "<=",
            len(trajectories),
        )
        tables["kernel_distance"] = (
            ["checkpoint", "median_distance"],
            [[c, m] for c, m in zip(cps, medians)],
        )
        tables["laplace_ratio"] = (["ratio"], [[r] for r in ratios])

    elif config.kind == "assumption-validation":
        probe_report = validate_probe(probe, model)
        state_report = validate_state(state)
        rows = []
        for check in probe_report.checks:
            add_result(
                f"assumption-{check.name}",
                f"probe assumption check: {check.name}",
                0.0 if check.passed else 1.0,
                0.0,
                "<=",
                model.size,
            )
            rows.append([check.name, check.passed, check.worst_value, check.worst_location])
        add_result(
            "state-validity",
            "initial state is Hermitian, positive and normalized",
            0.0 if state_report.passed else 1.0,
            0.0,
            "<=",
            model.size,
        )
        rows.append(
            ["state", state_report.passed, state_report.trace_defect, "trace defect"]
        )
        report.extra["probe_caveats"] = list(probe_report.caveats)
        tables["assumptions"] = (["check", "passed", "worst_value", "location"], rows)

    # estimator paths are part of every report (first 100 trajectories)
    for traj in trajectories[: min(len(trajectories), 100)]:
        path = est.mle_path(traj, config.checkpoints, model, probe, refine=True)
        report.mle_paths.append(path.to_dict())

    return report, results, tables


# ---------------------------------------------------------------------------
# persistence

def persist_trajectories(out_dir, trajectories: Sequence[Trajectory], config: ExperimentConfig):
    """Columnar (step, outcome) files plus checkpointed log-likelihood sidecars."""
    out = Path(out_dir)
    (out / "trajectories").mkdir(parents=True, exist_ok=True)
    manifest = {
        "count": len(trajectories),
        "k_max": config.k_max,
        "checkpoints": list(config.checkpoints),
        "master_seed": config.seed,
        "entries": [],
    }
    for i, traj in enumerate(trajectories):
        stem = f"{i:05d}"
        with open(out / "trajectories" / f"traj_{stem}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "outcome"])
            for step, xi in enumerate(traj.outcomes, start=1):
                writer.writerow([step, repr(float(xi))])
        rows = sorted(traj.checkpoint_sums.items())
        if len(traj) not in traj.checkpoint_sums:
            rows.append((len(traj), traj.loglik_sums))
        with open(out / "trajectories" / f"loglik_{stem}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k"] + [f"node_{j}" for j in range(traj.loglik_sums.size)])
            for k, sums in rows:
                writer.writerow([k] + [repr(float(v)) for v in sums])
        manifest["entries"].append(
            {
                "index": i,
                "hidden_nu": traj.hidden_nu,
                "seed": traj.seed.to_dict() if traj.seed else None,
            }
        )
    with open(out / "trajectories" / "manifest.json", "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_trajectories(out_dir) -> list[Trajectory]:
    """Round-trip of ``persist_trajectories``; floats recover exactly."""
    base = Path(out_dir) / "trajectories"
    manifest_path = base / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no persisted trajectories under {out_dir}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    from .trajectories import SeedRecord

    out = []
    for entry in manifest["entries"]:
        stem = f"{entry['index']:05d}"
        with open(base / f"traj_{stem}.csv", newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        outcomes = np.asarray([float(r[1]) for r in rows])
        checkpoint_sums = {}
        with open(base / f"loglik_{stem}.csv", newline="") as fh:
            for row in list(csv.reader(fh))[1:]:
                checkpoint_sums[int(row[0])] = np.asarray([float(v) for v in row[1:]])
        final = checkpoint_sums[manifest["k_max"]]
        seed = entry.get("seed")
        out.append(
            Trajectory(
                outcomes=outcomes,
                loglik_sums=final,
                checkpoint_sums=checkpoint_sums,
                hidden_nu=entry.get("hidden_nu"),
                seed=SeedRecord(**seed) if seed else None,
            )
        )
    return out


# ---------------------------------------------------------------------------
# report bundles

@dataclass
class ReportBundle:
    config: ExperimentConfig
    config_hash: str
    content_hash: str
    results: list[TestResult]
    report: est.EstimatorReport
    tables: dict

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def summary_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "config_hash": self.config_hash,
            "content_hash": self.content_hash,
            "passed": self.passed,
            "results": [r.to_dict() for r in self.results],
        }

    def summary_text(self) -> str:
        lines = [f"experiment: {self.config.kind} (seed {self.config.seed})"]
        lines += [r.summary() for r in self.results]
        lines.append("overall: " + ("pass" if self.passed else "FAIL"))
        return "\n".join(lines)

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "summary.json", "w") as fh:
            json.dump(self.summary_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")
        with open(out / "estimator_report.json", "w") as fh:
            json.dump(self.report.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")
        tables = out / "tables"
        tables.mkdir(exist_ok=True)
        for name, (header, rows) in sorted(self.tables.items()):
            with open(tables / f"{name}.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(header)
                for row in rows:
                    writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def validate_config(config: ExperimentConfig):
    """Build everything the config names and run both validator suites."""
    model = build_model(config)
    state = build_state(model, config.state)
    probe = build_probe(config, model)
    return validate_probe(probe, model), validate_state(state)


def run_experiment(
    config: ExperimentConfig,
    out_dir=None,
    workers: int = 1,
    content_hash: str | None = None,
    skip_probe_validation: bool = False,
) -> ReportBundle:
    """Simulate, estimate, and bundle one experiment deterministically.

    The probe must pass its validators before any simulation unless the
    experiment itself is the validation run; failures abort with the
    validator report attached.
    """
    config_json = config.canonical_json()
    config_hash = config.config_hash()
    if content_hash is None:
        content_hash = git_blob_sha1(config_json.encode())
    _, model, state, probe = _build_cached(config_json)
    if config.kind != "assumption-validation" and not skip_probe_validation:
        probe_report = validate_probe(probe, model)
        if not probe_report.passed:
            raise ValidationFailure(probe_report)
    trajectories = simulate_ensemble(config, workers=workers)
    report, results, tables = estimate_ensemble(
        config, trajectories, model, state, probe, (config_hash, content_hash)
    )
    bundle = ReportBundle(
        config=config,
        config_hash=config_hash,
        content_hash=content_hash,
        results=results,
        report=report,
        tables=tables,
    )
    if out_dir is not None:
        bundle.write(out_dir)
        if config.persist_trajectories:
            persist_trajectories(out_dir, trajectories, config)
    return bundle

"""qndsim: simulate and verify repeated non-demolition measurements.

The toolkit samples probe-outcome trajectories of an indirect measurement
whose jump operators are functions of the measured observable, evolves the
posterior state over the observable's spectrum, and checks the limit laws
numerically: concentration of the spectral measure with Born-rule
frequencies, exponential decay of excluded regions at the relative-entropy
rate, asymptotic normality of the maximum-likelihood estimate, and
trace-norm convergence of the rescaled posterior kernel to a Gaussian.
"""

from .spectral import (
    RegionError,
    SpectralModel,
    SpectralModelError,
    SpectralWeights,
    StateKernel,
    StateValidationReport,
    build_spectral_model,
    diagonal_state,
    model_from_dict,
    model_to_dict,
    nearest_node,
    pure_state,
    spectral_probability,
    state_from_dict,
    state_to_dict,
    validate_state,
)
from .probes import (
    AssumptionCheck,
    BinaryPhase,
    FiniteOutcomes,
    GaussianReadout,
    ProbeError,
    ProbeExtension,
    ProbeModel,
    ProbeValidationReport,
    RealLine,
    TabulatedProbe,
    ZeroDensityError,
    bind_extension,
    fisher_information,
    log_likelihood,
    probe_from_config,
    relative_entropy,
    sample_outcome,
    validate_probe,
)
from .trajectories import (
    PosteriorSnapshot,
    SeedRecord,
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
from .estimators import (
    CltSamples,
    ConsistencyResult,
    EstimatorReport,
    GaussianKernelSpec,
    LaplaceCheck,
    MlePath,
    QuadraticInterpolant,
    RateTrace,
    RescaledKernelResult,
    WindowError,
    WindowGrid,
    build_window_grid,
    clt_samples,
    laplace_condition_check,
    limit_kernel,
    mle,
    mle_consistency_stat,
    mle_path,
    rate_trace,
    rescaled_posterior_kernel,
    trace_norm_distance,
)
from .harness import (
    DEFAULT_CHECKPOINTS,
    DEFAULT_SEED,
    ConfigError,
    ExperimentConfig,
    KsResult,
    ReportBundle,
    TestResult,
    ValidationFailure,
    build_model,
    build_probe,
    build_state,
    chi_square_gof,
    estimate_ensemble,
    ks_test,
    load_trajectories,
    persist_trajectories,
    run_experiment,
    simulate_ensemble,
    uniform_lln_residual,
    validate_config,
)

__version__ = "0.1.0"

"""Probe families: densities, scores, Fisher information, relative entropy,
sampling, the constant extension, and the assumption validators."""

import numpy as np
import pytest
from scipy import integrate

from qndsim.probes import (
    BinaryPhase,
    GaussianReadout,
    ProbeError,
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
from qndsim.spectral import build_spectral_model

RNG_SEED = 20260810


def _grid(lo=0.0, hi=1.0, n=50):
    return build_spectral_model(intervals=[(lo, hi)], nodes_per_interval=n)


# ---------------------------------------------------------------------------
# closed forms and derivatives

def test_gaussian_loglik_closed_form():
    probe = GaussianReadout(sigma=1.0)
    nu, xi = 0.4, 1.1
    l, dl, d2l = log_likelihood(probe, nu, xi)
    assert l == pytest.approx(-0.5 * (xi - nu) ** 2 - 0.5 * np.log(2 * np.pi), abs=1e-12)
    assert dl == pytest.approx(xi - nu, abs=1e-12)
    assert d2l == pytest.approx(-1.0, abs=1e-12)


def test_binary_score_closed_form():
    probe = BinaryPhase()
    for nu in (0.3, 1.2, 2.8):
        _, dl, _ = log_likelihood(probe, nu, 0.0)
        assert dl == pytest.approx(-np.tan(nu / 2.0), abs=1e-12)


def test_score_vanishes_at_density_maximum():
    probe = GaussianReadout(sigma=0.7)
    _, dl, _ = log_likelihood(probe, 0.31, 0.31)  # density in nu peaks at xi
    assert abs(dl) < 1e-12


@pytest.mark.parametrize(
    "probe", [GaussianReadout(sigma=1.0), GaussianReadout(sigma=0.3), BinaryPhase()]
)
def test_derivatives_match_central_differences(probe):
    rng = np.random.default_rng(RNG_SEED)
    lo, hi = (0.1, 0.9) if isinstance(probe, GaussianReadout) else (0.4, 2.7)
    step = 1e-5
    for _ in range(100):
        nu = float(rng.uniform(lo, hi))
        xi = float(sample_outcome(probe, nu, rng)[0])
        l, dl, d2l = log_likelihood(probe, nu, xi)
        lp = log_likelihood(probe, nu + step, xi)[0]
        lm = log_likelihood(probe, nu - step, xi)[0]
        assert abs((lp - lm) / (2 * step) - dl) < 1e-6
    # curvature with a wider step to keep roundoff below truncation
    step = 1e-4
    for nu in np.linspace(lo, hi, 7):
        xi = float(sample_outcome(probe, float(nu), rng)[0])
        l, _, d2l = log_likelihood(probe, float(nu), xi)
        lp = log_likelihood(probe, float(nu) + step, xi)[0]
        lm = log_likelihood(probe, float(nu) - step, xi)[0]
        assert abs((lp - 2 * l + lm) / step**2 - d2l) < 1e-5


def test_zero_density_raises():
    with pytest.raises(ZeroDensityError):
        log_likelihood(BinaryPhase(), 0.0, 1.0)  # sin^2(0) = 0


# ---------------------------------------------------------------------------
# sampling

def test_binary_sampling_frequency():
    rng = np.random.default_rng(RNG_SEED)
    draws = sample_outcome(BinaryPhase(), np.pi / 2, rng, size=100_000)
    assert abs(np.mean(draws == 0.0) - 0.5) < 0.005


def test_gaussian_sampling_mean():
    rng = np.random.default_rng(RNG_SEED)
    draws = sample_outcome(GaussianReadout(sigma=1.0), 0.0, rng, size=100_000)
    assert abs(draws.mean()) < 0.01


def test_gaussian_sampling_variance():
    rng = np.random.default_rng(RNG_SEED)
    draws = sample_outcome(GaussianReadout(sigma=0.5), 0.3, rng, size=100_000)
    assert abs(draws.var() - 0.25) < 0.01


# ---------------------------------------------------------------------------
# information quantities

def test_gaussian_fisher_information():
    for sigma in (1.0, 0.5):
        probe = GaussianReadout(sigma=sigma)
        nodes = np.linspace(0.1, 0.9, 9)
        f = probe.fisher(nodes)
        assert np.max(np.abs(f - 1.0 / sigma**2)) < 1e-6
        # independent oracle: E[(xi - nu)^2] / sigma^4 by adaptive quadrature
        for nu in nodes[::4]:
            oracle, _ = integrate.quad(
                lambda x: (x - nu) ** 2
                * np.exp(-0.5 * ((x - nu) / sigma) ** 2)
                / (np.sqrt(2 * np.pi) * sigma),
                nu - 10 * sigma,
                nu + 10 * sigma,
            )
            assert abs(f[list(nodes).index(nu)] - oracle / sigma**4) < 1e-6


def test_binary_fisher_information():
    probe = BinaryPhase()
    nodes = np.linspace(0.3, 2.8, 11)
    f = probe.fisher(nodes)
    # two-term oracle: cos^2 tan^2 + sin^2 cot^2 = 1
    oracle = (
        np.cos(nodes / 2) ** 2 * np.tan(nodes / 2) ** 2
        + np.sin(nodes / 2) ** 2 / np.tan(nodes / 2) ** 2
    )
    assert np.max(np.abs(f - oracle)) < 1e-12
    assert np.max(np.abs(f - 1.0)) < 1e-6


def test_embedded_binary_fisher_is_slope_squared():
    probe = BinaryPhase.embedded(0.0, 1.0)
    f = fisher_information(probe, 0.5)
    assert f == pytest.approx(probe.slope**2, abs=1e-9)


@pytest.mark.parametrize(
    "probe,nodes",
    [
        (GaussianReadout(sigma=1.0), np.linspace(0.0, 1.0, 21)),
        (GaussianReadout(sigma=0.5), np.linspace(0.0, 1.0, 21)),
        (BinaryPhase(), np.linspace(0.4, 2.7, 21)),
    ],
)
def test_information_identity(probe, nodes):
    # E[d2 log f] = -E[(d log f)^2], both sides by the same outcome rule
    assert np.max(np.abs(probe.mean_d2_loglik(nodes) + probe.fisher(nodes))) < 1e-6


@pytest.mark.parametrize(
    "probe,nodes",
    [
        (GaussianReadout(sigma=1.0), np.linspace(0.0, 1.0, 21)),
        (BinaryPhase(), np.linspace(0.4, 2.7, 21)),
    ],
)
def test_score_mean_zero(probe, nodes):
    assert np.max(np.abs(probe.score_mean(nodes))) < 1e-6


def test_normalization_on_grid():
    for probe in (GaussianReadout(sigma=1.0), GaussianReadout(sigma=0.05), BinaryPhase()):
        nodes = np.linspace(0.2, 0.9, 15)
        assert np.max(np.abs(probe.normalization(nodes) - 1.0)) < 1e-8
    # adaptive oracle for the continuous family
    oracle, _ = integrate.quad(
        lambda x: np.exp(-0.5 * (x - 0.4) ** 2) / np.sqrt(2 * np.pi), -12, 12
    )
    assert abs(oracle - 1.0) < 1e-10


# ---------------------------------------------------------------------------
# relative entropy

def test_relative_entropy_zero_inside_region():
    probe = GaussianReadout(sigma=1.0)
    assert abs(relative_entropy(probe, 0.3, [0.1, 0.3, 0.9])) < 1e-10


def test_gaussian_relative_entropy_closed_form_and_oracle():
    probe = GaussianReadout(sigma=1.0)
    nu, nu2 = 0.2, 0.6

    def integrand(x):
        f = np.exp(-0.5 * (x - nu) ** 2) / np.sqrt(2 * np.pi)
        g = np.exp(-0.5 * (x - nu2) ** 2) / np.sqrt(2 * np.pi)
        return f * (np.log(f) - np.log(g))

    oracle, _ = integrate.quad(integrand, nu - 12, nu + 12)
    value = relative_entropy(probe, nu, [nu2])
    assert value == pytest.approx(oracle, abs=1e-9)
    assert value == pytest.approx((nu - nu2) ** 2 / 2.0, abs=1e-9)


def test_binary_relative_entropy_two_term_oracle():
    probe = BinaryPhase()
    nu, nu2 = np.pi / 2, np.pi / 3
    f = np.array([np.cos(nu / 2) ** 2, np.sin(nu / 2) ** 2])
    g = np.array([np.cos(nu2 / 2) ** 2, np.sin(nu2 / 2) ** 2])
    oracle = float(np.sum(f * (np.log(f) - np.log(g))))
    assert relative_entropy(probe, nu, [nu2]) == pytest.approx(oracle, abs=1e-12)


def test_relative_entropy_nonnegative():
    rng = np.random.default_rng(RNG_SEED)
    for probe, lo, hi in (
        (GaussianReadout(sigma=0.5), 0.0, 1.0),
        (BinaryPhase(), 0.4, 2.7),
    ):
        for _ in range(25):
            nu = float(rng.uniform(lo, hi))
            region = rng.uniform(lo, hi, size=rng.integers(1, 6))
            assert relative_entropy(probe, nu, region) >= -1e-10


def test_relative_entropy_empty_region():
    with pytest.raises(ProbeError):
        relative_entropy(GaussianReadout(), 0.5, [])


# ---------------------------------------------------------------------------
# constant extension

def test_extension_blend_contract():
    model = _grid(0.0, 1.0, 50)
    probe = bind_extension(GaussianReadout(sigma=1.0), model)
    margin = probe.extension.margin
    assert margin == pytest.approx(3.0 * 0.02)
    xi = 0.37
    # untouched on the spectrum hull
    for nu in np.linspace(0.0, 1.0, 7):
        raw = probe._raw_density(np.float64(xi), np.float64(nu))
        assert float(probe.density(xi, nu)) == float(raw)
    # exactly the constant one beyond the margin
    for nu in (-0.5, 1.0 + margin, 2.0):
        assert float(probe.density(xi, nu)) == 1.0
    # continuous through the seams
    for seam in (0.0, 1.0, -margin, 1.0 + margin):
        left = float(probe.density(xi, seam - 1e-9))
        right = float(probe.density(xi, seam + 1e-9))
        assert abs(left - right) < 1e-7


def test_extension_blend_derivatives_consistent():
    model = _grid(0.0, 1.0, 50)
    probe = bind_extension(GaussianReadout(sigma=1.0), model)
    step = 1e-6
    xi = 0.8
    for nu in (1.01, 1.03, 1.05, -0.02):  # inside the blend zone
        f, f1, f2 = probe.density_derivs(np.float64(xi), np.float64(nu))
        fp = float(probe.density(xi, nu + step))
        fm = float(probe.density(xi, nu - step))
        assert abs((fp - fm) / (2 * step) - float(f1)) < 1e-6
        assert abs((fp - 2 * float(f) + fm) / step**2 - float(f2)) < 1e-2


def test_extension_preserves_tiny_densities():
    # the blend must not flush far-tail Gaussian densities to zero
    model = _grid(0.0, 1.0, 50)
    probe = bind_extension(GaussianReadout(sigma=1.0), model)
    value = float(probe.density(-8.0, 0.55))
    assert value > 0.0
    assert value == pytest.approx(float(probe._raw_density(-8.0, 0.55)))


def test_sampling_outside_extension_interval_raises():
    model = _grid(0.0, 1.0, 20)
    probe = bind_extension(GaussianReadout(sigma=1.0), model)
    rng = np.random.default_rng(0)
    with pytest.raises(ProbeError):
        probe.sample(2.0, 1, rng)


def test_amplitude_is_sqrt_density():
    probe = GaussianReadout(sigma=0.8)
    xi, nu = 0.3, 0.7
    assert float(probe.amplitude(xi, nu)) == pytest.approx(
        np.sqrt(float(probe.density(xi, nu)))
    )


# ---------------------------------------------------------------------------
# validators

def test_validator_accepts_gaussian():
    model = _grid(0.0, 1.0, 40)
    report = validate_probe(bind_extension(GaussianReadout(sigma=1.0), model), model)
    assert report.passed, report.summary()


def test_validator_accepts_binary_inside_safe_range():
    model = _grid(0.5, 2.5, 40)
    report = validate_probe(bind_extension(BinaryPhase(), model), model)
    assert report.passed, report.summary()


def test_validator_flags_phase_symmetry():
    # spectrum symmetric around pi: f(.|nu) equals f(.|2 pi - nu)
    model = build_spectral_model(
        intervals=[(np.pi - 1.0, np.pi + 1.0)], nodes_per_interval=10
    )
    report = validate_probe(bind_extension(BinaryPhase(), model), model)
    assert not report["identifiability"].passed
    assert report["positivity"].passed


def test_validator_flags_zero_density_with_location():
    table = np.array(
        [
            [0.5, 0.5, 0.0, 0.5, 0.5],  # a hard zero at the middle grid point
            [0.5, 0.5, 1.0, 0.5, 0.5],
        ]
    )
    probe = TabulatedProbe(
        nu_grid=(0.0, 0.25, 0.5, 0.75, 1.0),
        values=tuple(map(tuple, table)),
        outcomes=(0.0, 1.0),
    )
    # five midpoint nodes put a grid point exactly on the tabulated zero
    model = build_spectral_model(intervals=[(0.0, 1.0)], nodes_per_interval=5)
    report = validate_probe(probe, model)
    assert not report["positivity"].passed
    assert "nu=0.5" in report["positivity"].worst_location
    assert "xi=0" in report["positivity"].worst_location
    assert any("grid only" in c for c in report.caveats)


# ---------------------------------------------------------------------------
# tabulated probes

def _tabulated_gaussian(sigma=1.0):
    xi_grid = np.linspace(-6.0, 7.0, 521)
    nu_grid = np.linspace(0.0, 1.0, 41)
    values = np.exp(-0.5 * ((xi_grid[:, None] - nu_grid[None, :]) / sigma) ** 2) / (
        np.sqrt(2 * np.pi) * sigma
    )
    return TabulatedProbe(
        nu_grid=tuple(nu_grid),
        values=tuple(map(tuple, values)),
        xi_grid=tuple(xi_grid),
    )


def test_tabulated_density_matches_source():
    probe = _tabulated_gaussian()
    exact = GaussianReadout(sigma=1.0)
    xs = np.linspace(-2.0, 3.0, 40)
    nus = np.linspace(0.05, 0.95, 7)
    approx = probe.density(xs[:, None], nus[None, :])
    truth = exact.density(xs[:, None], nus[None, :])
    assert np.max(np.abs(approx - truth)) < 1e-3


def test_tabulated_rejection_sampler_moments():
    probe = _tabulated_gaussian()
    rng = np.random.default_rng(RNG_SEED)
    draws = probe.sample(0.4, 20_000, rng)
    assert abs(draws.mean() - 0.4) < 0.03
    assert abs(draws.var() - 1.0) < 0.05


def test_tabulated_finite_outcome_sampler():
    probe = TabulatedProbe(
        nu_grid=(0.0, 0.5, 1.0),
        values=((0.8, 0.5, 0.2), (0.2, 0.5, 0.8)),
        outcomes=(0.0, 1.0),
    )
    rng = np.random.default_rng(RNG_SEED)
    draws = probe.sample(0.0, 20_000, rng)
    assert abs(np.mean(draws == 0.0) - 0.8) < 0.01


def test_tabulated_finite_difference_loglik():
    probe = _tabulated_gaussian()
    l, dl, d2l = log_likelihood(probe, 0.5, 1.2)
    assert np.isfinite([l, dl, d2l]).all()
    assert dl == pytest.approx(1.2 - 0.5, abs=1e-3)


def test_tabulated_rejects_bad_tables():
    with pytest.raises(ProbeError):
        TabulatedProbe(
            nu_grid=(0.0, 0.5, 1.0),
            values=((0.5, -0.1, 0.5), (0.5, 1.1, 0.5)),
            outcomes=(0.0, 1.0),
        )
    with pytest.raises(ProbeError):
        TabulatedProbe(
            nu_grid=(0.0, 0.5, 1.0),
            values=((0.5j, 0.5, 0.5),),
            outcomes=(0.0,),
        )


# ---------------------------------------------------------------------------
# configuration

def test_probe_from_config():
    g = probe_from_config({"kind": "gaussian-readout", "sigma": 0.25})
    assert isinstance(g, GaussianReadout) and g.sigma == 0.25
    b = probe_from_config({"kind": "binary-phase", "embed": {"source": [0.0, 2.0]}})
    assert isinstance(b, BinaryPhase)
    lo, hi = b.offset, b.offset + 2.0 * b.slope
    assert 0.0 < lo < hi < np.pi
    with pytest.raises(ProbeError):
        probe_from_config({"kind": "unknown"})


def test_embedded_rejects_bad_targets():
    with pytest.raises(ProbeError):
        BinaryPhase.embedded(0.0, 1.0, target_lo=-0.1)
    with pytest.raises(ProbeError):
        BinaryPhase.embedded(1.0, 1.0)

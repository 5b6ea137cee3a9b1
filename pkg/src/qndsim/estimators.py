"""Estimators and limit diagnostics built on trajectory log-likelihoods.

The maximum-likelihood estimate of the observable's value is the argmax of
the running log-likelihood sums over the grid, optionally refined below the
grid scale by golden-section search on the exact per-outcome sum.  On top
of it sit the statistics that make the asymptotic claims measurable at
finite k:

* consistency frequencies against exact spectral probabilities,
* posterior decay rates of excluded regions against relative entropy,
* standardized residuals ``sqrt(k F) (estimate - hidden)`` for normality
  tests,
* the Laplace-integral ratio that the Gaussian posterior limit rests on,
* rescaled posterior kernels on a zoom window around the estimate, and the
  Gaussian kernel they converge to, compared in trace norm on the
  mass-weighted matrices.

Sub-grid evaluation interpolates grid values by local three-point
(piecewise-quadratic) Lagrange rules, matching the second-order Taylor
structure of the log-likelihood near its maximum.  The zoom window spans
``8 / sqrt(F)`` rescaled units by default and is shrunk symmetrically when
it would leave the spectrum; it must retain at least ``2 / sqrt(F)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from .probes import relative_entropy
from .spectral import (
    RegionError,
    SpectralModel,
    StateKernel,
    spectral_probability,
)
from .trajectories import Trajectory, log_prior_weights

__all__ = [
    "MlePath",
    "RateTrace",
    "CltSamples",
    "ConsistencyResult",
    "LaplaceCheck",
    "RescaledKernelResult",
    "WindowGrid",
    "WindowError",
    "GaussianKernelSpec",
    "QuadraticInterpolant",
    "EstimatorReport",
    "mle",
    "mle_path",
    "mle_consistency_stat",
    "rate_trace",
    "clt_samples",
    "laplace_condition_check",
    "build_window_grid",
    "rescaled_posterior_kernel",
    "limit_kernel",
    "trace_norm_distance",
]

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0

DEFAULT_WINDOW_SIGMAS = 8.0    # captures all but ~1e-14 of the Gaussian mass
MIN_WINDOW_SIGMAS = 2.0        # narrower zoom windows are rejected
REFINE_TOL_FACTOR = 1e-8       # golden-section tolerance, times hull width


class WindowError(ValueError):
    """Raised when a rescaled zoom window cannot fit inside the spectrum."""


# ---------------------------------------------------------------------------
# sub-grid interpolation

class QuadraticInterpolant:
    """Local three-point Lagrange interpolation on a sorted grid.

    Each query uses the parabola through the three nodes nearest to it, the
    standard second-order reconstruction.  Queries outside ``domain`` raise;
    the domain defaults to the node hull and is widened to the owning
    interval by callers that know it.
    """

    def __init__(self, xs: np.ndarray, ys: np.ndarray | None = None, domain=None):
        xs = np.asarray(xs, dtype=float)
        if xs.size < 3:
            raise ValueError("quadratic interpolation needs at least 3 nodes")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("interpolation nodes must be strictly increasing")
        self.xs = xs
        self.ys = None if ys is None else np.asarray(ys)
        self.domain = (xs[0], xs[-1]) if domain is None else (float(domain[0]), float(domain[1]))

    def weight_matrix(self, x) -> np.ndarray:
        """Dense (len(x), len(xs)) matrix with three weights per row."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lo, hi = self.domain
        if np.any(x < lo - 1e-12) or np.any(x > hi + 1e-12):
            raise ValueError(
                f"interpolation bracket failure: query outside [{lo}, {hi}]"
            )
        xs = self.xs
        j = np.searchsorted(xs, x)
        left = np.clip(j - 1, 0, xs.size - 1)
        right = np.clip(j, 0, xs.size - 1)
        c = np.where(np.abs(x - xs[left]) <= np.abs(x - xs[right]), left, right)
        c = np.clip(c, 1, xs.size - 2)
        x0, x1, x2 = xs[c - 1], xs[c], xs[c + 1]
        w = np.zeros((x.size, xs.size))
        rows = np.arange(x.size)
        w[rows, c - 1] = (x - x1) * (x - x2) / ((x0 - x1) * (x0 - x2))
        w[rows, c] = (x - x0) * (x - x2) / ((x1 - x0) * (x1 - x2))
        w[rows, c + 1] = (x - x0) * (x - x1) / ((x2 - x0) * (x2 - x1))
        return w

    def __call__(self, x):
        if self.ys is None:
            raise ValueError("interpolant was built without values")
        out = self.weight_matrix(x) @ self.ys
        return out if np.ndim(x) else float(out[0])


def _interval_subgrid(model: SpectralModel, nu: float):
    """Nodes of the interval containing nu, its slice, and its bounds."""
    j = model.interval_index(nu)
    if j is None:
        raise WindowError(
            f"nu={nu} has no absolutely continuous neighborhood in the spectrum"
        )
    sl = model.interval_node_range(j)
    if sl.stop - sl.start < 3:
        raise WindowError("interval has fewer than 3 nodes; refine the grid")
    return sl, model.intervals[j]


# ---------------------------------------------------------------------------
# maximum likelihood

def _golden_max(f, a: float, b: float, tol: float) -> float:
    """Golden-section maximization of a unimodal f on [a, b]."""
    h = b - a
    if h <= tol:
        return 0.5 * (a + b)
    n = int(math.ceil(math.log(tol / h) / math.log(_INV_PHI)))
    c = a + _INV_PHI2 * h
    d = a + _INV_PHI * h
    yc, yd = f(c), f(d)
    for _ in range(n - 1):
        if yc > yd:
            b, d, yd = d, c, yc
            h *= _INV_PHI
            c = a + _INV_PHI2 * h
            yc = f(c)
        else:
            a, c, yc = c, d, yd
            h *= _INV_PHI
            d = a + _INV_PHI * h
            yd = f(d)
    return 0.5 * ((a + d) if yc > yd else (c + b))


def mle(
    trajectory: Trajectory,
    k: int,
    model: SpectralModel,
    probe=None,
    refine: bool = True,
) -> float:
    """Maximum-likelihood estimate after k outcomes.

    The grid argmax breaks ties toward the smallest node.  With ``refine``,
    interval-node maxima are polished by golden-section search on the exact
    per-outcome log-likelihood sum over the bracketing cells (tolerance
    1e-8 of the hull width), falling back to the vertex of the local
    parabola when the probe or the outcomes are unavailable.  Estimates
    never leave the spectrum.
    """
    sums = trajectory.loglik_at(k, probe, model.nodes)
    idx = int(np.argmax(sums))  # first occurrence: smallest node wins ties
    nu0 = float(model.nodes[idx])
    if not refine or model.is_atom[idx]:
        return nu0
    j = model.interval_index(nu0)
    if j is None:
        return nu0
    a, b = model.intervals[j]
    delta = (b - a) / model.nodes_per_interval
    lo = max(a, nu0 - delta)
    hi = min(b, nu0 + delta)
    hull_lo, hull_hi = model.hull
    tol = REFINE_TOL_FACTOR * max(hull_hi - hull_lo, 1.0)
    if probe is not None and trajectory.outcomes.size >= k:
        outcomes = trajectory.outcomes[:k]
        if probe.outcome_space.finite:
            # sufficient statistic: outcome counts make each probe call O(1)
            vals, counts = np.unique(outcomes, return_counts=True)

            def objective(nu):
                return float(counts @ probe.loglik_values(np.asarray([nu]), vals)[:, 0])

        else:

            def objective(nu):
                return float(probe.loglik_values(np.asarray([nu]), outcomes).sum())

        out = _golden_max(objective, lo, hi, tol)
    else:
        sl, _ = _interval_subgrid(model, nu0)
        xs = model.nodes[sl]
        ys = sums[sl]
        c = int(np.clip(idx - sl.start, 1, xs.size - 2))
        x0, x1, x2 = xs[c - 1 : c + 2]
        y0, y1, y2 = ys[c - 1 : c + 2]
        denom = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0)
        if denom == 0:
            out = x1
        else:
            out = x1 - 0.5 * (
                (x1 - x0) ** 2 * (y1 - y2) - (x1 - x2) ** 2 * (y1 - y0)
            ) / denom
    return float(np.clip(out, lo, hi))


@dataclass(frozen=True)
class MlePath:
    """Estimates at checkpointed steps; all of them lie in the spectrum."""

    checkpoints: tuple[int, ...]
    estimates: tuple[float, ...]
    refined: bool

    @property
    def final(self) -> float:
        return self.estimates[-1]

    def to_dict(self) -> dict:
        return {
            "checkpoints": list(self.checkpoints),
            "estimates": list(self.estimates),
            "refined": self.refined,
        }


def mle_path(
    trajectory: Trajectory,
    checkpoints: Iterable[int],
    model: SpectralModel,
    probe=None,
    refine: bool = True,
) -> MlePath:
    cps = sorted({int(c) for c in checkpoints if 0 < int(c) <= len(trajectory)})
    return MlePath(
        checkpoints=tuple(cps),
        estimates=tuple(mle(trajectory, c, model, probe, refine) for c in cps),
        refined=refine,
    )


@dataclass(frozen=True)
class ConsistencyResult:
    """Empirical frequency of estimates in a region vs the exact probability."""

    frequency: float
    exact_probability: float
    ci_halfwidth: float
    count: int

    @property
    def within_interval(self) -> bool:
        return abs(self.frequency - self.exact_probability) <= self.ci_halfwidth

    def to_dict(self) -> dict:
        return {
            "frequency": self.frequency,
            "exact_probability": self.exact_probability,
            "ci_halfwidth": self.ci_halfwidth,
            "count": self.count,
        }


def mle_consistency_stat(
    trajectories: Sequence[Trajectory],
    k: int,
    model: SpectralModel,
    region,
    state: StateKernel,
    probe=None,
    ci_sigmas: float = 3.0,
) -> ConsistencyResult:
    """Frequency of grid estimates falling in a region, with its exact target.

    Membership is decided on grid nodes (no sub-grid refinement), so the
    region mask and the estimate live on the same discretization.
    """
    if len(trajectories) == 0:
        raise ValueError("empty ensemble")
    mask = model.region_mask(region)
    hits = 0
    for traj in trajectories:
        sums = traj.loglik_at(k, probe, model.nodes)
        hits += bool(mask[int(np.argmax(sums))])
    exact = spectral_probability(state, region)
    ci = ci_sigmas * math.sqrt(max(exact * (1.0 - exact), 0.0) / len(trajectories))
    return ConsistencyResult(
        frequency=hits / len(trajectories),
        exact_probability=exact,
        ci_halfwidth=ci,
        count=len(trajectories),
    )


# ---------------------------------------------------------------------------
# large-deviation rate

@dataclass(frozen=True)
class RateTrace:
    """Per-checkpoint decay rates of posterior mass on a region.

    ``values[c] = -(1/k_c) log posterior_mass(region)``; the target is the
    relative entropy from the final estimate's law to the region.
    """

    checkpoints: tuple[int, ...]
    values: tuple[float, ...]
    target: float
    estimate: float

    def to_dict(self) -> dict:
        return {
            "checkpoints": list(self.checkpoints),
            "values": list(self.values),
            "target": self.target,
            "estimate": self.estimate,
        }


def rate_trace(
    state: StateKernel,
    trajectory: Trajectory,
    region,
    checkpoints: Iterable[int],
    model: SpectralModel,
    probe,
) -> RateTrace:
    mask = model.region_mask(region)
    log_prior = log_prior_weights(state)
    if not np.any(np.isfinite(log_prior[mask])):
        raise RegionError(
            "region has zero prior spectral mass; the rate statement assumes "
            "the region meets the support of the initial spectral measure"
        )
    cps = sorted({int(c) for c in checkpoints if 0 < int(c) <= len(trajectory)})
    values = []
    for c in cps:
        logw = log_prior + trajectory.loglik_at(c, probe, model.nodes)
        values.append(float(-(logsumexp(logw[mask]) - logsumexp(logw)) / c))
    estimate = mle(trajectory, cps[-1], model, probe, refine=True)
    target = relative_entropy(probe, estimate, model.nodes[mask])
    return RateTrace(
        checkpoints=tuple(cps),
        values=tuple(values),
        target=float(target),
        estimate=float(estimate),
    )


# ---------------------------------------------------------------------------
# central-limit statistics

@dataclass(frozen=True)
class CltSamples:
    """Standardized residuals sqrt(k F(nu)) (estimate - nu) of an ensemble."""

    residuals: np.ndarray
    excluded_boundary: int
    excluded_atoms: int

    @property
    def count(self) -> int:
        return int(self.residuals.size)

    def to_dict(self) -> dict:
        return {
            "residuals": self.residuals.tolist(),
            "excluded_boundary": self.excluded_boundary,
            "excluded_atoms": self.excluded_atoms,
        }


def clt_samples(
    trajectories: Sequence[Trajectory],
    k: int,
    model: SpectralModel,
    probe,
    margin_stds: float = 5.0,
) -> CltSamples:
    """Standardized estimator residuals against the hidden values.

    Needs mixture-sampled trajectories (hidden value recorded) and sub-grid
    refinement.  Hidden values within ``margin_stds / sqrt(k F)`` of their
    interval's boundary, or sitting on atoms, are excluded and counted.
    """
    residuals = []
    excluded_boundary = 0
    excluded_atoms = 0
    fisher_cache: dict[float, float] = {}
    for traj in trajectories:
        if traj.hidden_nu is None:
            raise ValueError("clt_samples needs trajectories with hidden values")
        nu = float(traj.hidden_nu)
        j = model.interval_index(nu)
        if j is None:
            excluded_atoms += 1
            continue
        if nu not in fisher_cache:
            fisher_cache[nu] = float(probe.fisher(np.asarray([nu]))[0])
        fisher = fisher_cache[nu]
        margin = margin_stds / math.sqrt(k * fisher)
        a, b = model.intervals[j]
        if nu - a < margin or b - nu < margin:
            excluded_boundary += 1
            continue
        estimate = mle(traj, k, model, probe, refine=True)
        residuals.append(math.sqrt(k * fisher) * (estimate - nu))
    if not residuals:
        raise ValueError("all trajectories were excluded; widen the spectrum")
    return CltSamples(
        residuals=np.asarray(residuals),
        excluded_boundary=excluded_boundary,
        excluded_atoms=excluded_atoms,
    )


@dataclass(frozen=True)
class LaplaceCheck:
    """Ratio of the rescaled likelihood integral to its Gaussian value.

    The numerator integrates ``exp(L(u) - L(nu_hat))`` in the rescaled
    variable ``x = sqrt(k)(u - nu_hat)`` over the interval owning the
    estimate (other spectral components are exponentially suppressed);
    the denominator is ``sqrt(2 pi / F(nu_hat))``.  Values near 1 support
    the Gaussian posterior limit; this is a diagnostic, small-k values
    far from 1 are expected.
    """

    ratio: float
    numerator: float
    denominator: float
    estimate: float
    fisher: float

    def to_dict(self) -> dict:
        return {
            "ratio": self.ratio,
            "numerator": self.numerator,
            "denominator": self.denominator,
            "estimate": self.estimate,
            "fisher": self.fisher,
        }


_GL16 = np.polynomial.legendre.leggauss(16)


def laplace_condition_check(
    trajectory: Trajectory,
    k: int,
    model: SpectralModel,
    probe,
) -> LaplaceCheck:
    sums = trajectory.loglik_at(k, probe, model.nodes)
    nu_hat = mle(trajectory, k, model, probe, refine=True)
    sl, (a, b) = _interval_subgrid(model, nu_hat)
    interp = QuadraticInterpolant(model.nodes[sl], sums[sl], domain=(a, b))
    fisher = float(probe.fisher(np.asarray([nu_hat]))[0])
    l_hat = interp(nu_hat)

    sqrt_k = math.sqrt(k)
    edges = sqrt_k * (np.linspace(a, b, (sl.stop - sl.start) + 1) - nu_hat)
    x0, w0 = _GL16
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * np.diff(edges)
    xq = (mid[:, None] + half[:, None] * x0[None, :]).ravel()
    wq = (half[:, None] * w0[None, :]).ravel()
    expo = interp.weight_matrix(nu_hat + xq / sqrt_k) @ sums[sl] - l_hat
    numerator = float(wq @ np.exp(np.clip(expo, None, 50.0)))
    denominator = math.sqrt(2.0 * math.pi / fisher)
    return LaplaceCheck(
        ratio=numerator / denominator,
        numerator=numerator,
        denominator=denominator,
        estimate=nu_hat,
        fisher=fisher,
    )


# ---------------------------------------------------------------------------
# rescaled posterior kernels and the Gaussian limit

@dataclass(frozen=True, eq=False)
class WindowGrid:
    """Midpoint grid on a rescaled zoom window around an estimate.

    Nodes are rescaled offsets ``x`` with original positions
    ``center + x / scale``; node mass is ``spacing * hvals`` with the
    spectral density evaluated at the original positions, matching the
    weighted space the kernel comparison lives in.
    """

    offsets: np.ndarray
    spacing: float
    center: float
    scale: float
    hvals: np.ndarray
    multiplicity: int = 1

    @property
    def nodes(self) -> np.ndarray:
        return self.offsets

    @property
    def mass(self) -> np.ndarray:
        return self.spacing * self.hvals

    @property
    def positions(self) -> np.ndarray:
        """Original-variable positions of the window nodes."""
        return self.center + self.offsets / self.scale

    def matches(self, other: "WindowGrid") -> bool:
        return (
            self.offsets.size == other.offsets.size
            and np.array_equal(self.offsets, other.offsets)
            and np.array_equal(self.hvals, other.hvals)
        )


def build_window_grid(
    model: SpectralModel,
    nu_hat: float,
    k: int,
    fisher: float,
    window_sigmas: float = DEFAULT_WINDOW_SIGMAS,
    window_nodes: int = 201,
    min_sigmas: float = MIN_WINDOW_SIGMAS,
) -> WindowGrid:
    """Zoom window of half-width ``window_sigmas / sqrt(fisher)`` (rescaled).

    The window is shrunk symmetrically so its original-variable image stays
    inside the interval owning the estimate; if that leaves less than
    ``min_sigmas / sqrt(fisher)``, the window cannot fit and a
    ``WindowError`` is raised.
    """
    _, (a, b) = _interval_subgrid(model, nu_hat)
    sqrt_k = math.sqrt(k)
    want = window_sigmas / math.sqrt(fisher)
    fit = sqrt_k * min(nu_hat - a, b - nu_hat)
    half = min(want, fit)
    if half < min_sigmas / math.sqrt(fisher):
        raise WindowError(
            f"rescaled window of half-width {want:.3g} exits the spectrum at "
            f"k={k} (room for {fit:.3g}, need {min_sigmas / math.sqrt(fisher):.3g})"
        )
    spacing = 2.0 * half / window_nodes
    offsets = -half + (np.arange(window_nodes) + 0.5) * spacing
    hvals = np.asarray(model.h_fn(nu_hat + offsets / sqrt_k), dtype=float)
    return WindowGrid(
        offsets=offsets,
        spacing=spacing,
        center=float(nu_hat),
        scale=sqrt_k,
        hvals=hvals,
        multiplicity=model.multiplicity,
    )


@dataclass(frozen=True)
class RescaledKernelResult:
    """Rescaled posterior kernel on a zoom window, with its context."""

    kernel: StateKernel
    window: WindowGrid
    estimate: float
    fisher: float
    window_mass: float

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "fisher": self.fisher,
            "window_mass": self.window_mass,
            "window_halfwidth": float(-self.window.offsets[0] + 0.5 * self.window.spacing),
        }


def rescaled_posterior_kernel(
    state: StateKernel,
    trajectory: Trajectory,
    k: int,
    model: SpectralModel,
    probe,
    window_sigmas: float = DEFAULT_WINDOW_SIGMAS,
    window_nodes: int = 201,
    min_sigmas: float = MIN_WINDOW_SIGMAS,
) -> RescaledKernelResult:
    """Posterior kernel zoomed by sqrt(k) around the estimate.

    Evaluates ``rho_k(nu_hat + x / sqrt(k), nu_hat + y / sqrt(k)) / sqrt(k)``
    on the window grid, interpolating both the log-likelihood sums and the
    initial kernel piecewise-quadratically.  The result is normalized to
    unit discrete trace on its own window (the discrete image of trace
    preservation under the zoom); ``window_mass`` records the posterior
    mass the window captured relative to the whole grid.
    """
    sums = trajectory.loglik_at(k, probe, model.nodes)
    nu_hat = mle(trajectory, k, model, probe, refine=True)
    fisher = float(probe.fisher(np.asarray([nu_hat]))[0])
    window = build_window_grid(
        model, nu_hat, k, fisher, window_sigmas, window_nodes, min_sigmas
    )
    sl, (a, b) = _interval_subgrid(model, nu_hat)
    interp = QuadraticInterpolant(model.nodes[sl], domain=(a, b))
    wmat = interp.weight_matrix(window.positions)

    shift = float(sums.max())
    half_log = 0.5 * (wmat @ sums[sl] - shift)
    amp = np.exp(half_log)
    base = np.einsum("qi,ijab->qjab", wmat, state.values[sl, sl])
    base = np.einsum("qjab,rj->qrab", base, wmat)
    values = base * amp[:, None, None, None] * amp[None, :, None, None]
    raw = StateKernel(values, window)
    window_trace = raw.trace() / window.scale

    block_traces = state.block_traces()
    with np.errstate(divide="ignore"):
        log_terms = sums - shift + np.log(model.mass * np.clip(block_traces, 0, None))
    grid_norm = float(np.exp(logsumexp(log_terms[np.isfinite(log_terms)])))
    if window_trace <= 0:
        raise ValueError("rescaled kernel has zero trace on its window")
    return RescaledKernelResult(
        kernel=StateKernel(values / raw.trace(), window),
        window=window,
        estimate=nu_hat,
        fisher=fisher,
        window_mass=window_trace / grid_norm,
    )


@dataclass(frozen=True)
class GaussianKernelSpec:
    """Normalized Gaussian kernel with inverse-variance ``fisher``.

    ``values(x, y) = exp(-fisher (x^2 + y^2) / 4) / integral exp(-fisher
    t^2 / 2) dt``; its diagonal integrates to one.
    """

    fisher: float
    center: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.fisher <= 0:
            raise ValueError("fisher must be positive")

    @property
    def normalization(self) -> float:
        return math.sqrt(2.0 * math.pi / self.fisher)

    def values(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.exp(-0.25 * self.fisher * (x**2 + y**2)) / self.normalization

    def diagonal(self, x) -> np.ndarray:
        return self.values(x, x)


def limit_kernel(
    model: SpectralModel,
    state: StateKernel,
    nu_hat: float,
    fisher: float,
    window: WindowGrid,
) -> StateKernel:
    """The Gaussian limit of the rescaled posterior on a zoom window.

    Builds ``c(nu_hat) * G(x, y) / h(nu_hat)`` where ``c`` is the initial
    kernel's diagonal block at the estimate normalized by its block trace
    (the zero kernel when that diagonal vanishes), ``G`` the normalized
    Gaussian kernel with inverse variance ``fisher``, and ``h`` the
    spectral density at the estimate.
    """
    sl, (a, b) = _interval_subgrid(model, nu_hat)
    h_at = float(np.asarray(model.h_fn(np.asarray([nu_hat])))[0])
    if h_at <= 0:
        raise ValueError(f"spectral density vanishes at nu={nu_hat}")
    interp = QuadraticInterpolant(model.nodes[sl], domain=(a, b))
    w = interp.weight_matrix(np.asarray([nu_hat]))[0]
    diag_blocks = np.einsum("iiab->iab", state.values[sl, sl])
    block = np.einsum("i,iab->ab", w, diag_blocks)
    trace = float(np.trace(block).real)
    n = window.multiplicity
    if trace <= 0.0:
        c_block = np.zeros((n, n), dtype=complex)
    else:
        c_block = block / trace
    spec = GaussianKernelSpec(fisher=fisher, center=nu_hat, scale=window.scale)
    g = spec.values(window.offsets[:, None], window.offsets[None, :])
    values = g[:, :, None, None] * c_block[None, None, :, :] / h_at
    return StateKernel(values, window)


# ---------------------------------------------------------------------------
# trace norm

def trace_norm_distance(a: StateKernel, b: StateKernel, weights=None) -> float:
    """Sum of singular values of the difference of mass-weighted matrices.

    A norm distance: symmetric, triangle inequality, zero only for equal
    kernels.  Both kernels must live on the same grid unless explicit
    weights are supplied.
    """
    same = a.grid is b.grid
    if not same and isinstance(a.grid, WindowGrid) and isinstance(b.grid, WindowGrid):
        same = a.grid.matches(b.grid)
    if not same and weights is None:
        ga, gb = a.grid, b.grid
        same = (
            ga.nodes.size == gb.nodes.size
            and np.array_equal(ga.nodes, gb.nodes)
            and np.array_equal(ga.mass, gb.mass)
        )
    if not same and weights is None:
        raise ValueError("kernels live on mismatched grids")
    if weights is None:
        ma, mb = a.weighted_matrix(), b.weighted_matrix()
    else:
        s = np.sqrt(np.asarray(weights, dtype=float))

        def _weighted(kernel):
            m = kernel.values * s[:, None, None, None] * s[None, :, None, None]
            nn = kernel.size * kernel.block_size
            return m.transpose(0, 2, 1, 3).reshape(nn, nn)

        ma, mb = _weighted(a), _weighted(b)
    return float(np.linalg.svd(ma - mb, compute_uv=False).sum())


# ---------------------------------------------------------------------------
# report container

@dataclass
class EstimatorReport:
    """Estimator outputs of one experiment, ready for serialization."""

    kind: str
    seeds: dict
    tolerances: dict
    mle_paths: list[dict] = field(default_factory=list)
    rate_traces: list[dict] = field(default_factory=list)
    clt_residuals: list[float] = field(default_factory=list)
    distance_series: list[dict] = field(default_factory=list)
    laplace_checks: list[dict] = field(default_factory=list)
    consistency: dict | None = None
    posterior_means: list[float] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seeds": self.seeds,
            "tolerances": self.tolerances,
            "mle_paths": self.mle_paths,
            "rate_traces": self.rate_traces,
            "clt_residuals": self.clt_residuals,
            "distance_series": self.distance_series,
            "laplace_checks": self.laplace_checks,
            "consistency": self.consistency,
            "posterior_means": self.posterior_means,
            "extra": self.extra,
        }

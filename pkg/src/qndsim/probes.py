"""Probe-outcome statistics: conditional densities, scores, and validators.

A probe model is a family of outcome densities ``f(xi | nu)`` indexed by the
value ``nu`` of the measured observable, together with its log-likelihood
``l(nu | xi) = log f(xi | nu)`` and the first two nu-derivatives.  The jump
amplitude attached to an outcome is the nonnegative square root
``sqrt(f(xi | nu))``; families carrying complex phases are rejected at
construction.

Two built-in families are provided:

* ``GaussianReadout``: a homodyne-style readout, ``xi ~ Normal(nu, sigma^2)``
  on the real line.
* ``BinaryPhase``: a two-outcome phase probe with ``f(0|nu) = cos^2(phi/2)``
  and ``f(1|nu) = sin^2(phi/2)`` for an affine phase ``phi = offset +
  slope * nu``; with the identity phase map the family is valid for spectra
  inside (0, pi).  This mirrors dispersive photon-number probes of a cavity
  mode.

Outside a compact interval, densities are continued to a constant by a C^2
blend (quintic smoothstep over a declared margin), which keeps the second
log-derivative bounded globally while leaving the family untouched on the
spectrum itself.

Expectations over outcomes use exact sums for finite outcome spaces and a
fixed composite Gauss-Legendre rule (about 1e5 nodes, window covering at
least 1 - 1e-12 of each outcome law, radius 8 sigma for the Gaussian
family) for continuous ones.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "ProbeModel",
    "ProbeError",
    "ZeroDensityError",
    "ProbeExtension",
    "FiniteOutcomes",
    "RealLine",
    "GaussianReadout",
    "BinaryPhase",
    "TabulatedProbe",
    "AssumptionCheck",
    "ProbeValidationReport",
    "log_likelihood",
    "fisher_information",
    "relative_entropy",
    "sample_outcome",
    "validate_probe",
    "bind_extension",
    "probe_from_config",
]

GAUSS_WINDOW_SIGMAS = 8.0        # tail mass below 1.3e-15 per side
XI_QUAD_NODES = 100_096          # composite Gauss-Legendre size, 32 per panel
IDENTIFIABILITY_NODES = 1024     # cheaper rule for pairwise L1 distances
FD_STEP = 1e-5                   # declared central-difference step

_GL32 = np.polynomial.legendre.leggauss(32)


class ProbeError(ValueError):
    """Raised for invalid probe construction or use."""


class ZeroDensityError(ProbeError):
    """Raised when a density vanishes where positivity is assumed."""


@dataclass(frozen=True)
class FiniteOutcomes:
    values: tuple[float, ...]

    @property
    def finite(self) -> bool:
        return True


@dataclass(frozen=True)
class RealLine:
    @property
    def finite(self) -> bool:
        return False


@dataclass(frozen=True)
class ProbeExtension:
    """Compact interval [lo, hi] outside which f blends to the constant 1.

    The blend is complete a distance ``margin`` beyond the interval; the
    quintic smoothstep used is twice continuously differentiable.
    """

    lo: float
    hi: float
    margin: float

    def contains(self, nu) -> np.ndarray:
        nu = np.asarray(nu, dtype=float)
        return (nu >= self.lo - self.margin) & (nu <= self.hi + self.margin)

    def blend(self, nu):
        """Bump b(nu) with derivatives: 1 on [lo, hi], 0 beyond the margin."""
        nu = np.asarray(nu, dtype=float)
        t_hi = np.clip((nu - self.hi) / self.margin, 0.0, 1.0)
        t_lo = np.clip((self.lo - nu) / self.margin, 0.0, 1.0)
        t = np.maximum(t_hi, t_lo)
        sign = np.where(t_lo > 0, 1.0, -1.0)  # sign of db/dnu per side
        s = t**3 * (6.0 * t**2 - 15.0 * t + 10.0)
        s1 = 30.0 * t**2 * (t - 1.0) ** 2
        s2 = 60.0 * t * (t - 1.0) * (2.0 * t - 1.0)
        b = 1.0 - s
        b1 = sign * s1 / self.margin
        b2 = -s2 / self.margin**2
        return b, b1, b2


def _composite_gauss(lo: float, hi: float, total_nodes: int):
    """Composite 32-point Gauss-Legendre rule on [lo, hi]."""
    x0, w0 = _GL32
    panels = max(int(np.ceil(total_nodes / x0.size)), 1)
    edges = np.linspace(lo, hi, panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    xq = (mid[:, None] + half[:, None] * x0[None, :]).ravel()
    wq = (half[:, None] * w0[None, :]).ravel()
    return xq, wq


class ProbeModel:
    """Base class wiring raw density families to the common contract.

    Subclasses provide ``_raw_density``, ``_raw_density_derivs``,
    ``_raw_sample`` and, for continuous outcomes, ``_xi_window``; the base
    class layers the constant-extension blend, log-likelihood plumbing and
    outcome-space expectations on top.
    """

    extension: ProbeExtension | None
    outcome_space: FiniteOutcomes | RealLine

    # -- raw family hooks ---------------------------------------------------

    def _raw_density(self, xi, nu) -> np.ndarray:
        raise NotImplementedError

    def _raw_density_derivs(self, xi, nu):
        """Default: central differences of the raw density (declared step)."""
        xi = np.asarray(xi, dtype=float)
        nu = np.asarray(nu, dtype=float)
        e = FD_STEP
        f = self._raw_density(xi, nu)
        fp = self._raw_density(xi, nu + e)
        fm = self._raw_density(xi, nu - e)
        return f, (fp - fm) / (2.0 * e), (fp - 2.0 * f + fm) / e**2

    def _raw_sample(self, nu: float, size: int, rng) -> np.ndarray:
        raise NotImplementedError

    def _xi_window(self, nus: np.ndarray) -> tuple[float, float]:
        raise NotImplementedError

    # -- densities with the extension blend ---------------------------------

    def density(self, xi, nu) -> np.ndarray:
        f = self._raw_density(xi, nu)
        if self.extension is None:
            return f
        b, _, _ = self.extension.blend(nu)
        # b*f + (1-b) is the same convex blend as 1 + b*(f-1) without the
        # catastrophic cancellation that kills tiny densities at b == 1
        return b * f + (1.0 - b)

    def density_derivs(self, xi, nu):
        f, f1, f2 = self._raw_density_derivs(xi, nu)
        if self.extension is None:
            return f, f1, f2
        b, b1, b2 = self.extension.blend(nu)
        g = b * f + (1.0 - b)
        g1 = b1 * (f - 1.0) + b * f1
        g2 = b2 * (f - 1.0) + 2.0 * b1 * f1 + b * f2
        return g, g1, g2

    def amplitude(self, xi, nu) -> np.ndarray:
        """Jump amplitude: the nonnegative square root of the density."""
        return np.sqrt(self.density(xi, nu))

    # -- log-likelihood ------------------------------------------------------

    def log_likelihood(self, nu: float, xi: float):
        """Return (l, dl/dnu, d2l/dnu2) at a single (nu, xi) pair."""
        f, f1, f2 = self.density_derivs(np.float64(xi), np.float64(nu))
        f = float(f)
        if f <= 0.0:
            raise ZeroDensityError(
                f"density vanishes at xi={xi}, nu={nu}; positivity is violated"
            )
        dl = float(f1) / f
        return float(np.log(f)), dl, float(f2) / f - dl * dl

    def loglik_values(self, nodes: np.ndarray, outcomes: np.ndarray) -> np.ndarray:
        """Matrix log f(xi_j | nu_i) with shape (len(outcomes), len(nodes))."""
        with np.errstate(divide="ignore"):
            return np.log(
                self.density(np.asarray(outcomes)[:, None], np.asarray(nodes)[None, :])
            )

    def loglik_node_sums(self, nodes: np.ndarray, outcomes: np.ndarray) -> np.ndarray:
        """Summed log-likelihood over outcomes, one entry per grid node."""
        nodes = np.asarray(nodes, dtype=float)
        outcomes = np.asarray(outcomes, dtype=float)
        if outcomes.size == 0:
            return np.zeros(nodes.size)
        if self.outcome_space.finite:
            vals, counts = np.unique(outcomes, return_counts=True)
            return counts @ self.loglik_values(nodes, vals)
        total = np.zeros(nodes.size)
        step = max(int(2e6 // max(nodes.size, 1)), 1)
        for start in range(0, outcomes.size, step):
            total += self.loglik_values(nodes, outcomes[start : start + step]).sum(axis=0)
        return total

    def loglik_sum_at(self, nu: float, outcomes: np.ndarray) -> float:
        return float(self.loglik_node_sums(np.asarray([nu]), outcomes)[0])

    # -- sampling ------------------------------------------------------------

    def sample(self, nu: float, size: int, rng) -> np.ndarray:
        if self.extension is not None and not bool(self.extension.contains(nu)):
            raise ProbeError(
                f"nu={nu} lies outside the extension interval of this probe"
            )
        return self._raw_sample(float(nu), int(size), rng)

    # -- expectations over outcomes -------------------------------------------

    def _quadrature(self, nus: np.ndarray):
        if self.outcome_space.finite:
            xq = np.asarray(self.outcome_space.values, dtype=float)
            return xq, np.ones_like(xq)
        lo, hi = self._xi_window(np.asarray(nus, dtype=float))
        return _composite_gauss(lo, hi, XI_QUAD_NODES)

    def _expect(self, nus: np.ndarray, quantities: Sequence[str], chunk: int = 16):
        """Outcome-space expectations at each nu.

        Supported quantities: ``norm`` = int f, ``score`` = E[dl],
        ``fisher`` = E[dl^2], ``d2`` = E[d2l].
        """
        nus = np.atleast_1d(np.asarray(nus, dtype=float))
        xq, wq = self._quadrature(nus)
        out = {q: np.empty(nus.size) for q in quantities}
        for start in range(0, nus.size, chunk):
            nu_blk = nus[start : start + chunk][None, :]
            f, f1, f2 = self.density_derivs(xq[:, None], nu_blk)
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(f > 0, f1 * f1 / np.where(f > 0, f, 1.0), 0.0)
            sl = slice(start, start + nu_blk.size)
            if "norm" in out:
                out["norm"][sl] = wq @ f
            if "score" in out:
                out["score"][sl] = wq @ f1
            if "fisher" in out:
                out["fisher"][sl] = wq @ ratio
            if "d2" in out:
                out["d2"][sl] = wq @ (f2 - ratio)
        return out

    def normalization(self, nus) -> np.ndarray:
        return self._expect(nus, ("norm",))["norm"]

    def score_mean(self, nus) -> np.ndarray:
        return self._expect(nus, ("score",))["score"]

    def fisher(self, nus) -> np.ndarray:
        return self._expect(nus, ("fisher",))["fisher"]

    def mean_d2_loglik(self, nus) -> np.ndarray:
        return self._expect(nus, ("d2",))["d2"]

    def expected_loglik(self, nu: float, nodes) -> np.ndarray:
        """E over outcomes at nu of log f(xi | node), one entry per node."""
        nodes = np.asarray(nodes, dtype=float)
        xq, wq = self._quadrature(np.asarray([nu]))
        f_nu = self.density(xq, np.float64(nu))
        w = wq * f_nu
        out = np.empty(nodes.size)
        chunk = max(int(2e6 // max(xq.size, 1)), 1)
        for start in range(0, nodes.size, chunk):
            blk = nodes[start : start + chunk]
            with np.errstate(divide="ignore"):
                logf = np.log(self.density(xq[:, None], blk[None, :]))
            out[start : start + blk.size] = w @ np.where(
                f_nu[:, None] > 0, logf, 0.0
            )
        return out

    # -- misc ------------------------------------------------------------------

    def with_extension(self, lo: float, hi: float, margin: float) -> "ProbeModel":
        return dataclasses.replace(
            self, extension=ProbeExtension(float(lo), float(hi), float(margin))
        )


# ---------------------------------------------------------------------------
# built-in families

@dataclass(frozen=True)
class GaussianReadout(ProbeModel):
    """Gaussian readout of the observable: xi ~ Normal(nu, sigma^2)."""

    sigma: float = 1.0
    extension: ProbeExtension | None = None

    def __post_init__(self):
        if self.sigma <= 0:
            raise ProbeError("sigma must be positive")

    @property
    def outcome_space(self) -> RealLine:
        return RealLine()

    def _raw_density(self, xi, nu):
        z = (np.asarray(xi, dtype=float) - np.asarray(nu, dtype=float)) / self.sigma
        return np.exp(-0.5 * z * z) / (np.sqrt(2.0 * np.pi) * self.sigma)

    def _raw_density_derivs(self, xi, nu):
        f = self._raw_density(xi, nu)
        u = (np.asarray(xi, dtype=float) - np.asarray(nu, dtype=float)) / self.sigma**2
        return f, f * u, f * (u * u - 1.0 / self.sigma**2)

    def loglik_values(self, nodes, outcomes):
        nodes = np.asarray(nodes, dtype=float)
        ext = self.extension
        if ext is not None and (np.any(nodes < ext.lo) or np.any(nodes > ext.hi)):
            return super().loglik_values(nodes, outcomes)  # blend zone reached
        d = np.asarray(outcomes, dtype=float)[:, None] - nodes[None, :]
        return -0.5 * (d / self.sigma) ** 2 - np.log(np.sqrt(2.0 * np.pi) * self.sigma)

    def _raw_sample(self, nu, size, rng):
        return nu + self.sigma * rng.standard_normal(size)

    def _xi_window(self, nus):
        pad = GAUSS_WINDOW_SIGMAS * self.sigma
        return float(nus.min() - pad), float(nus.max() + pad)


@dataclass(frozen=True)
class BinaryPhase(ProbeModel):
    """Two-outcome phase probe: f(0|nu)=cos^2(phi/2), f(1|nu)=sin^2(phi/2).

    The phase is affine in the observable, ``phi = offset + slope * nu``.
    With the identity map the family is strictly positive for spectra
    inside (0, pi); ``embedded`` builds the affine map sending a spectrum
    hull into a safe phase range.
    """

    offset: float = 0.0
    slope: float = 1.0
    extension: ProbeExtension | None = None

    @classmethod
    def embedded(
        cls,
        source_lo: float,
        source_hi: float,
        target_lo: float = np.pi / 4,
        target_hi: float = 3 * np.pi / 4,
    ) -> "BinaryPhase":
        """Map the spectrum hull [source_lo, source_hi] to a phase range."""
        if source_hi <= source_lo:
            raise ProbeError("embedding source interval is degenerate")
        if not (0.0 < target_lo < target_hi < np.pi):
            raise ProbeError("embedding target must sit strictly inside (0, pi)")
        slope = (target_hi - target_lo) / (source_hi - source_lo)
        return cls(offset=target_lo - slope * source_lo, slope=slope)

    @property
    def outcome_space(self) -> FiniteOutcomes:
        return FiniteOutcomes((0.0, 1.0))

    def _phase(self, nu):
        return self.offset + self.slope * np.asarray(nu, dtype=float)

    def _raw_density(self, xi, nu):
        phi = self._phase(nu)
        f0 = np.cos(0.5 * phi) ** 2
        return np.where(np.asarray(xi, dtype=float) < 0.5, f0, 1.0 - f0)

    def _raw_density_derivs(self, xi, nu):
        phi = self._phase(nu)
        is0 = np.asarray(xi, dtype=float) < 0.5
        f0 = np.cos(0.5 * phi) ** 2
        d0 = -0.5 * self.slope * np.sin(phi)
        dd0 = -0.5 * self.slope**2 * np.cos(phi)
        return (
            np.where(is0, f0, 1.0 - f0),
            np.where(is0, d0, -d0),
            np.where(is0, dd0, -dd0),
        )

    def _raw_sample(self, nu, size, rng):
        p1 = float(np.sin(0.5 * self._phase(nu)) ** 2)
        return (rng.random(size) < p1).astype(float)


@dataclass(frozen=True)
class TabulatedProbe(ProbeModel):
    """Probe family given by a value table over (outcome, nu) points.

    For finite outcome spaces ``values[o, j] = f(outcomes[o] | nu_grid[j])``;
    for continuous outcomes ``values[q, j] = f(xi_grid[q] | nu_grid[j])``,
    interpolated linearly in xi and by local quadratic interpolation in nu.
    Derivatives are central differences with the declared step; sampling
    uses exact inversion (finite) or rejection against a per-cell constant
    envelope (continuous).
    """

    nu_grid: tuple[float, ...] = ()
    values: tuple = ()
    outcomes: tuple[float, ...] | None = None
    xi_grid: tuple[float, ...] | None = None
    extension: ProbeExtension | None = None

    def __post_init__(self):
        if np.iscomplexobj(np.asarray(self.values)):
            raise ProbeError(
                "complex amplitudes are not supported: densities must be "
                "real so amplitudes are their nonnegative square roots"
            )
        table = np.asarray(self.values, dtype=float)
        if np.any(table < 0):
            raise ProbeError("tabulated densities must be nonnegative")
        if (self.outcomes is None) == (self.xi_grid is None):
            raise ProbeError("provide exactly one of outcomes or xi_grid")
        if len(self.nu_grid) < 3:
            raise ProbeError("nu_grid needs at least 3 points")

    @property
    def outcome_space(self):
        if self.outcomes is not None:
            return FiniteOutcomes(tuple(float(v) for v in self.outcomes))
        return RealLine()

    @property
    def _table(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    @property
    def _nus(self) -> np.ndarray:
        return np.asarray(self.nu_grid, dtype=float)

    def _rows_at(self, nu):
        """Quadratic interpolation of table rows in nu; shape (R, *nu.shape)."""
        nus = self._nus
        nu = np.asarray(nu, dtype=float)
        j = np.clip(np.searchsorted(nus, nu) - 1, 1, nus.size - 2)
        x0, x1, x2 = nus[j - 1], nus[j], nus[j + 1]
        w0 = (nu - x1) * (nu - x2) / ((x0 - x1) * (x0 - x2))
        w1 = (nu - x0) * (nu - x2) / ((x1 - x0) * (x1 - x2))
        w2 = (nu - x0) * (nu - x1) / ((x2 - x0) * (x2 - x1))
        t = self._table
        return w0 * t[:, j - 1] + w1 * t[:, j] + w2 * t[:, j + 1]

    def _value_at(self, xi, nu):
        shape = xi.shape
        xi = np.atleast_1d(xi).ravel()
        nu = np.atleast_1d(nu).ravel()
        rows = self._rows_at(nu)  # (R, M)
        cols = np.arange(xi.size)
        if self.outcomes is not None:
            outs = np.asarray(self.outcomes, dtype=float)
            idx = np.argmin(np.abs(xi[:, None] - outs[None, :]), axis=1)
            vals = rows[idx, cols]
        else:
            grid = np.asarray(self.xi_grid, dtype=float)
            q = np.clip(np.searchsorted(grid, xi) - 1, 0, grid.size - 2)
            t = np.clip((xi - grid[q]) / (grid[q + 1] - grid[q]), 0.0, 1.0)
            vals = (1.0 - t) * rows[q, cols] + t * rows[q + 1, cols]
        return vals.reshape(shape)

    def _raw_density(self, xi, nu):
        xi, nu = np.broadcast_arrays(
            np.asarray(xi, dtype=float), np.asarray(nu, dtype=float)
        )
        return np.clip(self._value_at(xi, nu), 0.0, None)

    def _raw_sample(self, nu, size, rng):
        if self.outcomes is not None:
            probs = np.clip(self._rows_at(np.float64(nu)), 0.0, None)
            probs = probs / probs.sum()
            return np.asarray(self.outcomes, dtype=float)[
                rng.choice(len(self.outcomes), size=size, p=probs)
            ]
        grid = np.asarray(self.xi_grid, dtype=float)
        rows = np.clip(self._rows_at(np.float64(nu)), 0.0, None)
        env = np.maximum(rows[:-1], rows[1:]) * (1.0 + 1e-12)  # exact for linear interp
        cell_mass = env * np.diff(grid)
        cdf = np.cumsum(cell_mass) / cell_mass.sum()
        out = np.empty(size)
        filled = 0
        while filled < size:
            m = 2 * (size - filled) + 16
            cells = np.searchsorted(cdf, rng.random(m))
            xi = grid[cells] + rng.random(m) * np.diff(grid)[cells]
            accept = rng.random(m) * env[cells] <= self._raw_density(xi, np.float64(nu))
            take = xi[accept][: size - filled]
            out[filled : filled + take.size] = take
            filled += take.size
        return out

    def _xi_window(self, nus):
        grid = np.asarray(self.xi_grid, dtype=float)
        return float(grid[0]), float(grid[-1])


# ---------------------------------------------------------------------------
# operations (module-level faces of the probe contract)

def log_likelihood(probe: ProbeModel, nu: float, xi: float):
    """Triple (l, dl, d2l) of the log-likelihood at one (nu, xi) point."""
    return probe.log_likelihood(nu, xi)


def sample_outcome(probe: ProbeModel, nu: float, rng, size: int = 1) -> np.ndarray:
    """Draw outcomes from the law with parameter nu using the given rng."""
    return probe.sample(nu, size, rng)


def fisher_information(probe: ProbeModel, nu) -> np.ndarray | float:
    """Expected squared score E[(dl)^2]; positive under the assumptions."""
    out = probe.fisher(nu)
    result = out if np.ndim(nu) else float(out[0])
    if np.any(~np.isfinite(out)) or np.any(out <= 0):
        raise ProbeError(f"Fisher information is not finite-positive at nu={nu}")
    return result


def relative_entropy(probe: ProbeModel, nu: float, region_nodes) -> float:
    """Minimal KL divergence from the law at nu to laws over region nodes.

    ``region_nodes`` is the region as a set of grid nodes; minimization is
    exhaustive over them.  Nonnegative, and zero when nu is in the region.
    """
    region_nodes = np.atleast_1d(np.asarray(region_nodes, dtype=float))
    if region_nodes.size == 0:
        raise ProbeError("relative entropy needs a nonempty region")
    xq, wq = probe._quadrature(np.asarray([nu]))
    f_nu = probe.density(xq, np.float64(nu))
    with np.errstate(divide="ignore", invalid="ignore"):
        log_f_nu = np.where(f_nu > 0, np.log(np.where(f_nu > 0, f_nu, 1.0)), 0.0)
    base = float(np.dot(wq, f_nu * log_f_nu))
    best = np.inf
    chunk = max(int(2e6 // max(xq.size, 1)), 1)
    for start in range(0, region_nodes.size, chunk):
        blk = region_nodes[start : start + chunk]
        f_blk = probe.density(xq[:, None], blk[None, :])
        with np.errstate(divide="ignore"):
            log_blk = np.log(f_blk)
        cross = (wq * f_nu) @ np.where(f_nu[:, None] > 0, log_blk, 0.0)
        best = min(best, float(base - cross.max()))
    return best


# ---------------------------------------------------------------------------
# assumption validation

@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    passed: bool
    worst_value: float
    worst_location: str
    threshold: float
    note: str = ""

    def summary(self) -> str:
        status = "pass" if self.passed else "FAIL"
        line = (
            f"{self.name}: {status} (worst {self.worst_value:.3e} "
            f"vs {self.threshold:.1e} at {self.worst_location})"
        )
        return line + (f" [{self.note}]" if self.note else "")


@dataclass(frozen=True)
class ProbeValidationReport:
    checks: tuple[AssumptionCheck, ...]
    caveats: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> AssumptionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def summary(self) -> str:
        lines = [c.summary() for c in self.checks]
        lines += [f"caveat: {c}" for c in self.caveats]
        return "\n".join(lines)


def validate_probe(
    probe: ProbeModel,
    model,
    normalization_tol: float = 1e-8,
    identifiability_threshold: float = 1e-6,
    derivative_tol: float = 1e-6,
    score_tol: float = 1e-6,
    n_derivative_pairs: int = 100,
    seed: int = 7,
) -> ProbeValidationReport:
    """Check the estimation-theoretic assumptions on the model grid.

    Verifies normalization, strict positivity, pairwise identifiability in
    L1, dominance of the log-likelihood envelope, consistency of analytic
    and finite-difference derivatives, mean-zero score, and strictly
    positive expected curvature.  Always returns a report; nothing raises.
    """
    nodes = model.nodes
    checks: list[AssumptionCheck] = []
    caveats: list[str] = []

    # normalization: int f(.|nu) dmu = 1 on the spectrum
    norms = probe.normalization(nodes)
    idx = int(np.argmax(np.abs(norms - 1.0)))
    checks.append(
        AssumptionCheck(
            "normalization",
            bool(abs(norms[idx] - 1.0) <= normalization_tol),
            float(abs(norms[idx] - 1.0)),
            f"nu={nodes[idx]:.6g}",
            normalization_tol,
        )
    )

    # coarse outcome rule shared by the positivity and identifiability checks
    if probe.outcome_space.finite:
        xs = np.asarray(probe.outcome_space.values, dtype=float)
        wq_id = np.ones(xs.size)
    else:
        xs, wq_id = _composite_gauss(*probe._xi_window(nodes), IDENTIFIABILITY_NODES)
    fmat = probe.density(xs[:, None], nodes[None, :])

    qi, ni = np.unravel_index(int(np.argmin(fmat)), fmat.shape)
    checks.append(
        AssumptionCheck(
            "positivity",
            bool(fmat.min() > 0.0),
            float(fmat.min()),
            f"xi={xs[qi]:.6g}, nu={nodes[ni]:.6g}",
            0.0,
        )
    )

    # identifiability: pairwise L1 distances above the threshold
    worst = np.inf
    worst_pair = (0, 0)
    for i in range(nodes.size - 1):
        d = wq_id @ np.abs(fmat[:, i + 1 :] - fmat[:, i : i + 1])
        j = int(np.argmin(d))
        if d[j] < worst:
            worst, worst_pair = float(d[j]), (i, i + 1 + j)
    checks.append(
        AssumptionCheck(
            "identifiability",
            bool(worst > identifiability_threshold),
            worst,
            f"nu={nodes[worst_pair[0]]:.6g} vs nu={nodes[worst_pair[1]]:.6g}",
            identifiability_threshold,
        )
    )

    # dominance: E_nu[ sup_nu' |l(nu'|xi)| ] finite for all grid nu
    xq, wq = probe._quadrature(nodes)
    sup_abs = np.zeros(xq.size)
    dens_at = np.zeros((xq.size, nodes.size))
    step = max(int(2e6 // max(nodes.size, 1)), 1)
    for start in range(0, xq.size, step):
        blk = probe.density(xq[start : start + step, None], nodes[None, :])
        dens_at[start : start + step] = blk
        with np.errstate(divide="ignore"):
            sup_abs[start : start + step] = np.abs(np.log(blk)).max(axis=1)
    with np.errstate(invalid="ignore"):  # inf * 0 marks a genuine failure
        dom = (wq * sup_abs) @ dens_at
    idx = int(np.argmax(dom))
    checks.append(
        AssumptionCheck(
            "dominance",
            bool(np.all(np.isfinite(dom))),
            float(dom[idx]),
            f"nu={nodes[idx]:.6g}",
            np.inf,
        )
    )
    if isinstance(probe, TabulatedProbe):
        caveats.append(
            "dominance is certified on the grid only; off-grid behaviour of a "
            "tabulated family is interpolation, not evidence"
        )
        caveats.append(
            "derivatives of a tabulated family are finite differences of the "
            "interpolated table"
        )

    # differentiability: analytic derivatives match central differences
    rng = np.random.default_rng(seed)
    lo, hi = model.hull
    worst_d = 0.0
    worst_where = ""
    ok = True
    for _ in range(n_derivative_pairs):
        nu = float(rng.uniform(lo, hi))
        xi = float(probe.sample(nu, 1, rng)[0])
        try:
            _, dl, _ = probe.log_likelihood(nu, xi)
        except ZeroDensityError:
            continue
        e = FD_STEP
        lp = probe.log_likelihood(nu + e, xi)[0]
        lm = probe.log_likelihood(nu - e, xi)[0]
        err = abs((lp - lm) / (2 * e) - dl)
        if err > worst_d:
            worst_d, worst_where = err, f"nu={nu:.6g}, xi={xi:.6g}"
        ok = ok and (err <= derivative_tol)
    checks.append(
        AssumptionCheck(
            "differentiability", ok, worst_d, worst_where or "n/a", derivative_tol
        )
    )

    # score mean-zero and strictly positive curvature
    stats = probe._expect(nodes, ("score", "d2"))
    idx = int(np.argmax(np.abs(stats["score"])))
    checks.append(
        AssumptionCheck(
            "score-mean-zero",
            bool(abs(stats["score"][idx]) <= score_tol),
            float(abs(stats["score"][idx])),
            f"nu={nodes[idx]:.6g}",
            score_tol,
        )
    )
    idx = int(np.argmax(stats["d2"]))
    checks.append(
        AssumptionCheck(
            "positive-curvature",
            bool(np.all(stats["d2"] < 0.0)),
            float(-stats["d2"][idx]),
            f"nu={nodes[idx]:.6g}",
            0.0,
        )
    )

    return ProbeValidationReport(tuple(checks), tuple(caveats))


def bind_extension(probe: ProbeModel, model, spacings: float = 3.0) -> ProbeModel:
    """Attach the constant-extension interval: hull plus a margin of grid spacings."""
    lo, hi = model.hull
    return probe.with_extension(lo, hi, spacings * model.min_spacing)


# ---------------------------------------------------------------------------
# configuration

def probe_from_config(config: dict) -> ProbeModel:
    """Build a probe from its JSON declaration (kind plus parameters)."""
    kind = config.get("kind")
    if kind == "gaussian-readout":
        return GaussianReadout(sigma=float(config.get("sigma", 1.0)))
    if kind == "binary-phase":
        embed = config.get("embed")
        if embed is None:
            return BinaryPhase(
                offset=float(config.get("offset", 0.0)),
                slope=float(config.get("slope", 1.0)),
            )
        source = embed["source"] if isinstance(embed, dict) else embed
        target = (
            embed.get("target", (np.pi / 4, 3 * np.pi / 4))
            if isinstance(embed, dict)
            else (np.pi / 4, 3 * np.pi / 4)
        )
        return BinaryPhase.embedded(source[0], source[1], target[0], target[1])
    if kind == "tabulated":
        return TabulatedProbe(
            nu_grid=tuple(config["nu_grid"]),
            values=tuple(map(tuple, config["values"])),
            outcomes=tuple(config["outcomes"]) if "outcomes" in config else None,
            xi_grid=tuple(config["xi_grid"]) if "xi_grid" in config else None,
        )
    raise ProbeError(f"unknown probe kind: {kind!r}")

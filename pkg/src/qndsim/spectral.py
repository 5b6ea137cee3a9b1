"""Spectral models: the measured observable, its quadrature grid, and states.

An observable with mixed discrete/continuous spectrum is represented by a
finite quadrature grid.  Atoms of the spectrum appear as grid nodes with
their exact weights; each closed interval of absolutely continuous spectrum
carries a composite midpoint rule against its spectral density ``h``.  A
state is a matrix-valued kernel over the grid, and traces / norms are taken
on the mass-weighted matrix, so the discrete trace of a kernel is the
quadrature image of the continuum trace formula
``tr(rho) = integral of tr_block(rho(nu, nu)) h(nu) dnu  +  atom sums``.

Numeric contracts
-----------------
* Quadrature: composite midpoint, uniform spacing per interval.  Nodes are
  cell midpoints, so interval endpoints never appear as grid nodes.
* Node mass: ``mass[i] = weights[i] * hvals[i]``, with ``hvals = 1`` at
  atoms so that an atom's mass is its weight itself.
* Region snapping: interval-region endpoints snap to the nearest cell
  boundary of the interval they land in; a point region selects the atom
  it names, or stands for the grid cell containing it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

__all__ = [
    "SpectralModel",
    "SpectralModelError",
    "RegionError",
    "StateKernel",
    "SpectralWeights",
    "StateValidationReport",
    "build_spectral_model",
    "pure_state",
    "diagonal_state",
    "spectral_probability",
    "validate_state",
    "nearest_node",
    "model_to_dict",
    "model_from_dict",
    "state_to_dict",
    "state_from_dict",
]


class SpectralModelError(ValueError):
    """Raised when a spectral model cannot be constructed as requested."""


class RegionError(ValueError):
    """Raised when a region does not intersect the spectrum."""


# ---------------------------------------------------------------------------
# spectral densities

def _h_from_spec(spec) -> tuple[Callable[[np.ndarray], np.ndarray], dict]:
    """Resolve a density declaration to a vectorized callable.

    Accepts a positive scalar, a callable, or a JSON-compatible dict with
    either a built-in ``name`` ("uniform", "linear", "cosine") or a
    ``table`` of (nu, value) pairs interpolated linearly.
    """
    if spec is None:
        spec = {"name": "uniform", "value": 1.0}
    if np.isscalar(spec) and not isinstance(spec, (dict, str)):
        value = float(spec)
        return (lambda nu: np.full_like(np.asarray(nu, dtype=float), value)), {
            "name": "uniform",
            "value": value,
        }
    if callable(spec):
        return (lambda nu: np.asarray(spec(np.asarray(nu, dtype=float)), dtype=float)), {
            "name": "custom"
        }
    if not isinstance(spec, dict):
        raise SpectralModelError(f"unrecognized density spec: {spec!r}")

    if "table" in spec:
        table = np.asarray(spec["table"], dtype=float)
        if table.ndim != 2 or table.shape[1] != 2:
            raise SpectralModelError("density table must be (nu, value) pairs")
        xs, ys = table[:, 0], table[:, 1]
        order = np.argsort(xs)
        xs, ys = xs[order], ys[order]
        fn = lambda nu: np.interp(np.asarray(nu, dtype=float), xs, ys)  # noqa: E731
        return fn, {"table": table[order].tolist()}

    name = spec.get("name", "uniform")
    if name == "uniform":
        value = float(spec.get("value", 1.0))
        return (lambda nu: np.full_like(np.asarray(nu, dtype=float), value)), {
            "name": "uniform",
            "value": value,
        }
    if name == "linear":
        a = float(spec.get("intercept", 0.0))
        b = float(spec.get("slope", 1.0))
        return (lambda nu: a + b * np.asarray(nu, dtype=float)), {
            "name": "linear",
            "intercept": a,
            "slope": b,
        }
    if name == "cosine":
        offset = float(spec.get("offset", 1.0))
        amp = float(spec.get("amplitude", 0.5))
        freq = float(spec.get("frequency", np.pi))
        phase = float(spec.get("phase", 0.0))
        fn = lambda nu: offset + amp * np.cos(freq * np.asarray(nu, dtype=float) + phase)  # noqa: E731
        return fn, {
            "name": "cosine",
            "offset": offset,
            "amplitude": amp,
            "frequency": freq,
            "phase": phase,
        }
    raise SpectralModelError(f"unknown density name: {name!r}")


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# the model

@dataclass(frozen=True, eq=False)
class SpectralModel:
    """Discretized spectrum of the measured observable.

    Attributes
    ----------
    atoms : tuple of (position, weight)
        Discrete spectral atoms; weights are strictly positive.
    intervals : tuple of (lo, hi)
        Closed, pairwise disjoint intervals of absolutely continuous
        spectrum.
    nodes, weights, hvals : ndarray
        Sorted grid nodes, their quadrature weights and density values.
        At atoms ``weights`` holds the atom weight and ``hvals`` is 1.
    is_atom : ndarray of bool
        Marks atom nodes.
    multiplicity : int
        Block size n of matrix-valued kernels over the grid.
    """

    atoms: tuple[tuple[float, float], ...]
    intervals: tuple[tuple[float, float], ...]
    nodes: np.ndarray
    weights: np.ndarray
    hvals: np.ndarray
    is_atom: np.ndarray
    multiplicity: int
    h_spec: dict
    h_fn: Callable[[np.ndarray], np.ndarray]
    interval_edges: tuple[np.ndarray, ...]
    nodes_per_interval: int
    quadrature_errors: tuple[float, ...]

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def mass(self) -> np.ndarray:
        """Discrete measure of each node: quadrature weight times density."""
        return self.weights * self.hvals

    @property
    def hull(self) -> tuple[float, float]:
        """Smallest closed interval containing the whole spectrum."""
        lo = min([a for a, _ in self.atoms] + [a for a, _ in self.intervals])
        hi = max([a for a, _ in self.atoms] + [b for _, b in self.intervals])
        return lo, hi

    @property
    def min_spacing(self) -> float:
        """Smallest interval cell width; hull width if there are no intervals."""
        if self.intervals:
            return min(
                (b - a) / self.nodes_per_interval for a, b in self.intervals
            )
        lo, hi = self.hull
        return max(hi - lo, 1.0)

    def interval_index(self, nu: float) -> int | None:
        """Index of the interval containing ``nu``, or None."""
        for j, (a, b) in enumerate(self.intervals):
            if a <= nu <= b:
                return j
        return None

    def interval_node_range(self, j: int) -> slice:
        """Slice of grid indices belonging to interval ``j``."""
        a, b = self.intervals[j]
        mask = (~self.is_atom) & (self.nodes >= a) & (self.nodes <= b)
        idx = np.nonzero(mask)[0]
        return slice(int(idx[0]), int(idx[-1]) + 1)

    def region_mask(self, region) -> np.ndarray:
        """Boolean node mask of a region after snapping.

        ``region`` is an iterable of components, each either a point
        (scalar) or an interval (pair).  Interval endpoints snap to the
        nearest cell boundary; atoms are selected by closed containment.
        A point selects the atom it names exactly (within 1e-9 of the
        hull width) or the grid cell containing it.
        """
        mask = np.zeros(self.size, dtype=bool)
        lo_h, hi_h = self.hull
        scale = max(hi_h - lo_h, 1.0)
        hit_any = False
        for comp in region:
            if np.isscalar(comp):
                p = float(comp)
                d = np.abs(self.nodes - p)
                d[~self.is_atom] = np.inf
                if self.is_atom.any() and d.min() <= 1e-9 * scale:
                    mask[int(np.argmin(d))] = True
                    hit_any = True
                    continue
                j = self.interval_index(p)
                if j is None:
                    raise RegionError(f"point {p} lies outside the spectrum")
                edges = self.interval_edges[j]
                cell = int(np.clip(np.searchsorted(edges, p) - 1, 0, edges.size - 2))
                sl = self.interval_node_range(j)
                mask[sl.start + cell] = True
                hit_any = True
            else:
                r0, r1 = float(comp[0]), float(comp[1])
                if r1 < r0:
                    raise RegionError(f"empty region component ({r0}, {r1})")
                # atoms: closed containment, no snapping
                sel = self.is_atom & (self.nodes >= r0) & (self.nodes <= r1)
                # interval nodes: snap each endpoint to the nearest cell edge
                for j, _ in enumerate(self.intervals):
                    edges = self.interval_edges[j]
                    if r1 < edges[0] or r0 > edges[-1]:
                        continue
                    s0 = edges[np.argmin(np.abs(edges - max(r0, edges[0])))]
                    s1 = edges[np.argmin(np.abs(edges - min(r1, edges[-1])))]
                    sl = self.interval_node_range(j)
                    sel[sl] |= (self.nodes[sl] > s0) & (self.nodes[sl] < s1)
                if sel.any():
                    hit_any = True
                elif r1 >= lo_h and r0 <= hi_h:
                    hit_any = True  # inside hull but between components
                mask |= sel
        if not hit_any:
            raise RegionError("region lies outside the grid hull")
        return mask


def build_spectral_model(
    atoms: Sequence[tuple[float, float]] = (),
    intervals: Sequence[tuple[float, float]] = (),
    h=None,
    nodes_per_interval: int = 64,
    multiplicity: int = 1,
    quadrature_tol: float = 1e-3,
) -> SpectralModel:
    """Build a spectral model with a composite-midpoint quadrature grid.

    Parameters
    ----------
    atoms : sequence of (position, weight)
        Discrete spectrum; weights must be positive.
    intervals : sequence of (lo, hi)
        Closed disjoint intervals of absolutely continuous spectrum.
    h : scalar, callable or dict
        Spectral density on the intervals; must be strictly positive on
        interval interiors.  Defaults to the uniform density 1.
    nodes_per_interval : int
        Midpoint nodes per interval (>= 2).
    multiplicity : int
        Block size of matrix-valued kernels (>= 1).
    quadrature_tol : float
        Maximum allowed relative error of the midpoint mass of each
        interval against an adaptive reference integral.
    """
    atoms = tuple((float(p), float(w)) for p, w in atoms)
    intervals = tuple((float(a), float(b)) for a, b in sorted(intervals))
    if not atoms and not intervals:
        raise SpectralModelError("empty spectrum: no atoms and no intervals")
    if intervals and nodes_per_interval < 2:
        raise SpectralModelError("nodes_per_interval must be at least 2")
    if multiplicity < 1:
        raise SpectralModelError("multiplicity must be a positive integer")
    for p, w in atoms:
        if w <= 0:
            raise SpectralModelError(f"atom at {p} has nonpositive weight {w}")
    for (a, b) in intervals:
        if b <= a:
            raise SpectralModelError(f"degenerate interval [{a}, {b}]")
    for (a0, b0), (a1, b1) in zip(intervals, intervals[1:]):
        if a1 <= b0:
            raise SpectralModelError(
                f"intervals [{a0}, {b0}] and [{a1}, {b1}] overlap"
            )
    for p, _ in atoms:
        for a, b in intervals:
            if a <= p <= b:
                raise SpectralModelError(
                    f"atom at {p} lies inside interval [{a}, {b}]"
                )

    h_fn, h_spec = _h_from_spec(h)

    node_list: list[float] = []
    weight_list: list[float] = []
    hval_list: list[float] = []
    atom_list: list[bool] = []
    edges_list: list[np.ndarray] = []
    quad_errors: list[float] = []

    for p, w in atoms:
        node_list.append(p)
        weight_list.append(w)
        hval_list.append(1.0)
        atom_list.append(True)

    for a, b in intervals:
        edges = np.linspace(a, b, nodes_per_interval + 1)
        mids = 0.5 * (edges[:-1] + edges[1:])
        hv = np.asarray(h_fn(mids), dtype=float)
        if np.any(hv <= 0):
            bad = mids[np.argmin(hv)]
            raise SpectralModelError(
                f"density is nonpositive at nu={bad} inside [{a}, {b}]"
            )
        dx = (b - a) / nodes_per_interval
        if "table" in h_spec:
            # trapezoid over the knots is exact for a linear interpolant
            knots = np.asarray([row[0] for row in h_spec["table"]], dtype=float)
            pts = np.unique(np.concatenate([[a, b], knots[(knots > a) & (knots < b)]]))
            ref = float(np.trapezoid(h_fn(pts), pts))
        else:
            ref, _ = integrate.quad(
                lambda x: float(h_fn(np.asarray([x]))[0]), a, b, limit=200
            )
        err = abs(dx * hv.sum() - ref) / max(abs(ref), 1e-300)
        if err > quadrature_tol:
            raise SpectralModelError(
                f"midpoint mass of [{a}, {b}] off by {err:.2e} (> {quadrature_tol:.0e}); "
                "increase nodes_per_interval or quadrature_tol"
            )
        quad_errors.append(err)
        node_list.extend(mids.tolist())
        weight_list.extend([dx] * nodes_per_interval)
        hval_list.extend(hv.tolist())
        atom_list.extend([False] * nodes_per_interval)
        edges_list.append(_readonly(edges))

    order = np.argsort(node_list, kind="stable")
    nodes = _readonly(np.asarray(node_list, dtype=float)[order])
    if np.any(np.diff(nodes) <= 0):
        raise SpectralModelError("grid nodes are not strictly increasing")
    return SpectralModel(
        atoms=atoms,
        intervals=intervals,
        nodes=nodes,
        weights=_readonly(np.asarray(weight_list, dtype=float)[order]),
        hvals=_readonly(np.asarray(hval_list, dtype=float)[order]),
        is_atom=_readonly(np.asarray(atom_list, dtype=bool)[order]),
        multiplicity=int(multiplicity),
        h_spec=h_spec,
        h_fn=h_fn,
        interval_edges=tuple(edges_list),
        nodes_per_interval=int(nodes_per_interval),
        quadrature_errors=tuple(quad_errors),
    )


def nearest_node(model: SpectralModel, nu: float) -> int:
    """Index of the grid node closest to ``nu``."""
    return int(np.argmin(np.abs(model.nodes - nu)))


# ---------------------------------------------------------------------------
# states

class StateKernel:
    """Density matrix as an n x n block kernel over a grid.

    ``values`` has shape (N, N, n, n); blocks satisfy Hermitian symmetry
    ``K[i, j] == K[j, i]*`` and the mass-weighted matrix is positive
    semidefinite with unit trace.  The grid only needs ``nodes`` and
    ``mass`` arrays, so kernels also live on rescaled windows.
    """

    def __init__(self, values: np.ndarray, grid):
        values = np.asarray(values, dtype=complex)
        n = getattr(grid, "multiplicity", 1)
        if values.ndim == 2:
            values = values[:, :, None, None]
        if values.ndim != 4 or values.shape[0] != values.shape[1]:
            raise ValueError("kernel values must have shape (N, N, n, n)")
        if values.shape[0] != grid.nodes.size or values.shape[2] != n:
            raise ValueError("kernel shape does not match its grid")
        values = np.ascontiguousarray(values)
        values.setflags(write=False)
        self.values = values
        self.grid = grid

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def block_size(self) -> int:
        return self.values.shape[2]

    @property
    def matrix(self) -> np.ndarray:
        """(N, N) view of a multiplicity-one kernel."""
        if self.block_size != 1:
            raise ValueError("matrix view is only defined for multiplicity 1")
        return self.values[:, :, 0, 0]

    def block_diagonal(self) -> np.ndarray:
        """Diagonal blocks K[i, i], shape (N, n, n)."""
        return np.einsum("iiab->iab", self.values)

    def block_traces(self) -> np.ndarray:
        """Per-node block traces tr_block(K[i, i]), shape (N,), real part."""
        return np.einsum("iiaa->i", self.values).real

    def trace(self) -> float:
        """Discrete trace: sum of mass-weighted diagonal block traces."""
        return float(np.dot(self.grid.mass, self.block_traces()))

    def weighted_matrix(self) -> np.ndarray:
        """Mass-weighted (N*n, N*n) matrix; the home of PSD and trace norms."""
        s = np.sqrt(self.grid.mass)
        m = self.values * s[:, None, None, None] * s[None, :, None, None]
        nn = self.size * self.block_size
        return m.transpose(0, 2, 1, 3).reshape(nn, nn)

    def normalized(self) -> "StateKernel":
        return StateKernel(self.values / self.trace(), self.grid)


def pure_state(model, psi) -> StateKernel:
    """Rank-one state from a wave function on the grid.

    ``psi`` may be a callable of nu, an (N,) array, or an (N, n) array for
    multiplicity n; it is normalized against the grid mass.
    """
    n = getattr(model, "multiplicity", 1)
    if callable(psi):
        psi = np.asarray(psi(model.nodes), dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim == 1:
        psi = psi[:, None] if n == 1 else np.tile(psi[:, None], (1, n))
    norm2 = float(np.sum(model.mass * np.sum(np.abs(psi) ** 2, axis=1)))
    if norm2 <= 0:
        raise ValueError("wave function has zero norm on the grid")
    psi = psi / np.sqrt(norm2)
    values = np.einsum("ia,jb->ijab", psi, psi.conj())
    return StateKernel(values, model)


def diagonal_state(model, node_probs) -> StateKernel:
    """Diagonal (classical) state whose spectral weights are ``node_probs``.

    ``node_probs`` are per-node probabilities summing to 1; the kernel
    diagonal is ``probs / mass`` so the discrete trace is exactly 1.
    """
    p = np.asarray(node_probs, dtype=float)
    if p.shape != (model.size,):
        raise ValueError("node_probs must have one entry per grid node")
    if np.any(p < 0):
        raise ValueError("node probabilities must be nonnegative")
    total = p.sum()
    if total <= 0:
        raise ValueError("node probabilities sum to zero")
    p = p / total
    n = model.multiplicity
    values = np.zeros((model.size, model.size, n, n), dtype=complex)
    diag = p / model.mass / n
    for a in range(n):
        values[np.arange(model.size), np.arange(model.size), a, a] = diag
    return StateKernel(values, model)


@dataclass(frozen=True, eq=False)
class SpectralWeights:
    """Per-node probabilities of the observable's value (sum to 1)."""

    values: np.ndarray
    grid: SpectralModel

    @classmethod
    def from_state(cls, state: StateKernel) -> "SpectralWeights":
        w = state.grid.mass * state.block_traces()
        w = np.clip(w, 0.0, None)
        return cls(_readonly(w / w.sum()), state.grid)

    def mean(self) -> float:
        return float(np.dot(self.values, self.grid.nodes))


def spectral_probability(state: StateKernel, region) -> float:
    """Probability that the observable's value lies in ``region``.

    Sums mass-weighted diagonal block traces over the region's nodes
    after snapping; see ``SpectralModel.region_mask`` for the rule.
    """
    mask = state.grid.region_mask(region)
    p = float(np.dot(state.grid.mass[mask], state.block_traces()[mask]))
    return p


# ---------------------------------------------------------------------------
# validation

@dataclass(frozen=True)
class StateValidationReport:
    hermiticity_defect: float
    min_weighted_eigenvalue: float
    trace_defect: float
    hermiticity_tol: float
    psd_tol: float
    trace_tol: float

    @property
    def passed(self) -> bool:
        return (
            self.hermiticity_defect <= self.hermiticity_tol
            and self.min_weighted_eigenvalue >= -self.psd_tol
            and self.trace_defect <= self.trace_tol
        )

    def summary(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (
            f"state validation: {status} "
            f"(hermiticity {self.hermiticity_defect:.3e}, "
            f"min eigenvalue {self.min_weighted_eigenvalue:.3e}, "
            f"trace defect {self.trace_defect:.3e})"
        )


def validate_state(
    state: StateKernel,
    hermiticity_tol: float = 1e-10,
    psd_tol: float = 1e-10,
    trace_tol: float = 1e-8,
) -> StateValidationReport:
    """Report Hermiticity, positivity and trace defects of a kernel."""
    k = state.values
    herm = float(np.max(np.abs(k - k.conj().transpose(1, 0, 3, 2))))
    m = state.weighted_matrix()
    m = 0.5 * (m + m.conj().T)
    eigs = np.linalg.eigvalsh(m)
    return StateValidationReport(
        hermiticity_defect=herm,
        min_weighted_eigenvalue=float(eigs.min()),
        trace_defect=abs(state.trace() - 1.0),
        hermiticity_tol=hermiticity_tol,
        psd_tol=psd_tol,
        trace_tol=trace_tol,
    )


# ---------------------------------------------------------------------------
# serialization (JSON-compatible trees)

def model_to_dict(model: SpectralModel) -> dict:
    h_spec = model.h_spec
    if h_spec.get("name") == "custom":
        # tabulate an opaque callable at the grid nodes
        mask = ~model.is_atom
        h_spec = {"table": np.column_stack(
            [model.nodes[mask], model.hvals[mask]]).tolist()}
    return {
        "atoms": [[p, w] for p, w in model.atoms],
        "intervals": [[a, b] for a, b in model.intervals],
        "h": h_spec,
        "nodes_per_interval": model.nodes_per_interval,
        "multiplicity": model.multiplicity,
    }


def model_from_dict(d: dict) -> SpectralModel:
    return build_spectral_model(
        atoms=[tuple(a) for a in d.get("atoms", [])],
        intervals=[tuple(i) for i in d.get("intervals", [])],
        h=d.get("h"),
        nodes_per_interval=int(d.get("nodes_per_interval", 64)),
        multiplicity=int(d.get("multiplicity", 1)),
        quadrature_tol=float(d.get("quadrature_tol", 1e-3)),
    )


def state_to_dict(state: StateKernel) -> dict:
    flat = state.values
    return {
        "shape": list(flat.shape),
        "re": flat.real.tolist(),
        "im": flat.imag.tolist(),
    }


def state_from_dict(model, d: dict) -> StateKernel:
    values = np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)
    return StateKernel(values.reshape(d["shape"]), model)

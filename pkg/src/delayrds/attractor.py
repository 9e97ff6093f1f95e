"""Pullback absorbing radius, pullback clouds and their geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .dynamics import DelaySystem, lift_nodes, run_psi
from .errors import DimensionError, DomainError
from .noise import NoisePath, shift, tempered_radius
from .segment import ProductState, batch_h_norm, h_sqrt_weights


def initial_ball(sys: DelaySystem, n: int, radius: float, seed: int = 0) -> np.ndarray:
    """``n`` states of H-norm at most ``radius``: random directions, uniform radii."""
    if n < 1:
        raise DomainError("need at least one initial state")
    if radius < 0:
        raise DomainError("radius must be nonnegative")
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((n, sys.M + 1, sys.N))
    raw /= batch_h_norm(raw, sys.tau)[:, None, None]
    return raw * (radius * rng.uniform(0.0, 1.0, n))[:, None, None]


def pullback_cloud(sys: DelaySystem, path: NoisePath, T: float, initial) -> np.ndarray:
    """Psi(T, theta_{-T} omega, x) for each initial state x (stacked nodes)."""
    n = sys.steps(T, "pullback time")
    if n < 0:
        raise DomainError("pullback time must be nonnegative")
    return run_psi(sys, shift(path, -n * sys.step), n, initial)


@dataclass(frozen=True)
class AttractorSample:
    """Pullback cloud at time 0 from a fixed initial ball."""

    states: np.ndarray
    pullback_time: float
    n_initials: int
    tau: float

    def product_states(self) -> list[ProductState]:
        return [ProductState(self.tau, x) for x in self.states]

    def norms(self) -> np.ndarray:
        return batch_h_norm(self.states, self.tau)

    def diameter(self) -> float:
        return hausdorff_diameter(self.states, self.tau)


def pullback_evolve(sys: DelaySystem, path: NoisePath, T_list, n_initials: int = 64,
                    radius: float = 1.0, seed: int = 0) -> list[AttractorSample]:
    """Pullback clouds for each T in ``T_list`` from the same seeded initial ball."""
    sys.params.validate(sys.domain)
    init = initial_ball(sys, n_initials, radius, seed)
    return [AttractorSample(pullback_cloud(sys, path, T, init), float(T), n_initials, sys.tau)
            for T in T_list]


def _as_points(x, tau: float | None):
    if isinstance(x, AttractorSample):
        return x.states, x.tau
    if isinstance(x, ProductState):
        return x.nodes[None], x.tau
    if isinstance(x, (list, tuple)) and x and isinstance(x[0], ProductState):
        return np.stack([p.nodes for p in x]), x[0].tau
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 2:
        arr = arr[None]
    if tau is None:
        raise DimensionError("tau is required for raw node arrays")
    return arr, tau


def _flatten(points, tau: float) -> np.ndarray:
    sw = h_sqrt_weights(tau, points.shape[-2] - 1)[:, None]
    return (points * sw).reshape(points.shape[0], -1)


def hausdorff_semidist(A, B, tau: float | None = None) -> float:
    """sup_{a in A} inf_{b in B} ||a - b||_H over finite samples."""
    a, ta = _as_points(A, tau)
    b, tb = _as_points(B, tau)
    if ta != tb or a.shape[1:] != b.shape[1:]:
        raise DimensionError("samples live on different grids")
    if len(a) == 0 or len(b) == 0:
        raise DomainError("empty sample")
    d = cdist(_flatten(a, ta), _flatten(b, ta))
    return float(d.min(axis=1).max())


def hausdorff_diameter(A, tau: float | None = None) -> float:
    a, ta = _as_points(A, tau)
    flat = _flatten(a, ta)
    return float(cdist(flat, flat).max())


@dataclass
class AbsorbingEstimate:
    """Analytic and empirical absorbing radius from an ensemble scan.

    ``radius_analytic`` is the Gronwall bound evaluated at the absorption
    time; ``radius_empirical`` is the largest ensemble H-norm observed at or
    after it.  ``violations`` counts (time, member) pairs from ``T_absorb``
    on whose norm exceeds the time-dependent bound R0 + c1(t), which never
    exceeds ``radius_analytic``.
    """

    radius_analytic: float
    radius_empirical: float
    T_absorb: float | None
    violations: int
    r_hat: float
    c: float
    R0: float
    scan_times: np.ndarray = field(repr=False)
    max_norms: np.ndarray = field(repr=False)
    bounds: np.ndarray = field(repr=False)


def noise_constant(sys: DelaySystem) -> float:
    """sum_j (||A g_j|| + (mu + L_f) sqrt(tau) e^{mu tau/4} ||g_j||)."""
    p = sys.params
    g = np.linalg.norm(sys.shapes.g, axis=1)
    ag = np.linalg.norm(sys.shapes.Ag, axis=1)
    return float(np.sum(ag + (p.mu + p.lipschitz_f) * math.sqrt(p.tau)
                        * math.exp(p.mu * p.tau / 4) * g))


def absorbing_radius(sys: DelaySystem, path: NoisePath, ensemble: int = 256,
                     init_radius: float | None = None, scan_max: float = 30.0,
                     scan_step: float = 1.0, horizon: float = 40.0, seed: int = 0) -> AbsorbingEstimate:
    """Scan pullback times 0..scan_max and find when the ensemble enters the bound.

    The bound at pullback time t is R0 + c1(t), where c1 decays at rate
    rho + L_f from the measured initial distance to the noise lift.
    """
    p = sys.params
    p.validate_attractor(sys.domain)
    rho, lf = p.rho_op(sys.domain), p.lipschitz_f
    r_hat = tempered_radius(path, horizon, p.mu, p.tau, sys.burn_in).r_hat
    r_eff = max(r_hat, math.sqrt(r_hat))
    c = noise_constant(sys) * max(1.0, 1.0 / -(rho + p.mu / 4))
    R0 = (2.0 - lf / (rho + lf)) * c * r_eff
    if init_radius is None:
        init_radius = 2.0 * R0 + 1.0
    init = initial_ball(sys, ensemble, init_radius, seed)
    times = np.arange(0.0, scan_max + 1e-9, scan_step)
    max_norms = np.empty(len(times))
    bounds = np.empty(len(times))
    norms = []
    for i, t in enumerate(times):
        n = sys.steps(t, "scan time")
        start = shift(path, -n * sys.step)
        dist0 = float(batch_h_norm(init - lift_nodes(sys, start, 0), sys.tau).max())
        cloud = run_psi(sys, start, n, init) if n else init
        nn = batch_h_norm(cloud, sys.tau)
        norms.append(nn)
        max_norms[i] = nn.max()
        c1 = max(0.0, math.exp((rho + lf) * t) * (dist0 + c * lf * r_eff / (rho + lf)))
        bounds[i] = R0 + c1
    inside = np.flatnonzero(max_norms <= bounds)
    if inside.size == 0:
        return AbsorbingEstimate(math.inf, float(max_norms.max()), None, int(ensemble), r_hat, c, R0,
                                 times, max_norms, bounds)
    k = int(inside[0])
    radius = float(bounds[k])
    after = np.stack(norms[k:])
    violations = int(np.sum(after > bounds[k:, None]))
    return AbsorbingEstimate(radius, float(after.max()), float(times[k]), violations,
                             r_hat, c, R0, times, max_norms, bounds)


@dataclass(frozen=True)
class BoxCount:
    dimension: float
    eps: np.ndarray
    counts: np.ndarray
    degenerate: bool


def leading_coordinates(points, tau: float, k: int) -> np.ndarray:
    """First k H-isometric coordinates: head modes, then segment nodes backward in time."""
    M = points.shape[-2] - 1
    sw = h_sqrt_weights(tau, M)[:, None]
    scaled = points * sw
    ordered = scaled[:, ::-1, :].reshape(points.shape[0], -1)
    if not 1 <= k <= ordered.shape[1]:
        raise DimensionError(f"k must lie in 1..{ordered.shape[1]}")
    return ordered[:, :k]


def box_counting_dim(sample, eps_list, k: int | None = None, tau: float | None = None) -> BoxCount:
    """Slope of log N(eps) against log(1/eps) for occupied grid boxes.

    ``sample`` is an AttractorSample, stacked node arrays (with ``tau`` and
    ``k``), or a plain (n, d) point array when both ``tau`` and ``k`` are None.
    """
    eps = np.sort(np.asarray(eps_list, dtype=float))[::-1]
    if eps.size < 2 or np.any(eps <= 0):
        raise DomainError("need at least two positive box sizes")
    if isinstance(sample, AttractorSample):
        pts = leading_coordinates(sample.states, sample.tau, k or 2)
    else:
        arr = np.asarray(sample, dtype=float)
        if arr.ndim == 3:
            if tau is None:
                raise DimensionError("tau is required for node arrays")
            pts = leading_coordinates(arr, tau, k or 2)
        else:
            pts = arr if k is None else arr[:, :k]
    lo = pts.min(axis=0)
    spread = float((pts.max(axis=0) - lo).max())
    scale = max(1.0, float(np.abs(pts).max()))
    if spread <= 1e-12 * scale:
        return BoxCount(0.0, eps, np.ones(eps.size, dtype=int), True)
    counts = np.array([len(np.unique(np.floor((pts - lo) / e).astype(np.int64), axis=0))
                       for e in eps])
    slope = float(np.polyfit(np.log(1.0 / eps), np.log(counts), 1)[0])
    return BoxCount(slope, eps, counts, False)

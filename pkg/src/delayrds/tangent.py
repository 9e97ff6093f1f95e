"""Variational cocycle, QR Lyapunov statistics and dimension bounds.

The tangent flow is the exact derivative of the discrete step in
:mod:`delayrds.dynamics`: the same exponential-Euler update with the
nonlinearity replaced by its linearisation along the base trajectory.
Frames are kept orthonormal in the H inner product; log stretches are
accumulated directly (products of stretches are never formed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .attractor import hausdorff_semidist, initial_ball, pullback_cloud
from .dynamics import (DelaySystem, _check_segment, _check_state, advance_u, df_batch, noise_fields,
                       run_psi)
from .errors import AlignmentError, DomainError, NotConvergedError
from .noise import NoisePath, shift
from .segment import HistorySegment, ProductState, batch_h_inner, grid_steps, h_sqrt_weights

UNDERFLOW = 1e-300


def tangent_advance(sys: DelaySystem, u, base_u) -> np.ndarray:
    """One linearised step; ``base_u`` is the base segment v_t + z_t."""
    a = sys.params.a
    forcing = -a * u[..., 0, :] + df_batch(sys, base_u, u)
    head = sys.decay * u[..., -1, :] + sys.gain * forcing
    return np.concatenate([u[..., 1:, :], head[..., None, :]], axis=-2)


def tangent_step(sys: DelaySystem, base_seg: HistorySegment, u: ProductState,
                 h: float | None = None) -> ProductState:
    """Advance a tangent vector one grid step along a base whose state of the
    original equation has history segment ``base_seg``."""
    _check_segment(sys, base_seg)
    _check_state(sys, u)
    if h is not None and grid_steps(h, sys.step, "step") != 1:
        raise AlignmentError(f"tangent_step advances exactly one grid step of {sys.step}")
    return ProductState(sys.tau, tangent_advance(sys, u.nodes, base_seg.nodes))


def propagate(sys: DelaySystem, path: NoisePath, n_steps: int, chi, frames, on_step=None):
    """Run base (Psi coordinates) and tangent frames together for ``n_steps``.

    ``chi`` has shape (..., M+1, N) and ``frames`` (..., m, M+1, N).  The
    optional ``on_step(k, base_u, frames)`` is called before each step.
    """
    M = sys.M
    _, z, az = noise_fields(sys, path, -M, n_steps)
    base = np.array(chi, dtype=float)
    u = np.asarray(frames, dtype=float)
    for k in range(n_steps):
        if on_step is not None:
            on_step(k, base, u)
        u = tangent_advance(sys, u, base)
        base = advance_u(sys, base, z[k + M], z[k + M + 1], az[k + M])
    return base, u


def dpsi_apply(sys: DelaySystem, path: NoisePath, t: float, chi: ProductState,
               direction: ProductState) -> ProductState:
    """D Psi(t, omega, chi) applied to ``direction``."""
    _check_state(sys, chi)
    _check_state(sys, direction)
    n = sys.steps(t, "time")
    _, u = propagate(sys, path, n, chi.nodes, direction.nodes[None])
    return ProductState(sys.tau, u[0])


def h_qr(frames, tau: float):
    """Weighted QR of stacked frames (..., m, M+1, N) in the H inner product.

    Returns the orthonormal frames and the R factors with positive diagonal.
    """
    frames = np.asarray(frames, dtype=float)
    M = frames.shape[-2] - 1
    sw = h_sqrt_weights(tau, M)[:, None]
    flat = (frames * sw).reshape(*frames.shape[:-2], -1)
    q, r = np.linalg.qr(np.swapaxes(flat, -1, -2))
    sign = np.where(np.diagonal(r, axis1=-2, axis2=-1) < 0, -1.0, 1.0)
    q = q * sign[..., None, :]
    r = r * sign[..., :, None]
    q = np.swapaxes(q, -1, -2).reshape(frames.shape) / sw
    return q, r


def random_frame(sys: DelaySystem, m: int, rng: np.random.Generator, batch=()) -> np.ndarray:
    raw = rng.standard_normal((*batch, m, sys.M + 1, sys.N))
    q, _ = h_qr(raw, sys.tau)
    return q


def eigen_frame(sys: DelaySystem, modes) -> np.ndarray:
    """Profiles exp((lambda_k - mu) xi) e_k, H-normalised: the eigenvectors of
    the delay-free linear flow for the given 1-based modes."""
    xi = np.linspace(-sys.tau, 0.0, sys.M + 1)
    lam = sys.domain.eigenvalues
    frame = np.zeros((len(modes), sys.M + 1, sys.N))
    for i, k in enumerate(modes):
        frame[i, :, k - 1] = np.exp((lam[k - 1] - sys.params.mu) * xi)
    return frame / np.sqrt(batch_h_inner(frame, frame, sys.tau))[:, None, None]


@dataclass
class TangentFrame:
    """Orthonormal tangent vectors attached to a base point of Psi over omega."""

    vectors: np.ndarray
    base: ProductState
    path: NoisePath

    @property
    def m(self) -> int:
        return self.vectors.shape[0]

    def states(self) -> list[ProductState]:
        return [ProductState(self.base.tau, v) for v in self.vectors]

    def gram(self) -> np.ndarray:
        v = self.vectors
        return batch_h_inner(v[:, None], v[None, :], self.base.tau)


def _reseed(q, stretches, rng, tau):
    """Replace collapsed directions by fresh vectors orthogonal to the rest."""
    bad = stretches < UNDERFLOW
    if not np.any(bad):
        return q, False
    q = q.copy()
    idx = np.argwhere(bad)
    for pos in idx:
        *batch, i = pos
        frame = q[tuple(batch)]
        fresh = rng.standard_normal(frame.shape[1:])
        for j in range(frame.shape[0]):
            if j != i:
                fresh = fresh - batch_h_inner(fresh, frame[j], tau) * frame[j]
        frame[i] = fresh / math.sqrt(batch_h_inner(fresh, fresh, tau))
    return q, True


def dpsi_unit(sys: DelaySystem, frame: TangentFrame, duration: float = 1.0, rng=None):
    """Apply D Psi over ``duration`` to the frame and re-orthonormalise.

    Returns the new frame (based at Psi(duration, omega, base) over
    theta_duration omega), the stretch factors and an underflow flag.
    """
    _check_state(sys, frame.base)
    gram = frame.gram()
    if np.max(np.abs(gram - np.eye(frame.m))) > 1e-8:
        raise DomainError("frame is not orthonormal in H")
    n = sys.steps(duration, "duration")
    chi, u = propagate(sys, frame.path, n, frame.base.nodes, frame.vectors)
    q, r = h_qr(u, sys.tau)
    stretches = np.diagonal(r).copy()
    q, flagged = _reseed(q, stretches, rng or np.random.default_rng(0), sys.tau)
    new = TangentFrame(q, ProductState(sys.tau, chi), shift(frame.path, n * sys.step))
    return new, stretches, flagged


def lyapunov_run(sys: DelaySystem, path: NoisePath, base, m: int, intervals: int,
                 warmup: int = 10, seed: int = 0, frame0=None, interval: float = 1.0,
                 with_trace: bool = False, scheme: str = "central"):
    """Log stretches of an m-frame over ``intervals`` unit intervals.

    ``base`` is a batch of Psi states (B, M+1, N) at path time 0; the first
    ``warmup`` intervals align the frame and are discarded.  Returns a dict
    with ``log_stretch`` (B, intervals, m), the final base/frames, an
    underflow count and, with ``with_trace``, the per-step traces (B, steps).
    """
    base = np.asarray(base, dtype=float)
    if base.ndim == 2:
        base = base[None]
    B = base.shape[0]
    rng = np.random.default_rng(seed)
    frames = random_frame(sys, m, rng, (B,)) if frame0 is None else np.broadcast_to(
        frame0, (B, m, sys.M + 1, sys.N)).copy()
    n = sys.steps(interval, "interval")
    logs = np.empty((B, intervals, m))
    traces = []

    def record_trace(_, base_u, u):
        q, _r = h_qr(u, sys.tau)
        traces.append(_trace(sys, base_u, q, scheme))

    underflows = 0
    chi = base
    for k in range(warmup + intervals):
        hook = record_trace if with_trace and k >= warmup else None
        chi, u = propagate(sys, path, n, chi, frames, hook)
        path = shift(path, n * sys.step)
        frames, r = h_qr(u, sys.tau)
        stretches = np.diagonal(r, axis1=-2, axis2=-1)
        frames, _ = _reseed(frames, stretches, rng, sys.tau)
        underflows += int(np.sum(stretches < UNDERFLOW))
        if k >= warmup:
            logs[:, k - warmup] = np.log(np.maximum(stretches, UNDERFLOW))
    out = {"log_stretch": logs, "base": chi, "frames": frames, "underflows": underflows,
           "path": path}
    if with_trace:
        out["trace"] = np.stack(traces, axis=-1)
    return out


def generator_apply(sys: DelaySystem, base_u, u, scheme: str = "central") -> np.ndarray:
    """Discrete generator G of the tangent flow applied to u.

    Segment rows carry the derivative in the delay variable (second-order
    differences, which is what the left shift generates); the last row is
    the head derivative
    (A - mu) h - a u(-tau) + Df(base) u.  ``scheme="upwind"`` uses the
    one-step quotient (u_{i+1} - u_i)/delta instead, which is first order.
    """
    d = sys.step
    lam = sys.domain.eigenvalues
    if scheme == "central":
        out = np.gradient(u, d, axis=-2, edge_order=2)
    elif scheme == "upwind":
        out = np.empty_like(u)
        out[..., :-1, :] = (u[..., 1:, :] - u[..., :-1, :]) / d
    else:
        raise DomainError(f"unknown difference scheme {scheme!r}")
    out[..., -1, :] = ((lam - sys.params.mu) * u[..., -1, :] - sys.params.a * u[..., 0, :]
                       + df_batch(sys, base_u, u))
    return out


def _trace(sys: DelaySystem, base_u, frames, scheme: str = "central") -> np.ndarray:
    g = generator_apply(sys, base_u, frames, scheme)
    return batch_h_inner(g, frames, sys.tau).sum(axis=-1)


def trace_Q(sys: DelaySystem, base_seg: HistorySegment, frame, scheme: str = "central") -> float:
    """Tr(G Q_m) = sum_i (G u_i, u_i)_H for an H-orthonormal frame.

    ``frame`` is a TangentFrame or a sequence of ProductStates; ``base_seg``
    is the history segment of the base state of the original equation.
    """
    _check_segment(sys, base_seg)
    vectors = frame.vectors if isinstance(frame, TangentFrame) else np.array(
        [x.nodes for x in frame]).reshape(-1, sys.M + 1, sys.N)
    if vectors.shape[0] == 0:
        return 0.0
    gram = batch_h_inner(vectors[:, None], vectors[None, :], sys.tau)
    if np.max(np.abs(gram - np.eye(vectors.shape[0]))) > 1e-8:
        raise DomainError("frame is not orthonormal in H")
    return float(_trace(sys, base_seg.nodes, vectors, scheme))


@dataclass
class LyapunovStats:
    """Accumulated log stretches, indexed (path, base point, interval count).

    ``log_R_sums[p, b, i]`` is the sum over the K intervals of the log of the
    i-th QR stretch for path p and base point b.
    """

    log_R_sums: np.ndarray
    K: int
    half_sums: np.ndarray | None = None
    underflows: int = 0
    seeds: list = field(default_factory=list)

    @classmethod
    def from_q(cls, q_paths) -> "LyapunovStats":
        """Stats whose per-path q_j equal the given table (n_paths, m)."""
        q = np.atleast_2d(np.asarray(q_paths, dtype=float))
        steps = np.diff(np.concatenate([np.zeros((q.shape[0], 1)), q], axis=1), axis=1)
        return cls(steps[:, None, :], 1)

    @property
    def n_paths(self) -> int:
        return self.log_R_sums.shape[0]

    @property
    def m(self) -> int:
        return self.log_R_sums.shape[-1]

    def exponents(self) -> np.ndarray:
        """Per-index mean log stretch per interval, averaged over paths and bases."""
        return (self.log_R_sums / self.K).mean(axis=(0, 1))

    def q_per_base(self) -> np.ndarray:
        return np.cumsum(self.log_R_sums, axis=-1) / self.K

    def q_paths(self) -> np.ndarray:
        """q_j per path: max over sampled base points of the cumulative sums."""
        return self.q_per_base().max(axis=1)

    def base_spread(self) -> np.ndarray:
        q = self.q_per_base()
        return (q.max(axis=1) - q.min(axis=1)).max(axis=0)

    @property
    def q_hat(self) -> np.ndarray:
        return self.q_paths().mean(axis=0)

    @property
    def q_se(self) -> np.ndarray:
        q = self.q_paths()
        if q.shape[0] < 2:
            return np.zeros(q.shape[1])
        return q.std(axis=0, ddof=1) / math.sqrt(q.shape[0])

    def half_q_hat(self) -> np.ndarray | None:
        if self.half_sums is None:
            return None
        q = np.cumsum(self.half_sums, axis=-1) / (self.K // 2)
        return q.max(axis=1).mean(axis=0)


def _q_for_seed(sys: DelaySystem, seed: int, m_max: int, K: int, n_base: int, pullback: float,
                warmup: int, init_radius: float, converge_tol: float, frame_seed: int):
    path = sys.path(seed)
    init = initial_ball(sys, n_base, init_radius, seed=frame_seed)
    cloud = pullback_cloud(sys, path, pullback, init)
    check = pullback_cloud(sys, path, 2 * pullback, init)
    gap = hausdorff_semidist(check, cloud, sys.tau)
    if gap > converge_tol:
        raise NotConvergedError(
            f"pullback cloud for seed {seed} not converged: semidistance {gap:.3e} "
            f"between T={pullback} and T={2 * pullback} exceeds {converge_tol:.1e}")
    run = lyapunov_run(sys, path, cloud, m_max, K, warmup=warmup, seed=frame_seed)
    logs = run["log_stretch"]
    return logs.sum(axis=1), logs[:, :K // 2].sum(axis=1), run["underflows"]


def estimate_q(sys: DelaySystem, seeds, m_max: int, K: int, n_base: int = 32,
               pullback: float = 40.0, warmup: int = 10, init_radius: float = 1.0,
               converge_tol: float = 1e-6, frame_seed: int = 0, workers: int = 1) -> LyapunovStats:
    """Monte Carlo q_j statistics over noise paths with base points on pullback clouds.

    For each seed the base points are a pullback cloud of ``n_base`` members
    evolved over ``pullback`` time units; the cloud must agree with the
    cloud from twice that pullback time to ``converge_tol``.  Paths are
    independent, so ``workers > 1`` farms them out without changing results.
    """
    if K < 50:
        raise DomainError("need at least 50 unit intervals")
    sys.params.validate_attractor(sys.domain)
    seeds = [int(s) for s in seeds]
    args = (m_max, K, n_base, pullback, warmup, init_radius, converge_tol, frame_seed)
    if workers > 1 and len(seeds) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_q_for_seed, [sys] * len(seeds), seeds,
                                    *[[a] * len(seeds) for a in args]))
    else:
        results = [_q_for_seed(sys, seed, *args) for seed in seeds]
    sums = np.stack([r[0] for r in results])
    halves = np.stack([r[1] for r in results])
    return LyapunovStats(sums, K, halves, sum(r[2] for r in results), seeds)


@dataclass
class DimensionReport:
    q_estimates: np.ndarray
    q_stderr: np.ndarray
    d_H_bound: int | None
    gamma_bound: float | None
    box_estimate: float | None = None
    message: str = ""
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "q_table": [{"j": j + 1, "q_hat": float(q), "stderr": float(s)}
                        for j, (q, s) in enumerate(zip(self.q_estimates, self.q_stderr))],
            "d_H_bound": self.d_H_bound,
            "gamma_bound": self.gamma_bound,
            "box_estimate": self.box_estimate,
            "message": self.message,
            "diagnostics": self.diagnostics,
        }


def fractal_threshold(q_paths, d: int) -> float:
    """E[max_{j<=d}(d q_j - j q_d)] / (-E q_d), per-path max inside the mean."""
    q = np.atleast_2d(np.asarray(q_paths, dtype=float))
    j = np.arange(1, d + 1)
    qd = q[:, d - 1]
    inner = (d * q[:, :d] - j * qd[:, None]).max(axis=1)
    return float(inner.mean() / -qd.mean())


def dimension_bounds(stats: LyapunovStats, z_score: float = 2.0,
                     box_estimate: float | None = None) -> DimensionReport:
    """Hausdorff bound d (first q_d whose upper confidence limit is negative)
    and the fractal threshold gamma for that d."""
    q_hat, q_se = stats.q_hat, stats.q_se
    upper = q_hat + z_score * q_se
    negative = np.flatnonzero(upper < 0)
    diagnostics = {"base_spread": stats.base_spread().tolist(), "n_paths": stats.n_paths,
                   "K": stats.K, "underflows": stats.underflows}
    half = stats.half_q_hat()
    if half is not None:
        rel = np.abs(half - q_hat) / np.maximum(np.abs(q_hat), 1e-300)
        diagnostics["half_K_relative_change"] = rel.tolist()
        diagnostics["converged"] = bool(np.all(rel < 0.05))
    if negative.size == 0:
        return DimensionReport(q_hat, q_se, None, None, box_estimate,
                               "bound not established at this m_max", diagnostics)
    d = int(negative[0]) + 1
    gamma = fractal_threshold(stats.q_paths(), d)
    return DimensionReport(q_hat, q_se, d, max(gamma, 0.0), box_estimate,
                           f"d_H <= {d}; d_F <= any gamma > {max(gamma, 0.0):.6g}", diagnostics)


@dataclass
class DifferentiabilityResult:
    alpha_est: float
    K_est: float
    slope: float
    scales: np.ndarray
    remainders: np.ndarray


def differentiability_check(sys: DelaySystem, path: NoisePath, chi: ProductState, h_scales,
                            direction: ProductState | None = None, seed: int = 0,
                            floor: float = 1e-13) -> DifferentiabilityResult:
    """Remainder r(h) = ||Psi(1, chi + h e) - Psi(1, chi) - D Psi (h e)|| over h_scales."""
    _check_state(sys, chi)
    if direction is None:
        e = np.random.default_rng(seed).standard_normal((sys.M + 1, sys.N))
        e /= math.sqrt(batch_h_inner(e, e, sys.tau))
    else:
        e = direction.nodes
    n = sys.steps(1.0, "unit time")
    scales = np.asarray(h_scales, dtype=float)
    starts = np.concatenate([chi.nodes[None], chi.nodes[None] + scales[:, None, None] * e])
    finals = run_psi(sys, path, n, starts)
    _, tan = propagate(sys, path, n, chi.nodes, e[None])
    lin = tan[0]
    diff = finals[1:] - finals[0] - scales[:, None, None] * lin
    r = np.sqrt(batch_h_inner(diff, diff, sys.tau))
    keep = r > floor
    if keep.sum() < 2:
        return DifferentiabilityResult(math.inf, 1.0, math.nan, scales, r)
    slope = float(np.polyfit(np.log(scales[keep]), np.log(r[keep]), 1)[0])
    k_est = max(1.0, float(np.max(r[keep] / scales[keep] ** 2)))
    return DifferentiabilityResult(slope - 1.0, k_est, slope, scales, r)

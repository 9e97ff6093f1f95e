"""Acceptance checks on the default desk-scale instance.

Each check returns a :class:`CheckResult`; :func:`run_checks` runs them in
order.  The CLI ``verify`` subcommand and the acceptance tests share these.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .attractor import (absorbing_radius, box_counting_dim, hausdorff_semidist, initial_ball,
                        pullback_cloud, pullback_evolve)
from .dynamics import (DelaySystem, ModelParams, default_system, noise_fields, run_phi, run_psi)
from .noise import NoisePath, NoiseShape, ou_window, shift, tempered_radius
from .segment import ProductState, batch_h_norm
from .space import SpectralDomain
from .tangent import (LyapunovStats, differentiability_check, dimension_bounds, eigen_frame,
                      estimate_q, fractal_threshold, lyapunov_run, propagate)

FLOOR = 1e-13


@dataclass
class CheckResult:
    key: str
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.key} {self.name}: {self.detail}"


def _timed(key: str, name: str, fn, *args, **kwargs) -> CheckResult:
    t0 = time.perf_counter()
    passed, detail = fn(*args, **kwargs)
    return CheckResult(key, name, bool(passed), detail, time.perf_counter() - t0)


def check_cocycle(seed: int = 0, n_triples: int = 100):
    """Phi and Psi cocycle identities, bitwise, over random grid triples."""
    sys = default_system()
    rng = np.random.default_rng(seed)
    bad_phi = bad_psi = 0
    for i in range(n_triples):
        path = sys.path(seed * 1000 + i)
        s, t = (int(x) for x in rng.integers(0, 4 * sys.M, 2))
        x = rng.standard_normal((sys.M + 1, sys.N))
        whole = run_phi(sys, path, s + t, x)
        split = run_phi(sys, shift(path, s * sys.step), t, run_phi(sys, path, s, x))
        bad_phi += not np.array_equal(whole, split)
        whole = run_psi(sys, path, s + t, x)
        split = run_psi(sys, shift(path, s * sys.step), t, run_psi(sys, path, s, x))
        bad_psi += not np.array_equal(whole, split)
    return bad_phi == bad_psi == 0, f"{n_triples} triples, mismatches phi={bad_phi} psi={bad_psi}"


def check_ou(seed: int = 0, n_seeds: int = 100_000, mu: float = 1.0):
    """Stationary OU variance across seeds and the temperedness scan."""
    z = np.array([ou_window(NoisePath(seed + s, 1.0, 1), mu, 0, 0)[0, 0] for s in range(n_seeds)])
    var = float(z.var(ddof=1))
    target = 1.0 / (2.0 * mu)
    sigma = target * math.sqrt(2.0 / (n_seeds - 1))
    mean_ok = abs(z.mean()) <= 3.0 * math.sqrt(target / n_seeds)
    var_ok = abs(var - target) <= 3.0 * sigma
    sys = default_system()
    path = sys.path(seed)
    r0 = tempered_radius(path, 40.0, mu, sys.tau, sys.burn_in).r_hat
    ts = np.arange(10, 101, 10)
    scan = np.array([math.exp(-0.1 * t) * tempered_radius(shift(path, -float(t)), 40.0, mu,
                                                          sys.tau, sys.burn_in).r_hat for t in ts])
    temper_ok = bool(np.all(np.diff(scan) < 0) and scan[-1] < r0 / 10)
    detail = (f"var={var:.5f} (target {target}, 3sigma={3 * sigma:.5f}), mean={z.mean():+.5f}; "
              f"tempered scan end {scan[-1]:.3e} vs r/10={r0 / 10:.3e}, decreasing={temper_ok}")
    return mean_ok and var_ok and temper_ok, detail


def linear_system(n_modes: int = 8, history_nodes: int = 32) -> DelaySystem:
    return default_system(n_modes=n_modes, history_nodes=history_nodes, a=0.0, b=0.0)


def check_linear_spectrum(seed: int = 0):
    """Delay-free exponents from the exact eigenprofile frame (all modes) and
    from a random frame on every mode double precision can represent."""
    sys = linear_system()
    exact = sys.domain.eigenvalues - sys.params.mu
    modes = list(range(1, sys.N + 1))
    aligned = lyapunov_run(sys, sys.path(seed), sys.zero_state().nodes, sys.N, 20, warmup=0,
                           frame0=eigen_frame(sys, modes))
    err_aligned = np.abs(aligned["log_stretch"].mean(axis=(0, 1)) - exact)
    # per-step QR; a profile whose range exp(|c| tau) exceeds 1/eps loses its
    # head to round-off and cannot be resolved from a generic frame
    resolvable = np.abs(exact) * sys.tau < -math.log(np.finfo(float).eps)
    out = lyapunov_run(sys, sys.path(seed), sys.zero_state().nodes, sys.N, 20 * sys.M,
                       warmup=20 * sys.M, seed=seed, interval=sys.step)
    err_random = np.abs(out["log_stretch"].mean(axis=(0, 1)) / sys.step - exact)
    ok = err_aligned.max() < 1e-6 and err_random[resolvable].max() < 1e-6
    detail = (f"eigenprofile frame max error {err_aligned.max():.1e} (k<=8); random frame max "
              f"error {err_random[resolvable].max():.1e} on k<={int(resolvable.sum())}, "
              f"k>{int(resolvable.sum())} below double-precision range")
    return ok, detail


def delayed_root(decay: float = 1.0, gain: float = 0.25, tau: float = 1.0) -> float:
    """Real characteristic root of l = -decay + gain e^{-l tau} by bracketing."""
    return brentq(lambda x: x + decay - gain * math.exp(-x * tau), -decay - 1.0, 0.0)


def scalar_delay_system(history_nodes: int = 64) -> DelaySystem:
    dom = SpectralDomain.from_eigenvalues([0.0])
    return DelaySystem(ModelParams(1.0, -0.25, 0.0, 1.0), dom, history_nodes,
                       NoiseShape.from_modal(dom, np.zeros((0, 1))))


def check_delayed_root(seed: int = 0):
    sys = scalar_delay_system(64)
    init = np.ones((sys.M + 1, 1))
    out = lyapunov_run(sys, sys.path(seed), init, 1, 100, warmup=20, seed=seed)
    est = float(out["log_stretch"].mean())
    root = delayed_root()
    return abs(est - root) < 2e-2, f"exponent {est:.5f} vs characteristic root {root:.5f}"


def check_tangent_fd(seed: int = 0, n_dirs: int = 50, delta: float = 1e-6):
    sys = default_system()
    path = sys.path(seed)
    rng = np.random.default_rng(seed)
    chi = pullback_cloud(sys, path, 20.0, initial_ball(sys, 1, 1.0, seed))[0]
    dirs = rng.standard_normal((n_dirs, sys.M + 1, sys.N))
    dirs /= batch_h_norm(dirs, sys.tau)[:, None, None]
    n = sys.steps(1.0)
    _, tan = propagate(sys, path, n, chi, dirs)
    base = run_psi(sys, path, n, chi)
    moved = run_psi(sys, path, n, chi + delta * dirs)
    fd = (moved - base) / delta
    err = batch_h_norm(fd - tan, sys.tau) / batch_h_norm(tan, sys.tau)
    return float(err.max()) < 1e-4, f"max relative error {err.max():.2e} over {n_dirs} directions"


def check_differentiability(seed: int = 0):
    sys = default_system()
    path = sys.path(seed)
    chi = pullback_cloud(sys, path, 20.0, initial_ball(sys, 1, 1.0, seed))[0]
    res = differentiability_check(sys, path, ProductState(sys.tau, chi), [1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5],
                                  seed=seed)
    return abs(res.slope - 2.0) <= 0.1, f"slope {res.slope:.4f}, alpha {res.alpha_est:.4f}, K {res.K_est:.3g}"


def check_absorption(seed: int = 0, n_paths: int = 8, ensemble: int = 256):
    sys = default_system()
    total, worst, times = 0, 0.0, []
    for p in range(n_paths):
        est = absorbing_radius(sys, sys.path(seed + p), ensemble=ensemble, seed=seed)
        if est.T_absorb is None:
            return False, f"path {p}: ensemble never entered the analytic radius"
        total += est.violations
        worst = max(worst, est.radius_empirical / est.radius_analytic)
        times.append(est.T_absorb)
    return total == 0, (f"{n_paths} paths x {ensemble}: violations={total}, max empirical/analytic "
                        f"{worst:.3f}, T_absorb in [{min(times)}, {max(times)}]")


def ladder_ok(ladder, floor: float = FLOOR) -> bool:
    """Strictly decreasing until the floating-point floor, then at the floor."""
    ladder = np.asarray(ladder)
    for i in range(1, len(ladder)):
        if ladder[i] <= floor:
            continue
        if not ladder[i] < ladder[i - 1]:
            return False
    return True


def semidistance_ladder(samples) -> np.ndarray:
    return np.array([hausdorff_semidist(samples[i], samples[i + 1]) for i in range(len(samples) - 1)])


def affine_fixed_point(sys: DelaySystem, path: NoisePath, T: float) -> np.ndarray:
    """Pullback limit of the affine scheme built from an explicit dense matrix."""
    M, N = sys.M, sys.N
    dim = (M + 1) * N
    step = np.zeros((dim, dim))
    for i in range(M):
        step[i * N:(i + 1) * N, (i + 1) * N:(i + 2) * N] = np.eye(N)
    step[M * N:, M * N:] = np.diag(sys.decay)
    step[M * N:, :N] -= sys.params.a * np.diag(sys.gain)
    n = sys.steps(T)
    start = shift(path, -n * sys.step)
    _, z, az = noise_fields(sys, start, -M, n)
    v = np.zeros(dim)
    for k in range(n):
        force = np.zeros(dim)
        force[M * N:] = sys.gain * (az[k + M] - sys.params.a * z[k])
        v = step @ v + force
    return v.reshape(M + 1, N) + z[n:n + M + 1]


def check_pullback(seed: int = 0):
    sys = default_system()
    path = sys.path(seed)
    samples = pullback_evolve(sys, path, [10, 20, 40, 80, 160], 64, radius=5.0, seed=seed)
    ladder = semidistance_ladder(samples)
    ok = ladder_ok(ladder) and ladder[-1] < 1e-4
    affine = default_system(b=0.0)
    cloud = pullback_evolve(affine, path, [80.0], 32, radius=5.0, seed=seed)[0]
    star = affine_fixed_point(affine, path, 160.0)
    gap = float(batch_h_norm(cloud.states - star, sys.tau).max())
    ladder_txt = ", ".join(f"{x:.1e}" for x in ladder)
    return ok and gap < 1e-8, f"ladder [{ladder_txt}]; affine distance to fixed point {gap:.1e}"


def check_dimension(seed: int = 0, n_paths: int = 4, m_max: int = 4, K: int = 50):
    sys = default_system()
    stats = estimate_q(sys, range(seed, seed + n_paths), m_max, K)
    cloud = pullback_evolve(sys, sys.path(seed), [80.0], 256, radius=5.0, seed=seed)[0]
    box = box_counting_dim(cloud, [0.1, 0.03, 0.01, 0.003, 0.001], k=2)
    report = dimension_bounds(stats, box_estimate=box.dimension)
    finite = report.d_H_bound is not None and math.isfinite(report.gamma_bound)
    box_ok = finite and box.dimension <= report.gamma_bound + 0.1
    hand = fractal_threshold(LyapunovStats.from_q([[0.5, -0.5]]).q_paths(), 2)
    hand_report = dimension_bounds(LyapunovStats.from_q([[0.5, -0.5]]))
    hand_ok = hand == 3.0 and hand_report.d_H_bound == 2 and hand_report.gamma_bound == 3.0
    detail = (f"d_H={report.d_H_bound}, gamma={report.gamma_bound}, box={box.dimension:.3g}"
              f"{' (degenerate cloud)' if box.degenerate else ''}, q1={stats.q_hat[0]:.4f}; "
              f"hand example gamma={hand}")
    return finite and box_ok and hand_ok, detail


def check_trace(seed: int = 0, K: int = 200, m: int = 4):
    sys = linear_system()
    out = lyapunov_run(sys, sys.path(seed), sys.zero_state().nodes, m, K, warmup=10, seed=seed,
                       with_trace=True)
    logs = float(out["log_stretch"].sum(axis=-1).mean())
    trace = float(out["trace"].mean())
    rel = abs(trace - logs) / abs(logs)
    return rel < 0.05, f"mean trace {trace:.4f} vs mean log-stretch sum {logs:.4f} (rel {rel:.2%})"


CHECKS = [
    ("C1", "cocycle exactness", check_cocycle),
    ("C2", "OU statistics and temperedness", check_ou),
    ("C3", "linear spectrum oracle", check_linear_spectrum),
    ("C4", "delayed linear root", check_delayed_root),
    ("C5", "tangent vs finite differences", check_tangent_fd),
    ("C6", "differentiability order", check_differentiability),
    ("C7", "absorption", check_absorption),
    ("C8", "pullback convergence", check_pullback),
    ("C9", "dimension-bound consistency", check_dimension),
    ("C10", "trace identity", check_trace),
]


def run_checks(seed: int = 0, only=None, echo=None) -> list[CheckResult]:
    results = []
    for key, name, fn in CHECKS:
        if only and key not in only:
            continue
        res = _timed(key, name, fn, seed=seed)
        if echo:
            echo(res.line())
        results.append(res)
    return results

"""Conjugated delay dynamics, the exponential-Euler mild step and the cocycles.

The state V(t) = (v_t, v(t)) of the pathwise equation

    v' = (A - mu) v - L v_t - L z_t + f(v_t + z_t) + A z(t),   z_t = z(theta_{t+.} omega)

is advanced by exponential Euler on each mode, with the history segment
shifted left by one node per step.  Psi = Phi + Z is the cocycle of the
original stochastic equation, Z(omega) being the product-space lift
(z(theta_. omega), z(omega)) of the OU field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, ConfigurationError, DimensionError, DomainError
from .noise import NoisePath, NoiseShape, default_burn, ou_window
from .segment import (HistorySegment, ProductState, batch_h_norm, grid_steps,
                      trapezoid_weights)
from .space import SpectralDomain


@dataclass(frozen=True)
class ModelParams:
    mu: float = 1.0
    a: float = 0.25
    b: float = 0.5
    tau: float = 1.0

    @property
    def lipschitz_f(self) -> float:
        """Lipschitz constant |b|/sqrt(tau) of the default nonlinearity on L^2."""
        return abs(self.b) / math.sqrt(self.tau)

    def rho_op(self, dom: SpectralDomain) -> float:
        return max(0.0, 0.5 + dom.spectral_bound) - self.mu

    def validate(self, dom: SpectralDomain) -> None:
        """Standing hypotheses on mu, tau, the delay operator and the semigroup."""
        if not self.mu > 0:
            raise ConfigurationError(f"decay rate must be positive: mu = {self.mu}")
        if not self.tau > 0:
            raise ConfigurationError(f"delay must be positive: tau = {self.tau}")
        if abs(self.a) > self.mu:
            raise ConfigurationError(
                f"delay operator bound ||L|| <= mu violated: |a| = {abs(self.a)} > mu = {self.mu}")
        if not dom.spectral_bound - self.mu < 0:
            raise ConfigurationError(
                f"spectral bound s(A) - mu < 0 violated: {dom.spectral_bound} - {self.mu} >= 0")

    def validate_attractor(self, dom: SpectralDomain) -> None:
        """Extra dissipativity needed by the absorbing-set and attractor routines."""
        self.validate(dom)
        rho = self.rho_op(dom)
        if not rho < -self.mu / 2:
            raise ConfigurationError(
                f"growth rate rho < -mu/2 violated: rho = {rho} >= {-self.mu / 2}")
        if not rho + self.lipschitz_f < 0:
            raise ConfigurationError(
                f"rho + L_f < 0 violated: {rho} + {self.lipschitz_f} >= 0")


def _phi1(x: np.ndarray) -> np.ndarray:
    out = np.ones_like(x)
    nz = x != 0
    out[nz] = np.expm1(x[nz]) / x[nz]
    return out


@dataclass(frozen=True)
class DelaySystem:
    """Everything fixed about one discretised model instance."""

    params: ModelParams
    domain: SpectralDomain
    history_nodes: int
    shapes: NoiseShape
    burn_in: float | None = None
    step: float = field(init=False)
    weights: np.ndarray = field(init=False, repr=False)
    decay: np.ndarray = field(init=False, repr=False)
    gain: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.history_nodes < 2:
            raise DimensionError("history_nodes must be at least 2")
        if self.shapes.n_modes != self.domain.n_modes:
            raise DimensionError("noise shapes and domain mode counts differ")
        h = self.params.tau / self.history_nodes
        c = (self.domain.eigenvalues - self.params.mu) * h
        object.__setattr__(self, "step", h)
        object.__setattr__(self, "weights", trapezoid_weights(self.params.tau, self.history_nodes))
        object.__setattr__(self, "decay", np.exp(c))
        object.__setattr__(self, "gain", h * _phi1(c))
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", default_burn(self.params.mu))

    @property
    def M(self) -> int:
        return self.history_nodes

    @property
    def N(self) -> int:
        return self.domain.n_modes

    @property
    def tau(self) -> float:
        return self.params.tau

    def path(self, seed: int) -> NoisePath:
        return NoisePath(seed, self.step, self.shapes.m)

    def steps(self, t: float, what: str = "duration") -> int:
        return grid_steps(t, self.step, what)

    def zero_state(self) -> ProductState:
        return ProductState.zeros(self.tau, self.M, self.N)

    def noise_free(self) -> bool:
        return self.shapes.m == 0 or not np.any(self.shapes.g)


def default_system(n_modes: int = 8, history_nodes: int = 32, mu: float = 1.0, a: float = 0.25,
                   b: float = 0.5, tau: float = 1.0,
                   shape_spec=(((1, 0.3),), ((2, 0.1),))) -> DelaySystem:
    dom = SpectralDomain.dirichlet_laplacian(n_modes)
    shapes = NoiseShape.from_spec(dom, shape_spec)
    return DelaySystem(ModelParams(mu, a, b, tau), dom, history_nodes, shapes)


# -- batched primitives on (..., M+1, N) node arrays -------------------------

def segment_mean(sys: DelaySystem, nodes) -> np.ndarray:
    return (sys.weights @ nodes) / sys.tau


def f_batch(sys: DelaySystem, nodes) -> np.ndarray:
    dom = sys.domain
    return sys.params.b * np.tanh(segment_mean(sys, nodes) @ dom._to_coll.T) @ dom._to_modal.T


def df_batch(sys: DelaySystem, base, direction) -> np.ndarray:
    """Df(base) applied to direction; ``direction`` may carry one extra axis."""
    dom = sys.domain
    slope = sys.params.b / np.cosh(segment_mean(sys, base) @ dom._to_coll.T) ** 2
    coll = segment_mean(sys, direction) @ dom._to_coll.T
    if coll.ndim > slope.ndim:
        slope = slope[..., None, :]
    return (slope * coll) @ dom._to_modal.T


def noise_fields(sys: DelaySystem, path: NoisePath, n0: int, n1: int):
    """OU values and modal fields z, A z at grid indices n0..n1 of ``path``."""
    if path.m != sys.shapes.m:
        raise DimensionError("path and noise shapes have different component counts")
    if path.step != sys.step:
        raise DimensionError(f"path step {path.step} differs from integrator step {sys.step}")
    count = n1 - n0 + 1
    if sys.noise_free():
        zeros = np.zeros((count, sys.N))
        return np.zeros((count, path.m)), zeros, zeros
    ou = ou_window(path, sys.params.mu, n0, n1, sys.burn_in)
    # elementwise accumulation keeps each row independent of the window extent
    z = np.zeros((count, sys.N))
    az = np.zeros((count, sys.N))
    for j in range(path.m):
        z = z + ou[:, j:j + 1] * sys.shapes.g[j]
        az = az + ou[:, j:j + 1] * sys.shapes.Ag[j]
    return ou, z, az


def advance(sys: DelaySystem, v, z_seg, az_now) -> np.ndarray:
    """One exponential-Euler step of V; z_seg is the OU field on the history grid."""
    a = sys.params.a
    drift = az_now - a * z_seg[..., 0, :] + f_batch(sys, v + z_seg)
    forcing = -a * v[..., 0, :] + drift
    head = sys.decay * v[..., -1, :] + sys.gain * forcing
    return np.concatenate([v[..., 1:, :], head[..., None, :]], axis=-2)


def advance_u(sys: DelaySystem, u, z_head, z_next, az_now) -> np.ndarray:
    """The same step written for u = v + z: only the head needs the OU terms.

    The segment shifts unchanged and f sees u itself, so the step is a pure
    function of u and the grid cell.
    """
    forcing = -sys.params.a * u[..., 0, :] + az_now + f_batch(sys, u)
    head = sys.decay * (u[..., -1, :] - z_head) + sys.gain * forcing + z_next
    return np.concatenate([u[..., 1:, :], head[..., None, :]], axis=-2)


def run_phi(sys: DelaySystem, path: NoisePath, n_steps: int, v0, record: bool = False):
    """Iterate ``advance`` from path index 0; returns final nodes (and history)."""
    M = sys.M
    _, z, az = noise_fields(sys, path, -M, n_steps)
    v = np.array(v0, dtype=float)
    hist = [v] if record else None
    for k in range(n_steps):
        v = advance(sys, v, z[k:k + M + 1], az[k + M])
        if record:
            hist.append(v)
    return (v, np.stack(hist)) if record else v


def lift_nodes(sys: DelaySystem, path: NoisePath, n: int = 0) -> np.ndarray:
    """Product-space lift Z(theta_{n h} omega) as an (M+1, N) node array."""
    _, z, _ = noise_fields(sys, path, n - sys.M, n)
    return z


def run_psi(sys: DelaySystem, path: NoisePath, n_steps: int, chi0) -> np.ndarray:
    """Iterate ``advance_u`` from path index 0 on states of the original equation."""
    M = sys.M
    _, z, az = noise_fields(sys, path, -M, n_steps)
    u = np.array(chi0, dtype=float)
    for k in range(n_steps):
        u = advance_u(sys, u, z[k + M], z[k + M + 1], az[k + M])
    return u


# -- public operations on single states -------------------------------------

def _check_state(sys: DelaySystem, x: ProductState):
    if x.nodes.shape != (sys.M + 1, sys.N) or x.tau != sys.tau:
        raise DimensionError(
            f"state grid {x.nodes.shape} (tau={x.tau}) does not match "
            f"({sys.M + 1}, {sys.N}) (tau={sys.tau})")


def _check_segment(sys: DelaySystem, seg: HistorySegment):
    if seg.nodes.shape != (sys.M + 1, sys.N) or seg.tau != sys.tau:
        raise DimensionError("segment grid does not match the system")


def nonlinearity_f(sys: DelaySystem, seg: HistorySegment) -> np.ndarray:
    """f(phi)(x) = b tanh(mean over [-tau, 0] of phi(s)(x)), in modal coordinates."""
    _check_segment(sys, seg)
    return f_batch(sys, seg.nodes)


def delay_operator_L(sys: DelaySystem, seg: HistorySegment) -> np.ndarray:
    _check_segment(sys, seg)
    return sys.params.a * seg.nodes[0]


def conjugated_drift(sys: DelaySystem, z_now, z_seg: HistorySegment, v_seg: HistorySegment):
    """A z(t) - L z_t + f(v_t + z_t); ``z_now`` is the pair (z(t), A z(t))."""
    _check_segment(sys, z_seg)
    _check_segment(sys, v_seg)
    _, az_now = z_now
    return (np.asarray(az_now, dtype=float) - delay_operator_L(sys, z_seg)
            + f_batch(sys, v_seg.nodes + z_seg.nodes))


def mild_step(sys: DelaySystem, state: ProductState, ou_history, h: float | None = None) -> ProductState:
    """Advance V by one step h = tau/M.

    ``ou_history`` holds the OU values z_j at the M+1 history nodes ending at
    the current time, shape (M+1, m).
    """
    _check_state(sys, state)
    if h is not None and sys.steps(h, "step") != 1:
        raise AlignmentError(f"mild_step advances exactly one grid step of {sys.step}")
    ou = np.asarray(ou_history, dtype=float)
    if ou.shape != (sys.M + 1, sys.shapes.m):
        raise DimensionError(f"ou_history must have shape ({sys.M + 1}, {sys.shapes.m})")
    z_seg = np.zeros((sys.M + 1, sys.N))
    az = np.zeros((sys.M + 1, sys.N))
    for j in range(sys.shapes.m):
        z_seg = z_seg + ou[:, j:j + 1] * sys.shapes.g[j]
        az = az + ou[:, j:j + 1] * sys.shapes.Ag[j]
    return ProductState(sys.tau, advance(sys, state.nodes, z_seg, az[-1]))


def cocycle_phi(sys: DelaySystem, path: NoisePath, t: float, init: ProductState) -> ProductState:
    """Phi(t, omega, x) for grid-aligned t >= 0."""
    sys.params.validate(sys.domain)
    _check_state(sys, init)
    n = sys.steps(t, "cocycle time")
    if n < 0:
        raise DomainError("cocycle time must be nonnegative")
    if n == 0:
        return init
    return ProductState(sys.tau, run_phi(sys, path, n, init.nodes))


def noise_lift(sys: DelaySystem, path: NoisePath, t: float = 0.0) -> ProductState:
    """Z(theta_t omega) = (z(theta_{t+.} omega), z(theta_t omega))."""
    return ProductState(sys.tau, lift_nodes(sys, path, sys.steps(t, "time")))


def cocycle_psi(sys: DelaySystem, path: NoisePath, t: float, init: ProductState) -> ProductState:
    """Psi(t, omega, chi) = Phi(t, omega, chi - Z(omega)) + Z(theta_t omega)."""
    sys.params.validate(sys.domain)
    _check_state(sys, init)
    n = sys.steps(t, "cocycle time")
    if n < 0:
        raise DomainError("cocycle time must be nonnegative")
    if n == 0:
        return init
    return ProductState(sys.tau, run_psi(sys, path, n, init.nodes))


def project_P1(x: ProductState) -> HistorySegment:
    return x.segment


def project_P2(x: ProductState) -> np.ndarray:
    return x.head.copy()


@dataclass(frozen=True)
class Trajectory:
    """V(t) on [t0, t1] together with the OU trace that drove it."""

    times: np.ndarray
    states: np.ndarray
    ou_trace: np.ndarray
    z_field: np.ndarray
    tau: float

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    def lift(self) -> np.ndarray:
        M = self.states.shape[1] - 1
        windows = np.lib.stride_tricks.sliding_window_view(self.z_field, M + 1, axis=0)
        return np.moveaxis(windows, -1, 1)

    def psi_states(self) -> np.ndarray:
        """States of the original equation, V + Z."""
        return self.states + self.lift()

    def h_norms(self, psi: bool = True) -> np.ndarray:
        return batch_h_norm(self.psi_states() if psi else self.states, self.tau)

    def state(self, k: int) -> ProductState:
        return ProductState(self.tau, self.states[k])


def simulate(sys: DelaySystem, path: NoisePath, t_final: float, init: ProductState | None = None,
             psi_init: bool = True) -> Trajectory:
    """Record a full trajectory from path time 0 to ``t_final``.

    With ``psi_init`` the initial state is a state of the original equation
    (Psi coordinates); otherwise it is V(0) directly.
    """
    sys.params.validate(sys.domain)
    n = sys.steps(t_final, "t_final")
    init = sys.zero_state() if init is None else init
    _check_state(sys, init)
    ou, z, _ = noise_fields(sys, path, -sys.M, n)
    v0 = init.nodes - z[:sys.M + 1] if psi_init else init.nodes
    _, hist = run_phi(sys, path, n, v0, record=True)
    times = np.arange(n + 1) * sys.step
    return Trajectory(times, hist, ou[sys.M:], z, sys.tau)

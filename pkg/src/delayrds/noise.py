"""Reproducible two-sided Wiener paths and the stationary OU conjugation.

Gaussian increments are drawn from Philox blocks keyed by
``(seed, component)`` with the block index in the top counter word, so the
increment of any cell is a pure function of ``(seed, j, n)`` and past windows
can be replayed exactly.  Time shifts of the driving path only move an
integer origin.

The OU values used by the integrators come from :func:`ou_window`, which
anchors each block of cells to a burn-in start at an absolute cell index.
That makes z(theta_t omega) a pure function of the absolute grid time, which
is what keeps the discrete cocycle identities bitwise exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.signal import lfilter

from .errors import DimensionError, DomainError, InsufficientWindowError
from .segment import grid_steps
from .space import SpectralDomain, apply_A

BLOCK = 1024
OU_BLOCK = 512
_MASK64 = (1 << 64) - 1


def _zigzag(b: int) -> int:
    return 2 * b if b >= 0 else -2 * b - 1


@lru_cache(maxsize=8192)
def _normal_block(seed: int, j: int, b: int) -> np.ndarray:
    bitgen = np.random.Philox(counter=_zigzag(b) << 192, key=(j << 64) | seed)
    block = np.random.Generator(bitgen).standard_normal(BLOCK)
    block.setflags(write=False)
    return block


def _standard_normals(seed: int, j: int, n0: int, n1: int) -> np.ndarray:
    """Unit normals for absolute cells n0 <= n < n1."""
    b0, b1 = n0 // BLOCK, (n1 - 1) // BLOCK
    if b0 == b1:
        return _normal_block(seed, j, b0)[n0 - b0 * BLOCK:n1 - b0 * BLOCK]
    parts = [_normal_block(seed, j, b) for b in range(b0, b1 + 1)]
    return np.concatenate(parts)[n0 - b0 * BLOCK:n1 - b0 * BLOCK]


@dataclass(frozen=True)
class NoisePath:
    """m independent two-sided Wiener paths sampled on a uniform grid.

    Cell n covers [n*step, (n+1)*step] in the path's own clock;
    ``origin_shift`` is the offset of that clock from the base path, in cells.
    """

    seed: int
    step: float
    m: int
    origin_shift: int = 0

    def __post_init__(self):
        if self.step <= 0:
            raise DomainError("step must be positive")
        if self.m < 0:
            raise DomainError("component count must be nonnegative")
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)

    def _component(self, j: int):
        if not 0 <= j < self.m:
            raise IndexError(f"component {j} outside 0..{self.m - 1}")


def wiener_increment(path: NoisePath, j: int, n: int) -> float:
    """W_j((n+1)h) - W_j(nh) for cell n of the path."""
    path._component(j)
    base = int(n) + path.origin_shift
    b = base // BLOCK
    return math.sqrt(path.step) * float(_normal_block(path.seed, j, b)[base - b * BLOCK])


def wiener_increments(path: NoisePath, j: int, n0: int, n1: int) -> np.ndarray:
    """Increments of component j over cells n0 <= n < n1."""
    path._component(j)
    if n1 <= n0:
        return np.zeros(0)
    off = path.origin_shift
    return math.sqrt(path.step) * _standard_normals(path.seed, j, n0 + off, n1 + off)


def shift(path: NoisePath, s: float) -> NoisePath:
    """theta_s: the returned path's cell n is the base path's cell n + s/step."""
    k = grid_steps(s, path.step, "shift")
    return replace(path, origin_shift=path.origin_shift + k)


@dataclass(frozen=True)
class OUState:
    values: np.ndarray
    mu: float
    time: float = 0.0

    def __post_init__(self):
        if self.mu <= 0:
            raise DomainError("OU decay rate must be positive")
        v = np.array(self.values, dtype=float).ravel()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def ou_coefficients(mu: float, step: float) -> tuple[float, float]:
    """Decay factor and the factor turning a unit normal into the exact OU kick."""
    decay = math.exp(-mu * step)
    kick = math.sqrt(-math.expm1(-2.0 * mu * step) / (2.0 * mu))
    return decay, kick


def ou_step(z: OUState, path: NoisePath, increments=None) -> OUState:
    """Exact OU update over one cell, driven by that cell's Wiener increment.

    ``increments`` overrides the path's draws (used to switch the noise off).
    """
    if z.values.size != path.m:
        raise DimensionError("OU state and path have different component counts")
    n = grid_steps(z.time, path.step, "OU time")
    decay, kick = ou_coefficients(z.mu, path.step)
    if increments is None:
        dw = np.array([wiener_increment(path, j, n) for j in range(path.m)])
    else:
        dw = np.asarray(increments, dtype=float)
    xi = kick * dw / math.sqrt(path.step)
    return OUState(decay * z.values + xi, z.mu, (n + 1) * path.step)


def ou_pullback_init(path: NoisePath, t0: float, burn: float, mu: float) -> OUState:
    """Approximate z(theta_t0 omega) by integrating from zero at t0 - burn."""
    if burn < 0:
        raise DomainError("burn-in must be nonnegative")
    n0 = grid_steps(t0, path.step, "t0")
    nb = grid_steps(burn, path.step, "burn-in")
    decay, kick = ou_coefficients(mu, path.step)
    values = np.zeros(path.m)
    if nb:
        unit = np.stack([wiener_increments(path, j, n0 - nb, n0) for j in range(path.m)])
        unit = unit / math.sqrt(path.step)
        for k in range(nb):
            values = decay * values + kick * unit[:, k]
    return OUState(values, mu, n0 * path.step)


@lru_cache(maxsize=4096)
def _ou_block(seed: int, j: int, step: float, mu: float, burn_cells: int, k: int) -> np.ndarray:
    """Stationary OU values at absolute cells k*P .. k*P+P-1 (P = OU_BLOCK)."""
    start = k * OU_BLOCK - burn_cells
    xi = _standard_normals(seed, j, start, (k + 1) * OU_BLOCK - 1)
    decay, kick = ou_coefficients(mu, step)
    z = lfilter([kick], [1.0, -decay], xi)
    out = np.ascontiguousarray(z[burn_cells - 1:burn_cells - 1 + OU_BLOCK])
    out.setflags(write=False)
    return out


def default_burn(mu: float) -> float:
    return 40.0 / mu


def ou_window(path: NoisePath, mu: float, n0: int, n1: int, burn: float | None = None) -> np.ndarray:
    """Stationary OU values z_j at grid indices n0..n1 (inclusive), shape (n1-n0+1, m)."""
    if mu <= 0:
        raise DomainError("OU decay rate must be positive")
    if burn is None:
        burn = default_burn(mu)
    burn_cells = max(int(math.ceil(burn / path.step - 1e-9)), 1)
    a, b = n0 + path.origin_shift, n1 + path.origin_shift
    out = np.empty((n1 - n0 + 1, path.m))
    k0, k1 = a // OU_BLOCK, b // OU_BLOCK
    for j in range(path.m):
        col = np.concatenate([
            _ou_block(path.seed, j, float(path.step), float(mu), burn_cells, k)
            for k in range(k0, k1 + 1)])
        out[:, j] = col[a - k0 * OU_BLOCK:b - k0 * OU_BLOCK + 1]
    return out


@dataclass(frozen=True)
class NoiseShape:
    """Noise shapes g_j and their images A g_j in modal coordinates."""

    g: np.ndarray
    Ag: np.ndarray

    @classmethod
    def from_spec(cls, dom: SpectralDomain, spec) -> "NoiseShape":
        """``spec`` holds, per component, a list of (mode index, amplitude) pairs."""
        g = np.zeros((len(spec), dom.n_modes))
        for j, pairs in enumerate(spec):
            for mode, amp in pairs:
                g[j] += amp * dom.unit(int(mode))
        return cls.from_modal(dom, g)

    @classmethod
    def from_modal(cls, dom: SpectralDomain, g) -> "NoiseShape":
        g = np.atleast_2d(np.array(g, dtype=float))
        if g.shape[1] != dom.n_modes:
            raise DimensionError("noise shapes and domain mode counts differ")
        Ag = apply_A(dom, g)
        g.setflags(write=False)
        Ag.setflags(write=False)
        return cls(g, Ag)

    @property
    def m(self) -> int:
        return self.g.shape[0]

    @property
    def n_modes(self) -> int:
        return self.g.shape[1]


def z_field(z, shapes: NoiseShape) -> tuple[np.ndarray, np.ndarray]:
    """(sum_j z_j g_j, sum_j z_j A g_j); ``z`` is an OUState or stacked values."""
    values = z.values if isinstance(z, OUState) else np.asarray(z, dtype=float)
    if values.shape[-1] != shapes.m:
        raise DimensionError(f"expected {shapes.m} OU components, got {values.shape[-1]}")
    return values @ shapes.g, values @ shapes.Ag


@dataclass(frozen=True)
class TemperedRadius:
    r_hat: float
    times: np.ndarray
    sq_norms: np.ndarray
    violations: int
    delay_violations: int
    min_exponent: float


def tempered_radius(path: NoisePath, horizon: float, mu: float, tau: float,
                    burn: float | None = None) -> TemperedRadius:
    """Window supremum r of sum_j |z_j|^2 over [-horizon, 0] and its growth checks.

    ``violations`` counts grid times with sum_j |z_j(theta_t)|^2 > exp(mu|t|/2) r
    and ``delay_violations`` counts t in [-tau, 0] exceeding exp(mu tau/2) r.
    ``min_exponent`` is the smallest beta with
    sum_j |z_j(theta_t)|^2 <= exp(beta|t|) sum_j |z_j(omega)|^2 on the window.
    """
    if horizon <= 0:
        raise DomainError("horizon must be positive")
    if horizon < 2 * tau:
        raise InsufficientWindowError(f"horizon {horizon} shorter than 2*tau = {2 * tau}")
    n = grid_steps(horizon, path.step, "horizon")
    times = np.arange(-n, 1) * path.step
    if path.m:
        sq = np.sum(ou_window(path, mu, -n, 0, burn) ** 2, axis=1)
    else:
        sq = np.zeros(n + 1)
    r_hat = float(sq.max())
    violations = int(np.sum(sq > np.exp(0.5 * mu * np.abs(times)) * r_hat))
    in_delay = times >= -tau - 1e-12
    delay_violations = int(np.sum(sq[in_delay] > math.exp(0.5 * mu * tau) * r_hat))
    s0 = sq[-1]
    past = times < 0
    if s0 > 0:
        ratios = np.log(np.maximum(sq[past], 1e-300) / s0) / np.abs(times[past])
        min_exponent = max(0.0, float(ratios.max()))
    else:
        min_exponent = 0.0 if r_hat == 0 else math.inf
    return TemperedRadius(r_hat, times, sq, violations, delay_violations, min_exponent)

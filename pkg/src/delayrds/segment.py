"""Discretised product space H = L^2([-tau, 0], X) x X.

A history segment is stored as an ``(M+1, N)`` array whose row ``i`` is the
modal state at s_i = -tau + i*tau/M.  A product state keeps the head as the
last row of that array, so ``head == phi(0)`` holds by construction.  The
batched helpers (leading axes before the last two) are what the integrators
use; the dataclasses are the public value types.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, DimensionError, DomainError
from .space import SpectralDomain


def trapezoid_weights(tau: float, n_intervals: int) -> np.ndarray:
    w = np.full(n_intervals + 1, tau / n_intervals)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def grid_steps(duration: float, step: float, what: str = "duration") -> int:
    """Number of grid steps in ``duration``; raises if it is off-grid."""
    n = round(duration / step)
    if abs(n * step - duration) > 1e-9 * max(1.0, abs(duration)):
        raise AlignmentError(f"{what} {duration!r} is not a multiple of the step {step!r}")
    return int(n)


@dataclass(frozen=True)
class HistorySegment:
    tau: float
    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 2:
            raise DimensionError("segment nodes must be an (M+1, N) array")
        if nodes.shape[0] < 3:
            raise DimensionError("a segment needs M >= 2 intervals")
        if self.tau <= 0:
            raise DomainError("delay must be positive")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def M(self) -> int:
        return self.nodes.shape[0] - 1

    @property
    def n_modes(self) -> int:
        return self.nodes.shape[1]

    @property
    def spacing(self) -> float:
        return self.tau / self.M

    @property
    def times(self) -> np.ndarray:
        return np.linspace(-self.tau, 0.0, self.M + 1)


@dataclass(frozen=True)
class ProductState:
    """Element (phi, h) of H with h = phi(0)."""

    tau: float
    nodes: np.ndarray

    def __post_init__(self):
        seg = HistorySegment(self.tau, self.nodes)
        object.__setattr__(self, "nodes", seg.nodes)

    @classmethod
    def from_parts(cls, segment: HistorySegment, head) -> "ProductState":
        head = np.asarray(head, dtype=float)
        if head.shape != (segment.n_modes,):
            raise DimensionError("head and segment mode counts differ")
        if not np.array_equal(segment.nodes[-1], head):
            raise DomainError("head must equal the segment value at s = 0")
        return cls(segment.tau, segment.nodes)

    @classmethod
    def zeros(cls, tau: float, M: int, n_modes: int) -> "ProductState":
        return cls(tau, np.zeros((M + 1, n_modes)))

    @classmethod
    def constant(cls, tau: float, M: int, value) -> "ProductState":
        value = np.asarray(value, dtype=float)
        return cls(tau, np.tile(value, (M + 1, 1)))

    @property
    def segment(self) -> HistorySegment:
        return HistorySegment(self.tau, self.nodes)

    @property
    def head(self) -> np.ndarray:
        return self.nodes[-1]

    @property
    def M(self) -> int:
        return self.nodes.shape[0] - 1

    @property
    def n_modes(self) -> int:
        return self.nodes.shape[1]

    def _like(self, nodes) -> "ProductState":
        return ProductState(self.tau, nodes)

    def _compatible(self, other: "ProductState"):
        if self.nodes.shape != other.nodes.shape or self.tau != other.tau:
            raise DimensionError("product states live on different grids")

    def __add__(self, other):
        self._compatible(other)
        return self._like(self.nodes + other.nodes)

    def __sub__(self, other):
        self._compatible(other)
        return self._like(self.nodes - other.nodes)

    def __mul__(self, c):
        return self._like(self.nodes * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return self._like(-self.nodes)


def batch_h_inner(x, y, tau: float) -> np.ndarray:
    """H inner products of stacked node arrays ``(..., M+1, N)``."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape[-2:] != y.shape[-2:]:
        raise DimensionError("grid mismatch")
    w = trapezoid_weights(tau, x.shape[-2] - 1)
    prod = np.einsum("...in,...in->...i", x, y)
    return prod @ w + prod[..., -1]


def batch_h_norm(x, tau: float) -> np.ndarray:
    return np.sqrt(batch_h_inner(x, x, tau))


def h_sqrt_weights(tau: float, M: int) -> np.ndarray:
    """Row scalings that turn the H inner product into a Euclidean one."""
    w = trapezoid_weights(tau, M)
    w[-1] += 1.0
    return np.sqrt(w)


def h_inner(a: ProductState, b: ProductState) -> float:
    a._compatible(b)
    return float(batch_h_inner(a.nodes, b.nodes, a.tau))


def h_norm(a: ProductState) -> float:
    return float(np.sqrt(h_inner(a, a)))


def segment_eval(seg: HistorySegment, s: float) -> np.ndarray:
    """Piecewise-linear interpolant of the segment at time s in [-tau, 0]."""
    if not -seg.tau <= s <= 0:
        raise DomainError(f"s = {s} outside [-{seg.tau}, 0]")
    x = (s + seg.tau) / seg.spacing
    i = min(int(np.floor(x)), seg.M - 1)
    frac = x - i
    if frac == 0.0:
        return seg.nodes[i].copy()
    if frac == 1.0:
        return seg.nodes[i + 1].copy()
    return (1.0 - frac) * seg.nodes[i] + frac * seg.nodes[i + 1]


def refine(seg: HistorySegment, factor: int) -> HistorySegment:
    """Resample the linear interpolant on a grid ``factor`` times finer."""
    fine_M = seg.M * factor
    s = np.linspace(-seg.tau, 0.0, fine_M + 1)
    nodes = np.stack([segment_eval(seg, float(si)) for si in s])
    return HistorySegment(seg.tau, nodes)


def batch_tilde_semigroup(dom: SpectralDomain, n_steps: int, nodes, spacing: float) -> np.ndarray:
    """Delay semigroup over ``n_steps`` grid steps on stacked node arrays."""
    nodes = np.asarray(nodes, dtype=float)
    M = nodes.shape[-2] - 1
    if n_steps == 0:
        return nodes.copy()
    head = nodes[..., -1, :]
    out = np.empty_like(nodes)
    keep = max(M + 1 - n_steps, 0)
    out[..., :keep, :] = nodes[..., n_steps:, :]
    # nodes with t + xi > 0 are filled from the evolved head
    start = keep
    elapsed = (np.arange(start, M + 1) + n_steps - M) * spacing
    factors = np.exp(np.outer(elapsed, dom.eigenvalues))
    out[..., start:, :] = factors * head[..., None, :]
    return out


def tilde_semigroup_apply(dom: SpectralDomain, t: float, x: ProductState) -> ProductState:
    """S~(t) x: the head moves by S(t), the segment shifts left."""
    if t < 0:
        raise DomainError("semigroup time must be nonnegative")
    if x.n_modes != dom.n_modes:
        raise DimensionError("state and domain mode counts differ")
    spacing = x.tau / x.M
    n = grid_steps(t, spacing, "semigroup time")
    return ProductState(x.tau, batch_tilde_semigroup(dom, n, x.nodes, spacing))

"""Galerkin truncation of the spatial operator A.

States of X are held as modal coefficient vectors (plain 1-D numpy arrays,
or stacks of them along leading axes) in an orthonormal eigenbasis of A, so
the Euclidean norm of the coefficients is the X-norm.  The default instance
is the Dirichlet Laplacian on (0, pi) with eigenfunctions
sqrt(2/pi) sin(k x) and eigenvalues -k**2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError


@dataclass(frozen=True)
class SpectralDomain:
    """Diagonal operator A with a sine collocation grid.

    ``eigenvalues`` must be strictly decreasing.  Collocation always uses the
    DST-I points x_i = i*pi/(N+1); for a custom spectrum the sine basis is
    kept as the pointwise representation.
    """

    eigenvalues: np.ndarray
    operator: str = "dirichlet_laplacian"
    _to_coll: np.ndarray = field(init=False, repr=False, compare=False)
    _to_modal: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float).ravel()
        if lam.size == 0:
            raise DimensionError("need at least one mode")
        if lam.size > 1 and np.any(np.diff(lam) >= 0):
            raise DomainError("eigenvalues must be strictly decreasing")
        lam.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)
        n = lam.size
        k = np.arange(1, n + 1)
        x = np.pi * k / (n + 1)
        basis = np.sqrt(2.0 / np.pi) * np.sin(np.outer(x, k))
        object.__setattr__(self, "_to_coll", basis)
        object.__setattr__(self, "_to_modal", (np.pi / (n + 1)) * basis.T)

    @classmethod
    def dirichlet_laplacian(cls, n_modes: int = 8) -> "SpectralDomain":
        if n_modes < 1:
            raise DimensionError("n_modes must be positive")
        k = np.arange(1, n_modes + 1, dtype=float)
        return cls(-(k**2))

    @classmethod
    def from_eigenvalues(cls, eigenvalues) -> "SpectralDomain":
        return cls(np.asarray(eigenvalues, dtype=float), operator="explicit")

    @property
    def n_modes(self) -> int:
        return self.eigenvalues.size

    @property
    def spectral_bound(self) -> float:
        """s(A), the largest eigenvalue."""
        return float(self.eigenvalues[0])

    @property
    def collocation_points(self) -> np.ndarray:
        n = self.n_modes
        return np.pi * np.arange(1, n + 1) / (n + 1)

    @property
    def quadrature_weight(self) -> float:
        """Weight making the collocation norm equal the modal norm."""
        return np.pi / (self.n_modes + 1)

    def _check(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.n_modes:
            raise DimensionError(
                f"expected {self.n_modes} modes on the last axis, got {v.shape[-1]}")
        return v

    def unit(self, k: int) -> np.ndarray:
        """Coefficient vector of the k-th eigenfunction (1-based)."""
        if not 1 <= k <= self.n_modes:
            raise DomainError(f"mode {k} outside 1..{self.n_modes}")
        e = np.zeros(self.n_modes)
        e[k - 1] = 1.0
        return e


def semigroup_apply(dom: SpectralDomain, t: float, v) -> np.ndarray:
    """S(t) v, i.e. coefficient k multiplied by exp(lambda_k t)."""
    if t < 0:
        raise DomainError("semigroup time must be nonnegative")
    v = dom._check(v)
    return np.exp(dom.eigenvalues * t) * v


def apply_A(dom: SpectralDomain, v) -> np.ndarray:
    v = dom._check(v)
    return dom.eigenvalues * v


def to_collocation(dom: SpectralDomain, v) -> np.ndarray:
    """Values of the eigenfunction expansion at the collocation points."""
    v = dom._check(v)
    return v @ dom._to_coll.T


def to_modal(dom: SpectralDomain, u) -> np.ndarray:
    u = dom._check(u)
    return u @ dom._to_modal.T

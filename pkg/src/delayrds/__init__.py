"""Numerical laboratory for a stochastic delayed reaction-diffusion equation.

Modules: ``space`` (Galerkin operator), ``segment`` (history product space),
``noise`` (keyed Wiener paths and OU conjugation), ``dynamics`` (integrator
and cocycles), ``attractor`` (pullback clouds), ``tangent`` (variational
flow, Lyapunov statistics, dimension bounds) and ``cli``.
"""

from .attractor import (AbsorbingEstimate, AttractorSample, BoxCount, absorbing_radius,
                        box_counting_dim, hausdorff_semidist, pullback_evolve)
from .dynamics import (DelaySystem, ModelParams, Trajectory, cocycle_phi, cocycle_psi,
                       conjugated_drift, default_system, delay_operator_L, mild_step,
                       noise_lift, nonlinearity_f, project_P1, project_P2, simulate)
from .errors import (AlignmentError, ConfigurationError, DelayRDSError, DimensionError,
                     DomainError, InsufficientWindowError, NotConvergedError)
from .noise import (NoisePath, NoiseShape, OUState, ou_pullback_init, ou_step, shift,
                    tempered_radius, wiener_increment, z_field)
from .segment import (HistorySegment, ProductState, h_inner, h_norm, segment_eval,
                      tilde_semigroup_apply)
from .space import SpectralDomain, apply_A, semigroup_apply, to_collocation, to_modal
from .tangent import (DimensionReport, LyapunovStats, TangentFrame, differentiability_check,
                      dimension_bounds, dpsi_unit, estimate_q, tangent_step, trace_Q)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

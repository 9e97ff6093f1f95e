import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from delayrds.errors import AlignmentError, DimensionError, DomainError
from delayrds.segment import (HistorySegment, ProductState, batch_h_norm, h_inner, h_norm, refine,
                              segment_eval, tilde_semigroup_apply)
from delayrds.space import SpectralDomain

DOM = SpectralDomain.dirichlet_laplacian(8)
TAU, M = 1.0, 32


def smooth_state(seed, M=M, tau=TAU):
    rng = np.random.default_rng(seed)
    s = np.linspace(-tau, 0.0, M + 1)
    amp, freq, phase = rng.standard_normal((3, 8))
    return ProductState(tau, amp * np.cos(np.outer(s, 2 * freq) + phase))


def test_constant_state_norm():
    c = 1.7
    x = ProductState.constant(TAU, M, c * DOM.unit(1))
    assert h_norm(x) == pytest.approx(abs(c) * math.sqrt(2), rel=1e-14)


def test_disjoint_modes_orthogonal():
    rng = np.random.default_rng(0)
    a = np.zeros((M + 1, 8))
    b = np.zeros((M + 1, 8))
    a[:, :4] = rng.standard_normal((M + 1, 4))
    b[:, 4:] = rng.standard_normal((M + 1, 4))
    assert h_inner(ProductState(TAU, a), ProductState(TAU, b)) == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_norm_matches_refined_quadrature(seed):
    x = smooth_state(seed)
    fine = refine(x.segment, 10)
    assert h_norm(ProductState(TAU, fine.nodes)) == pytest.approx(h_norm(x), rel=1e-3)


def test_head_consistency_enforced():
    seg = HistorySegment(TAU, np.zeros((M + 1, 8)))
    with pytest.raises(DomainError):
        ProductState.from_parts(seg, np.ones(8))
    x = ProductState.from_parts(seg, np.zeros(8))
    assert np.array_equal(x.head, x.segment.nodes[-1])


def test_grid_mismatch():
    with pytest.raises(DimensionError):
        h_inner(ProductState.zeros(TAU, M, 8), ProductState.zeros(TAU, 16, 8))
    with pytest.raises(DimensionError):
        HistorySegment(TAU, np.zeros((2, 8)))


def test_segment_eval_at_nodes():
    x = smooth_state(1)
    for i in (0, 7, M):
        assert np.array_equal(segment_eval(x.segment, -TAU + i * TAU / M), x.nodes[i])


def test_segment_eval_linear_midpoint():
    s = np.linspace(-TAU, 0, M + 1)
    seg = HistorySegment(TAU, np.outer(3 * s + 1, np.ones(8)))
    mid = -TAU + 2.5 * TAU / M
    assert np.allclose(segment_eval(seg, mid), 3 * mid + 1, atol=1e-14)


def test_segment_eval_quadratic_order():
    def err(m):
        s = np.linspace(-TAU, 0, m + 1)
        seg = HistorySegment(TAU, np.outer(s**2, np.ones(1)))
        probe = np.linspace(-TAU, 0, 1001)
        return max(abs(segment_eval(seg, float(p))[0] - p**2) for p in probe)

    assert err(32) / err(64) == pytest.approx(4.0, rel=0.05)


def test_segment_eval_domain():
    with pytest.raises(DomainError):
        segment_eval(smooth_state(0).segment, 0.1)


def test_tilde_semigroup_identity():
    x = smooth_state(2)
    assert np.array_equal(tilde_semigroup_apply(DOM, 0.0, x).nodes, x.nodes)


def test_tilde_semigroup_nilpotent_part():
    x = smooth_state(3)
    y = ProductState(TAU, np.vstack([np.random.default_rng(9).standard_normal((M, 8)), x.head]))
    for t in (1.0, 1.5):
        out = tilde_semigroup_apply(DOM, t, x)
        assert np.array_equal(out.nodes, tilde_semigroup_apply(DOM, t, y).nodes)
        xi = np.linspace(-TAU, 0, M + 1)
        expect = np.exp(np.outer(t + xi, DOM.eigenvalues)) * x.head
        assert np.allclose(out.nodes, expect, rtol=1e-14)


@given(st.integers(0, 70), st.integers(0, 70))
@settings(max_examples=40)
def test_tilde_semigroup_law(i, j):
    x = smooth_state(4)
    h = TAU / M
    two = tilde_semigroup_apply(DOM, j * h, tilde_semigroup_apply(DOM, i * h, x))
    assert np.allclose(two.nodes, tilde_semigroup_apply(DOM, (i + j) * h, x).nodes,
                       rtol=1e-13, atol=1e-300)


def test_tilde_semigroup_alignment():
    with pytest.raises(AlignmentError):
        tilde_semigroup_apply(DOM, 0.01, smooth_state(0))
    with pytest.raises(DomainError):
        tilde_semigroup_apply(DOM, -TAU / M, smooth_state(0))


def test_decayed_shift_bound():
    # ||e^{-mu t} S~(t) x|| <= e^{rho t} ||x||, rho = max(0, 1/2 + s(A)) - mu
    mu = 1.0
    rho = max(0.0, 0.5 + DOM.spectral_bound) - mu
    rng = np.random.default_rng(5)
    xs = rng.standard_normal((1000, M + 1, 8)) * rng.uniform(0.1, 10, (1000, 1, 1))
    n0 = batch_h_norm(xs, TAU)
    for n in (1, 8, 16, 32, 40, 96):
        t = n * TAU / M
        out = np.stack([tilde_semigroup_apply(DOM, t, ProductState(TAU, x)).nodes for x in xs[:250]])
        lhs = math.exp(-mu * t) * batch_h_norm(out, TAU)
        assert np.all(lhs <= math.exp(rho * t) * n0[:250] * (1 + 1e-12))


def test_state_arithmetic():
    a, b = smooth_state(0), smooth_state(1)
    assert np.array_equal((a + b - b).nodes, (a + b).nodes - b.nodes)
    assert np.array_equal((2 * a).nodes, 2 * a.nodes)
    assert np.array_equal((-a).nodes, -a.nodes)

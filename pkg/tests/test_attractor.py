import math

import numpy as np
import pytest

from delayrds.attractor import (absorbing_radius, box_counting_dim, hausdorff_semidist, initial_ball,
                                pullback_cloud, pullback_evolve)
from delayrds.dynamics import default_system, run_psi
from delayrds.errors import AlignmentError, ConfigurationError, DomainError
from delayrds.noise import shift
from delayrds.segment import ProductState, batch_h_norm
from delayrds.verify import affine_fixed_point, ladder_ok, semidistance_ladder

SYS = default_system()


def test_initial_ball_radius():
    x = initial_ball(SYS, 100, 3.0, seed=1)
    assert np.all(batch_h_norm(x, 1.0) <= 3.0 + 1e-12)
    assert np.array_equal(x, initial_ball(SYS, 100, 3.0, seed=1))


# -- semidistance -------------------------------------------------------------

def test_semidist_self_zero():
    pts = initial_ball(SYS, 10, 1.0)
    assert hausdorff_semidist(pts, pts, 1.0) == 0.0


def test_semidist_singleton_pair():
    x = initial_ball(SYS, 1, 1.0)[0]
    e = np.random.default_rng(0).standard_normal(x.shape)
    e /= batch_h_norm(e, 1.0)
    a, b = ProductState(1.0, x), ProductState(1.0, x + 0.37 * e)
    assert hausdorff_semidist(a, b) == pytest.approx(0.37, rel=1e-12)


def test_semidist_asymmetric():
    pts = initial_ball(SYS, 12, 1.0)
    assert hausdorff_semidist(pts[:4], pts, 1.0) == 0.0
    assert hausdorff_semidist(pts, pts[:4], 1.0) > 0.0


def test_semidist_empty():
    with pytest.raises(DomainError):
        hausdorff_semidist(np.zeros((0, 33, 8)), initial_ball(SYS, 2, 1.0), 1.0)


# -- absorbing radius ----------------------------------------------------------

def test_absorbing_zero_noise_linear():
    lin = default_system(a=0.0, b=0.0, shape_spec=())
    est = absorbing_radius(lin, lin.path(0), ensemble=32, init_radius=5.0, scan_max=10.0)
    assert est.c == 0.0 and est.R0 == 0.0
    assert est.T_absorb is not None and math.isfinite(est.T_absorb)
    assert est.violations == 0
    assert est.max_norms[-1] < 1e-6


def test_absorbing_default_no_violations():
    est = absorbing_radius(SYS, SYS.path(1), ensemble=64, scan_max=15.0)
    assert est.T_absorb is not None
    assert est.violations == 0
    assert est.radius_empirical <= est.radius_analytic


def test_absorbing_radius_grows_with_noise():
    loud = default_system(shape_spec=(((1, 0.6),), ((2, 0.2),)))
    kw = dict(ensemble=16, init_radius=10.0, scan_max=5.0)
    quiet = absorbing_radius(SYS, SYS.path(2), **kw)
    loud_est = absorbing_radius(loud, loud.path(2), **kw)
    assert loud_est.R0 > quiet.R0
    assert loud_est.radius_analytic > quiet.radius_analytic


def test_absorbing_rejects_weak_dissipation():
    with pytest.raises(ConfigurationError):
        absorbing_radius(default_system(b=1.5), SYS.path(0))


# -- pullback clouds ------------------------------------------------------------

def test_linear_noise_free_collapses():
    lin = default_system(a=0.0, b=0.0, shape_spec=())
    for s in pullback_evolve(lin, lin.path(0), [30.0, 40.0], 16, radius=5.0):
        assert s.diameter() < 1e-10
        assert np.abs(s.states).max() < 1e-10


def test_affine_cloud_matches_closed_form():
    affine = default_system(b=0.0)
    path = affine.path(4)
    star = affine_fixed_point(affine, path, 160.0)
    samples = pullback_evolve(affine, path, [5.0, 10.0, 20.0, 80.0], 16, radius=5.0, seed=4)
    gaps = [batch_h_norm(s.states - star, 1.0).max() for s in samples]
    diam = [s.diameter() for s in samples]
    assert gaps[-1] < 1e-8
    assert diam[0] > diam[1] > diam[2]
    # geometric decay: rate of the slowest delayed mode (about -0.56)
    assert diam[2] / diam[1] < math.exp(-0.4 * 10)


def test_default_ladder_decreasing():
    samples = pullback_evolve(SYS, SYS.path(5), [10, 20, 40, 80], 32, radius=5.0)
    ladder = semidistance_ladder(samples)
    assert ladder_ok(ladder)
    assert ladder[0] > ladder[1]


def test_ladder_rule():
    assert ladder_ok([1e-3, 1e-6, 1e-15, 0.0])
    assert not ladder_ok([1e-3, 1e-2])
    assert not ladder_ok([1e-3, 1e-3])


def test_invariance():
    path = SYS.path(6)
    init = initial_ball(SYS, 32, 5.0, seed=6)
    back = shift(path, -1.0)
    earlier = pullback_cloud(SYS, back, 60.0, init)
    pushed = run_psi(SYS, back, SYS.steps(1.0), earlier)
    now = pullback_cloud(SYS, path, 60.0, init)
    assert hausdorff_semidist(pushed, now, 1.0) < 1e-3


def test_pullback_alignment():
    with pytest.raises(AlignmentError):
        pullback_evolve(SYS, SYS.path(0), [1.001], 2)


# -- box counting ---------------------------------------------------------------

EPS = [0.1, 0.05, 0.02, 0.01, 0.005]


def test_box_singleton():
    x = np.repeat(initial_ball(SYS, 1, 1.0), 20, axis=0)
    res = box_counting_dim(x, EPS, k=3, tau=1.0)
    assert res.dimension == 0.0 and res.degenerate


def test_box_curve():
    t = np.random.default_rng(0).uniform(0, 1, 50_000)
    pts = np.column_stack([t, 0.3 * np.sin(4 * t), 0.2 * t**2])
    res = box_counting_dim(pts, EPS)
    assert res.dimension == pytest.approx(1.0, abs=0.15)


def test_box_disc():
    rng = np.random.default_rng(1)
    r = np.sqrt(rng.uniform(0, 1, 400_000))
    th = rng.uniform(0, 2 * np.pi, 400_000)
    pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
    res = box_counting_dim(pts, [0.1, 0.05, 0.03, 0.02, 0.01])
    assert res.dimension == pytest.approx(2.0, abs=0.2)


def test_box_on_sample_uses_leading_coordinates():
    sample = pullback_evolve(SYS, SYS.path(0), [80.0], 16, radius=1.0)[0]
    res = box_counting_dim(sample, EPS, k=2)
    assert res.degenerate and res.dimension == 0.0


def test_box_needs_sizes():
    with pytest.raises(DomainError):
        box_counting_dim(np.zeros((3, 2)), [0.1])

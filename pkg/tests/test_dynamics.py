import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from delayrds.dynamics import (ModelParams, cocycle_phi, cocycle_psi, conjugated_drift,
                               default_system, delay_operator_L, mild_step, noise_fields,
                               noise_lift, nonlinearity_f, project_P1, project_P2, run_phi,
                               run_psi, simulate)
from delayrds.errors import AlignmentError, ConfigurationError, DimensionError
from delayrds.noise import shift
from delayrds.segment import HistorySegment, ProductState, batch_h_norm, h_norm
from delayrds.space import SpectralDomain, apply_A
from delayrds.verify import scalar_delay_system

SYS = default_system()
NOISE_FREE = default_system(shape_spec=())


def random_state(seed, scale=1.0, sys=SYS):
    rng = np.random.default_rng(seed)
    return ProductState(sys.tau, scale * rng.standard_normal((sys.M + 1, sys.N)))


def seg(nodes, sys=SYS):
    return HistorySegment(sys.tau, nodes)


# -- parameters -------------------------------------------------------------

def test_default_params_satisfy_hypotheses():
    p = SYS.params
    assert p.lipschitz_f == 0.5
    assert p.rho_op(SYS.domain) == -1.0
    p.validate_attractor(SYS.domain)


@pytest.mark.parametrize("kwargs, text", [
    ({"a": 2.0}, "||L|| <= mu"),
    ({"mu": 0.0}, "mu"),
    ({"tau": -1.0}, "tau"),
])
def test_param_rejections(kwargs, text):
    params = ModelParams(**kwargs)
    with pytest.raises(ConfigurationError, match=text.replace("|", r"\|")):
        params.validate(SYS.domain)


def test_attractor_preconditions():
    with pytest.raises(ConfigurationError, match="rho \\+ L_f < 0"):
        ModelParams(b=1.5).validate_attractor(SYS.domain)
    with pytest.raises(ConfigurationError, match="rho < -mu/2"):
        ModelParams(mu=0.6, a=0.1, b=0.0).validate_attractor(SpectralDomain.from_eigenvalues([-0.05]))


# -- nonlinearity and delay operator ----------------------------------------

def test_f_fixed_point():
    assert np.array_equal(nonlinearity_f(SYS, seg(np.zeros((33, 8)))), np.zeros(8))


def test_f_lipschitz_scan():
    rng = np.random.default_rng(0)
    w = SYS.weights
    bound = SYS.params.lipschitz_f
    for _ in range(1000):
        x, y = rng.standard_normal((2, 33, 8)) * rng.uniform(0.01, 5)
        lhs = np.linalg.norm(nonlinearity_f(SYS, seg(x)) - nonlinearity_f(SYS, seg(y)))
        l2 = math.sqrt(w @ np.sum((x - y) ** 2, axis=1))
        assert lhs <= bound * l2 * (1 + 1e-12)


def test_f_small_amplitude_taylor():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((33, 8))
    mean = (SYS.weights @ x) / SYS.tau
    rem = []
    for eps in (1e-3, 5e-4):
        rem.append(np.linalg.norm(nonlinearity_f(SYS, seg(eps * x)) - SYS.params.b * eps * mean))
    assert rem[0] < 1e-8
    assert rem[0] / rem[1] == pytest.approx(8.0, rel=0.05)


def test_delay_operator():
    x = np.random.default_rng(2).standard_normal((2, 33, 8))
    zero_a = default_system(a=0.0)
    assert not delay_operator_L(zero_a, seg(x[0])).any()
    c = np.arange(8.0)
    assert np.array_equal(delay_operator_L(SYS, seg(np.tile(c, (33, 1)))), 0.25 * c)
    assert np.allclose(delay_operator_L(SYS, seg(2 * x[0] + 3 * x[1])),
                       2 * delay_operator_L(SYS, seg(x[0])) + 3 * delay_operator_L(SYS, seg(x[1])))


def test_conjugated_drift_terms():
    rng = np.random.default_rng(3)
    zero = seg(np.zeros((33, 8)))
    assert not conjugated_drift(SYS, (np.zeros(8), np.zeros(8)), zero, zero).any()
    lin = default_system(a=0.0, b=0.0)
    z = rng.standard_normal(8)
    zs = seg(rng.standard_normal((33, 8)))
    assert np.array_equal(conjugated_drift(lin, (z, apply_A(lin.domain, z)), zs, zs),
                          apply_A(lin.domain, z))
    v = seg(rng.standard_normal((33, 8)))
    az = apply_A(SYS.domain, zs.nodes[-1])
    total = conjugated_drift(SYS, (zs.nodes[-1], az), zs, v)
    parts = az - delay_operator_L(SYS, zs) + nonlinearity_f(SYS, seg(v.nodes + zs.nodes))
    assert np.allclose(total, parts, rtol=0, atol=1e-14)
    with pytest.raises(DimensionError):
        conjugated_drift(SYS, (z, z), seg(np.zeros((17, 8))), v)


# -- mild step ----------------------------------------------------------------

def test_mild_step_pure_decay():
    lin = default_system(a=0.0, b=0.0)
    x = random_state(4)
    out = mild_step(lin, x, np.zeros((33, 2)), h=lin.step)
    lam = lin.domain.eigenvalues
    assert np.array_equal(out.head, np.exp((lam - 1.0) * lin.step) * x.head)
    assert np.array_equal(out.nodes[:-1], x.nodes[1:])
    assert np.array_equal(out.head, out.segment.nodes[-1])


def test_mild_step_matches_cocycle():
    path = SYS.path(5)
    x = random_state(5)
    ou, _, _ = noise_fields(SYS, path, -SYS.M, 0)
    assert np.array_equal(mild_step(SYS, x, ou).nodes, cocycle_phi(SYS, path, SYS.step, x).nodes)


def test_mild_step_alignment():
    with pytest.raises(AlignmentError):
        mild_step(SYS, random_state(0), np.zeros((33, 2)), h=0.01)


def rk4_delay_reference(t_end, tau=1.0, fine=2048):
    """u' = -u + 0.25 u(t - tau), u = 1 on [-tau, 0]; RK4 on a fine grid."""
    h = tau / fine
    n = int(round(t_end / h))
    u = np.ones(fine + n + 1)

    def lag(k2):  # delayed value at half-index k2/2 relative to the start
        i = k2 / 2
        lo = int(math.floor(i))
        return u[lo] + (i - lo) * (u[min(lo + 1, len(u) - 1)] - u[lo])

    for k in range(n):
        i = fine + k
        d0, dh, d1 = lag(2 * k), lag(2 * k + 1), lag(2 * k + 2)
        k1 = -u[i] + 0.25 * d0
        k2 = -(u[i] + 0.5 * h * k1) + 0.25 * dh
        k3 = -(u[i] + 0.5 * h * k2) + 0.25 * dh
        k4 = -(u[i] + h * k3) + 0.25 * d1
        u[i + 1] = u[i] + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
    return u[-1]


def test_scalar_delay_first_order_convergence():
    ref = rk4_delay_reference(3.0)
    errs = []
    for M in (16, 32, 64):
        sys = scalar_delay_system(M)
        out = run_phi(sys, sys.path(0), 3 * M, np.ones((M + 1, 1)))
        errs.append(abs(out[-1, 0] - ref))
    assert errs[-1] < 1e-3
    for a, b in zip(errs, errs[1:]):
        assert a / b == pytest.approx(2.0, rel=0.2)


def test_nonlinear_first_order_convergence():
    c = 0.8 * np.eye(8)[0] - 0.5 * np.eye(8)[1] + 0.3 * np.eye(8)[2]

    def head_at(M, t=2.0):
        sys = default_system(history_nodes=M, shape_spec=(), b=0.5)
        return run_phi(sys, sys.path(0), int(t * M), np.tile(c, (M + 1, 1)))[-1]

    ref = head_at(1024)
    errs = [np.linalg.norm(head_at(M) - ref) for M in (32, 64, 128)]
    for a, b in zip(errs, errs[1:]):
        assert a / b == pytest.approx(2.0, rel=0.2)


# -- cocycles -----------------------------------------------------------------

def test_cocycle_zero_time():
    x = random_state(6)
    assert cocycle_phi(SYS, SYS.path(0), 0.0, x) is x
    assert cocycle_psi(SYS, SYS.path(0), 0.0, x) is x


@given(st.integers(0, 96), st.integers(0, 96), st.integers(0, 2**32))
@settings(max_examples=30, deadline=None)
def test_cocycle_bitwise(s, t, seed):
    path = SYS.path(seed)
    x = random_state(seed % 1000).nodes
    h = SYS.step
    assert np.array_equal(run_phi(SYS, path, s + t, x),
                          run_phi(SYS, shift(path, s * h), t, run_phi(SYS, path, s, x)))
    assert np.array_equal(run_psi(SYS, path, s + t, x),
                          run_psi(SYS, shift(path, s * h), t, run_psi(SYS, path, s, x)))


def test_cocycle_public_api_composes():
    path = SYS.path(3)
    x = random_state(3)
    whole = cocycle_psi(SYS, path, 2.5, x)
    split = cocycle_psi(SYS, shift(path, 1.0), 1.5, cocycle_psi(SYS, path, 1.0, x))
    assert np.array_equal(whole.nodes, split.nodes)


def test_linear_head_decays_monotonically():
    lin = default_system(a=0.0, b=0.0, shape_spec=())
    traj = simulate(lin, lin.path(0), 5.0, random_state(7, sys=lin), psi_init=False)
    heads = np.linalg.norm(traj.states[:, -1], axis=1)
    assert np.all(np.diff(heads) <= 0)


def test_psi_equals_phi_without_noise():
    x = random_state(8)
    path = NOISE_FREE.path(0)
    assert np.array_equal(cocycle_psi(NOISE_FREE, path, 2.0, x).nodes,
                          cocycle_phi(NOISE_FREE, path, 2.0, x).nodes)


def test_psi_minus_phi_is_ou_field():
    path = SYS.path(9)
    chi = random_state(9)
    t = 1.5
    psi = cocycle_psi(SYS, path, t, chi)
    phi = cocycle_phi(SYS, path, t, chi - noise_lift(SYS, path, 0.0))
    z_t = noise_lift(SYS, path, t)
    assert np.allclose(project_P2(psi) - project_P2(phi), project_P2(z_t), rtol=0, atol=1e-12)
    assert np.allclose(project_P1(psi).nodes - project_P1(phi).nodes, z_t.nodes, rtol=0, atol=1e-12)


@pytest.mark.parametrize("t", [1.0, 5.0, 10.0])
def test_lipschitz_in_initial_data(t):
    p = SYS.params
    rate = p.lipschitz_f + abs(p.a) + p.rho_op(SYS.domain)
    rng = np.random.default_rng(int(t))
    n = SYS.steps(t)
    for seed in range(10):
        x = rng.standard_normal((8, 33, 8)) * 3
        h = rng.standard_normal((8, 33, 8)) * 10.0 ** rng.uniform(-4, 0, (8, 1, 1))
        path = SYS.path(seed)
        diff = run_psi(SYS, path, n, x + h) - run_psi(SYS, path, n, x)
        assert np.all(batch_h_norm(diff, 1.0) <= math.exp(rate * t) * batch_h_norm(h, 1.0))


def test_trajectory_record():
    path = SYS.path(10)
    x = random_state(10)
    traj = simulate(SYS, path, 1.0, x)
    assert traj.t0 == 0.0 and traj.t1 == pytest.approx(1.0)
    assert len(traj.states) == SYS.M + 1
    assert np.allclose(traj.psi_states()[0], x.nodes, rtol=0, atol=1e-14)
    assert np.allclose(traj.psi_states()[-1], cocycle_psi(SYS, path, 1.0, x).nodes, rtol=0, atol=1e-12)
    for k in range(3):
        nxt = cocycle_phi(SYS, shift(path, k * SYS.step), SYS.step, traj.state(k))
        assert np.array_equal(nxt.nodes, traj.states[k + 1])
    assert h_norm(ProductState(1.0, traj.psi_states()[-1])) == pytest.approx(traj.h_norms()[-1])

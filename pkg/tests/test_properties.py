"""Randomized invariants."""

import dataclasses

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from sidebalance import control_core as cc
from sidebalance import mrac_tracker as mrac
from sidebalance import plant_models as pm
from sidebalance import scenarios as sc
from sidebalance import sim_engine as se
from sidebalance import stance_regulator as sr

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
positive = st.floats(0.1, 20, allow_nan=False)
# zero or comfortably above underflow, so squares stay representable
signed = st.one_of(st.just(0.0), st.floats(1e-6, 10), st.floats(-10, -1e-6))


@st.composite
def params(draw):
    L = draw(st.floats(0.2, 1.5))
    return pm.PhysicalParams(
        cart_mass=draw(st.floats(0.5, 10)),
        body_mass=draw(st.floats(0.5, 30)),
        leg_length=L,
        gravity=draw(st.floats(1.0, 20.0)),
        com_offset=draw(st.floats(-0.9, 0.9)) * L,
        friction_b=draw(st.floats(0.0, 20.0)),
    )


@st.composite
def mats(draw, lo=-5.0, hi=5.0):
    return np.array([[draw(st.floats(lo, hi)) for _ in range(2)] for _ in range(2)])


@st.composite
def hurwitz(draw):
    A = draw(mats())
    shift = max(np.linalg.eigvals(A).real) + draw(st.floats(0.05, 3.0))
    return A - shift * np.eye(2)


@st.composite
def spd(draw):
    R = draw(mats(-2, 2))
    return R @ R.T + draw(st.floats(0.05, 2.0)) * np.eye(2)


@given(params(), st.floats(-1.5, 1.5), st.floats(-0.3, 0.3), st.floats(-20, 20))
def test_full_dynamics_is_torque_over_inertia(p, theta, y, y_ddot):
    tau = pm.stance_torque(p, theta, y, y_ddot)
    got = pm.theta_ddot_full(p, theta, y, y_ddot)
    assert got == pytest.approx(tau / pm.inertia_sum(p, y), rel=1e-13, abs=1e-300)


@given(params(), st.floats(-0.2, 0.2))
def test_virtual_control_bijection(p, y):
    assert pm.y_from_virtual(p, pm.virtual_from_y(p, y)) == pytest.approx(y, abs=1e-12)


@given(params())
def test_equilibrium_has_zero_acceleration(p):
    y_star = pm.equilibrium_cart_position(p)
    assert abs(pm.theta_ddot_full(p, 0.0, y_star, 0.0)) <= 1e-12
    assert abs(pm.theta_ddot_linear(p, 0.0, y_star, 0.0)) <= 1e-12
    assert pm.cart_accel(p, 0.0, 0.0) == 0.0


@given(mats())
def test_eig2_agrees_with_numpy(A):
    ours = sorted(cc.eig2(A), key=lambda z: (z.real, z.imag))
    ref = sorted(np.linalg.eigvals(A).astype(complex), key=lambda z: (z.real, z.imag))
    scale = max(1.0, np.max(np.abs(A)))
    assert np.allclose(ours, ref, atol=1e-7 * scale)
    # trace and determinant are reproduced regardless of conditioning
    assert sum(ours) == pytest.approx(np.trace(A), abs=1e-12 * scale)
    assert (ours[0] * ours[1]).real == pytest.approx(np.linalg.det(A), abs=1e-10 * scale**2)


@given(mats(), st.floats(-3, 3), st.floats(-3, 3), st.floats(-8, -0.2), st.floats(0.0, 4.0),
       st.booleans())
def test_place_poles2_hits_targets(A, b1, b2, re, im, complex_pair):
    B = np.array([b1, b2])
    assume(abs(cc.controllability_det(A, B)) > 1e-2)
    if complex_pair:
        mu1, mu2 = complex(re, im), complex(re, -im)
    else:
        mu1, mu2 = re, re - im
    K = cc.place_poles2(A, B, mu1, mu2)
    Acl = A - np.outer(B, K)
    # coefficient matching is the exact postcondition
    target = np.poly([mu1, mu2]).real
    assert -np.trace(Acl) == pytest.approx(target[1], abs=1e-8 * (1 + abs(target[1])))
    assert np.linalg.det(Acl) == pytest.approx(target[2], rel=1e-7, abs=1e-7)


@given(hurwitz(), spd())
def test_lyapunov_solution(A, Q):
    assume(np.linalg.cond(A) < 1e6)
    P = cc.solve_lyapunov2(A, Q)
    scale = max(1.0, np.max(np.abs(P)) * max(1.0, np.max(np.abs(A))), np.max(np.abs(Q)))
    assert cc.lyapunov_residual(P, A, Q) <= 1e-12 * scale
    assert cc.is_spd2(P)
    assert cc.is_hurwitz2(A)


@given(st.sampled_from([1, 2, 3, 4]), st.floats(-0.5, 0.5), st.floats(-5, 5))
def test_resolve_x1_fixed_point(index, theta, x2_hat):
    cfg = sc.scenario_config(index)
    lin, d = sr.linearize(cfg.physical), cfg.design
    x1 = sr.resolve_x1(theta, x2_hat, d, lin)
    assert sr.theta_from_state(x1, sr.control_v(d, x1, x2_hat), lin) == pytest.approx(theta, abs=1e-11)
    x1b, x2b, v = sr.resolve_loop(theta, sr.eta_from_x2_hat(d, x1, x2_hat), d, lin)
    assert x1b == pytest.approx(x1, rel=1e-9, abs=1e-11)


@given(st.lists(signed, min_size=5, max_size=5), spd())
def test_lyapunov_value_positive_definite(v, P):
    cfg = mrac.MracConfig()
    e, dK, dKr = np.array(v[:2]), np.array(v[2:4]), v[4]
    V = mrac.lyapunov_value(e, dK, dKr, P, cfg)
    if np.any(e) or np.any(dK) or dKr:
        assert V > 0
    else:
        assert V == 0


@given(st.lists(finite, min_size=8, max_size=8), positive, positive)
def test_lyapunov_rate_identity(v, M, b_nom):
    cfg = mrac.MracConfig(b_nominal=b_nom)
    der = mrac.derive(M, cfg)
    X, e, dK = np.array(v[0:2]), np.array(v[2:4]), np.array(v[4:6])
    rate = mrac.lyapunov_rate(cfg, der, X, e, dK, v[6], v[7])
    eqe = float(e @ cfg.Q @ e)
    scale = 1 + np.max(np.abs(cfg.gamma_x)) * (1 + np.max(np.abs(v))) ** 3
    assert rate == pytest.approx(-eqe, abs=1e-12 * scale)


@given(positive, st.floats(0, 20), positive)
def test_ideal_gains_match(M, b_true, b_nom):
    Kx, Kr = mrac.ideal_gains(M, b_true, b_nom)
    res = mrac.matching_residuals(M, b_true, b_nom, Kx, Kr)
    assert max(res) <= 8 * np.finfo(float).eps * (1 + (b_true + b_nom) / M)


@given(st.floats(-0.3, 0.3), positive, positive)
def test_prescaled_reference_steady_state(y_ref, M, b_nom):
    Am, Bm = mrac.make_reference_model(M, b_nom)
    r = mrac.prescale_reference(y_ref, M, b_nom)
    steady = np.linalg.solve(Am, -Bm * r)
    assert steady[0] == pytest.approx(y_ref, abs=1e-12)
    assert steady[1] == pytest.approx(0.0, abs=1e-12)


@given(st.floats(0.3, 20), st.floats(1e-4, 0.5))
def test_settling_time_of_exponential(rate, band):
    t = np.arange(0, 60, 0.001)
    ts = se.settling_time(np.exp(-rate * t), 0.0, band, t=t)
    assume(ts is not None)
    assert ts == pytest.approx(np.log(1 / band) / rate, abs=2e-3)


@given(st.integers(1, 20), st.integers(0, 2**32 - 1))
def test_csv_roundtrip_random(n, seed):
    import tempfile
    from pathlib import Path
    rng = np.random.default_rng(seed)
    data = rng.normal(size=(n, len(se.COLUMNS))) * 10.0 ** rng.integers(-12, 12, size=(n, len(se.COLUMNS)))
    res = se.SimResult.from_rows([tuple(r) for r in data], status=se.COMPLETED, mode="sequential", dt=0.01)
    with tempfile.TemporaryDirectory() as tmp:
        back = sc.read_csv(sc.write_csv(res, Path(tmp) / "x.csv"))
    for i, name in enumerate(se.COLUMNS):
        assert np.array_equal(back[name], data[:, i])


@given(st.sampled_from([1, 2, 3, 4]), st.floats(-0.05, 0.05))
def test_sequential_equilibrium_and_regulation(index, theta0):
    cfg = sc.scenario_config(index)
    cfg = cfg.replace(sim=dataclasses.replace(cfg.sim, theta0=theta0, duration=1.0))
    res = cfg.run()
    assert res.status == se.COMPLETED
    if theta0 == 0:
        assert np.max(np.abs(res.x1)) == 0.0
    # the observer error is never amplified
    err = np.abs(res.x2 - res.x2_hat)
    assert np.all(np.diff(err) <= 1e-12 + 1e-9 * err[:-1])

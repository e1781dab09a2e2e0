import dataclasses
import math

import numpy as np
import pytest

from sidebalance import plant_models as pm
from sidebalance import sim_engine as se
from sidebalance import stance_regulator as sr
from sidebalance.scenarios import scenario_config


def _cfg(index=1, **sim):
    cfg = scenario_config(index)
    return cfg.replace(sim=dataclasses.replace(cfg.sim, **sim))


def test_sim_config_validation():
    assert se.SimConfig().steps == 1000
    for bad in (dict(dt=0.0), dict(dt=0.06), dict(duration=0.001), dict(integrator="rk45"),
                dict(mode="both"), dict(dt=math.nan)):
        with pytest.raises(ValueError):
            se.SimConfig(**bad)


def test_rk4_examples():
    x = np.array([1.0, -2.0])
    assert np.array_equal(se.rk4_step(lambda t, s: np.zeros(2), x, 0.0, 0.01), x)
    s = np.array([1.0])
    for k in range(100):
        s = se.rk4_step(lambda t, z: -z, s, k * 0.01, 0.01)
    assert abs(s[0] - math.exp(-1)) < 1e-9


def test_non_finite_derivative():
    with pytest.raises(se.NonFiniteDerivative):
        se.rk4_step(lambda t, s: s * math.nan, np.ones(2), 0.0, 0.01)


def test_euler_first_order():
    errs = []
    for dt in (0.02, 0.01):
        s = np.array([1.0])
        for k in range(int(round(1 / dt))):
            s = se.euler_step(lambda t, z: -z, s, k * dt, dt)
        errs.append(abs(s[0] - math.exp(-1)))
    assert math.log2(errs[0] / errs[1]) == pytest.approx(1.0, abs=0.05)


def test_equilibrium_sequential_and_coupled():
    for mode in ("sequential", "coupled"):
        res = _cfg(1, theta0=0.0, mode=mode).run()
        assert res.status == se.COMPLETED
        y_star = pm.equilibrium_cart_position(scenario_config(1).physical)
        assert np.max(np.abs(res.v)) <= 1e-12
        assert np.max(np.abs(res.y_ref - y_star)) <= 1e-12
        assert np.max(np.abs(res.theta)) <= 1e-12


@pytest.mark.parametrize("index", [1, 2, 3, 4])
def test_coupled_derivative_zero_at_equilibrium(index):
    cfg = _cfg(index, theta0=0.0, mode="coupled")
    loop = se.BalanceLoop(cfg.physical, cfg.regulator, cfg.design, cfg.mrac, "coupled")
    d = loop.derivative(0.0, loop.initial_state(cfg.sim))
    assert np.max(np.abs(d)) <= 1e-15


def test_scenario1_sequential_run():
    res = _cfg(1, duration=20.0).run()
    assert res.status == se.COMPLETED
    assert se.settling_time(res.x1, 0.0, 1e-3, t=res.t) <= 3.0
    assert abs(res.y[-1] - res.y_ref[-1]) < 1e-3


def test_grid_integrity_and_determinism():
    a = _cfg(2, duration=2.0).run()
    b = _cfg(2, duration=2.0).run()
    for name in se.COLUMNS:
        assert np.array_equal(getattr(a, name), getattr(b, name))
        assert len(getattr(a, name)) == len(a) == 201
    assert np.allclose(np.diff(a.t), 0.01, atol=1e-12)
    assert a.t[0] == 0.0


def test_fall_detection_truncates():
    res = _cfg(1, mode="coupled", theta0=0.02).run()
    assert res.status in (se.FELL, se.DIVERGED)
    assert len(res) < 1001
    if res.status == se.FELL:
        assert np.all(np.abs(res.theta) < pm.FALL_ANGLE)


def test_fell_status_from_large_angle():
    res = _cfg(3, mode="coupled", theta0=1.0).run()
    assert res.status == se.FELL
    assert np.all(np.abs(res.theta) < pm.FALL_ANGLE)


def test_cart_coasts_without_force_or_friction():
    from sidebalance import mrac_tracker as mrac
    # frozen zero gains keep u_c identically zero
    cfg = mrac.MracConfig(gamma_x=np.zeros((2, 2)), gamma_r=0.0)
    der = mrac.derive(3.0, cfg)
    s = np.array([0.1, 0.25, 0.1, 0.25, 0.0, 0.0, 0.0])

    def f(t, z):
        return np.array(mrac.tracking_rates(cfg, der, 3.0, 0.0, z.tolist(), 0.0)[0])

    for k in range(500):
        s = se.rk4_step(f, s, k * 0.01, 0.01)
    assert abs(s[1] - 0.25) <= 1e-12


def test_ideal_state_feedback_mode():
    cfg = scenario_config(1)
    cfg = cfg.replace(regulator=dataclasses.replace(cfg.regulator, use_observer=False))
    res = cfg.run()
    assert np.array_equal(res.x2, res.x2_hat)
    assert se.settling_time(res.x1, 0.0, 1e-3, t=res.t) <= 3.0
    with pytest.raises(ValueError):
        se.BalanceLoop(cfg.physical, cfg.regulator, cfg.design, cfg.mrac, "coupled")


def test_initial_stance_consistent():
    cfg = scenario_config(1)
    for use_obs in (True, False):
        reg = dataclasses.replace(cfg.regulator, use_observer=use_obs)
        loop = se.BalanceLoop(cfg.physical, reg, cfg.design, cfg.mrac, "sequential")
        x1, x2, eta = loop.initial_stance(0.03, -0.2)
        row = dict(zip(se.COLUMNS, loop.sample(0.0, np.array([x1, x2, eta, 0, 0, 0, 0, 0, 0, 0]))))
        assert row["theta"] == pytest.approx(0.03, abs=1e-12)
        assert row["theta_dot"] == pytest.approx(-0.2, abs=1e-12)


def test_initial_reference_matches_plant():
    res = _cfg(3, duration=0.5).run()
    assert res.e1[0] == 0.0 and res.e2[0] == 0.0


def test_settling_time_examples():
    t = np.arange(0, 5, 0.001)
    assert se.settling_time(np.full(10, 2.0), 2.0, 1e-3) == 0.0
    ts = se.settling_time(np.exp(-4.5 * t), 0.0, 1e-3, t=t)
    assert ts == pytest.approx(math.log(1000) / 4.5, abs=2e-3)
    assert se.settling_time(np.exp(t), 0.0, 1e-3, t=t) is None
    with pytest.raises(ValueError):
        se.settling_time([1, 0], 0.0, 1.5)


def test_fit_exp_rate_examples():
    t = np.arange(0, 0.5, 0.01)
    assert se.fit_exp_rate(np.exp(-10 * t), t) == pytest.approx(-10, abs=1e-6)
    assert se.fit_exp_rate(np.full_like(t, 3.0), t) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(se.DegenerateFit):
        se.fit_exp_rate(np.zeros(20), np.arange(20))


def test_observer_error_rate_scenario1():
    res = scenario_config(1).run()
    w = res.t <= 0.5
    assert se.fit_exp_rate((res.x2 - res.x2_hat)[w], res.t[w]) == pytest.approx(-10, rel=0.01)


def test_simulate_stance_shapes():
    cfg = scenario_config(1)
    lin = sr.linearize(cfg.physical)
    t, s = se.simulate_stance(cfg.design, lin, [0.05, 0.0, -0.5], 0.01, 50)
    assert t.shape == (51,) and s.shape == (51, 3)


def test_boundedness_long_run():
    res = _cfg(1, duration=100.0).run()
    assert res.status == se.COMPLETED
    for name in ("e1", "e2", "kx1_hat", "kx2_hat", "kr_hat"):
        assert np.max(np.abs(getattr(res, name))) < 1e6


def test_result_fields():
    assert se.result_fields()[: len(se.COLUMNS)] == se.COLUMNS

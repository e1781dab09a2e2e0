"""Fixed-step simulation of the balance pipeline.

Two pipelines share one logging schema:

``sequential``
    The linear stance loop (X1, X2, eta) is regulated on its own. Its virtual
    control v(t) is mapped to a cart position demand y_ref(t), which the MRAC
    loop tracks on the true cart. Causality only runs stance -> cart, so both
    phases are integrated in the same RK4 step on the same grid.

``coupled``
    The nonlinear stance dynamics are driven by the actual cart position and
    acceleration. theta is measured and X1 is recovered by closing the
    feedthrough loop on every stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Callable, Optional

import numpy as np

from . import mrac_tracker as mrac
from . import plant_models as pm
from . import stance_regulator as sr

DIVERGENCE_LIMIT = 1e6
MAX_DT = 0.05

COLUMNS = (
    "t", "theta", "theta_dot", "x1", "x2", "x2_hat", "v", "y_ref", "r", "y", "y_dot",
    "u_c", "e1", "e2", "kx1_hat", "kx2_hat", "kr_hat", "V",
)

COMPLETED, FELL, DIVERGED = "completed", "fell", "diverged"


class NonFiniteDerivative(ArithmeticError):
    pass


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.01
    duration: float = 10.0
    integrator: str = "rk4"
    mode: str = "sequential"
    theta0: float = 0.0349
    theta_dot0: float = 0.0
    # None places the cart at its equilibrium position
    y0: Optional[float] = None
    y_dot0: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.dt) and 0 < self.dt <= MAX_DT):
            raise ValueError(f"dt must be in (0, {MAX_DT}], got {self.dt}")
        if not (math.isfinite(self.duration) and self.duration >= self.dt):
            raise ValueError(f"duration must be >= dt, got {self.duration}")
        if self.integrator not in STEPPERS:
            raise ValueError(f"integrator must be one of {sorted(STEPPERS)}, got {self.integrator!r}")
        if self.mode not in ("sequential", "coupled"):
            raise ValueError(f"mode must be 'sequential' or 'coupled', got {self.mode!r}")

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.dt))


@dataclass
class SimResult:
    t: np.ndarray
    theta: np.ndarray
    theta_dot: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    x2_hat: np.ndarray
    v: np.ndarray
    y_ref: np.ndarray
    r: np.ndarray
    y: np.ndarray
    y_dot: np.ndarray
    u_c: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    kx1_hat: np.ndarray
    kx2_hat: np.ndarray
    kr_hat: np.ndarray
    V: np.ndarray
    status: str = COMPLETED
    mode: str = "sequential"
    dt: float = 0.01

    def __len__(self) -> int:
        return len(self.t)

    def columns(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in COLUMNS}

    @property
    def e_norm(self) -> np.ndarray:
        return np.hypot(self.e1, self.e2)

    @classmethod
    def from_rows(cls, rows: list[tuple], status: str, mode: str, dt: float) -> "SimResult":
        data = np.array(rows, dtype=float).reshape(-1, len(COLUMNS))
        return cls(**{name: data[:, i].copy() for i, name in enumerate(COLUMNS)},
                   status=status, mode=mode, dt=dt)


def _check_finite(k: np.ndarray) -> np.ndarray:
    if not math.isfinite(k.sum()):
        raise NonFiniteDerivative("derivative evaluated to a non-finite value")
    return k


def rk4_step(f: Callable[[float, np.ndarray], np.ndarray], x: np.ndarray, t: float, dt: float) -> np.ndarray:
    k1 = _check_finite(f(t, x))
    k2 = _check_finite(f(t + 0.5 * dt, x + 0.5 * dt * k1))
    k3 = _check_finite(f(t + 0.5 * dt, x + 0.5 * dt * k2))
    k4 = _check_finite(f(t + dt, x + dt * k3))
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def euler_step(f: Callable[[float, np.ndarray], np.ndarray], x: np.ndarray, t: float, dt: float) -> np.ndarray:
    return x + dt * _check_finite(f(t, x))


STEPPERS = {"rk4": rk4_step, "euler": euler_step}


class BalanceLoop:
    """Derivatives and signal reconstruction for one configured run.

    State layout (10 entries): ``[s0, s1, eta, y, y_dot, xm1, xm2, kx1, kx2, kr]``
    where ``(s0, s1)`` is ``(X1, X2)`` in sequential mode and
    ``(theta, theta_dot)`` in coupled mode.
    """

    def __init__(self, params: pm.PhysicalParams, reg: sr.RegulatorConfig, design: sr.RegulatorDesign,
                 mcfg: mrac.MracConfig, mode: str):
        if mode == "coupled" and not reg.use_observer:
            raise ValueError("coupled mode needs the observer: X2 is not measurable")
        self.params = params
        self.reg = reg
        self.design = design
        self.mcfg = mcfg
        self.mode = mode
        self.lin = sr.linearize(params)
        self.derived = mrac.derive(params.cart_mass, mcfg)
        self.K_x_ideal, self.K_r_ideal = mrac.ideal_gains(
            params.cart_mass, params.friction_b, mcfg.b_nominal
        )
        # affine maps v -> y_ref -> r, hoisted out of the inner loop
        y_at_zero = pm.y_from_virtual(params, 0.0)
        self._y_coeffs = (y_at_zero, pm.y_from_virtual(params, 1.0) - y_at_zero)
        self._r_gain = mrac.prescale_reference(1.0, params.cart_mass, mcfg.b_nominal,
                                               mcfg.prescale_reference)

    # -- stance side -------------------------------------------------------

    def _stance_v(self, x1: float, x2: float, eta: float) -> float:
        d = self.design
        x2_hat = eta + d.K_e * x1 if self.reg.use_observer else x2
        return -(d.k1 * x1 + d.k2 * x2_hat)

    def initial_stance(self, theta0: float, theta_dot0: float) -> tuple[float, float, float]:
        """``(X1, X2, eta)`` consistent with the measured theta, theta_dot."""
        d, lin = self.design, self.lin
        f, k1, k2 = lin.feedthrough, d.k1, d.k2
        if self.reg.use_observer:
            x1 = sr.resolve_x1(theta0, self.reg.x2_hat0, d, lin)
            eta = sr.eta_from_x2_hat(d, x1, self.reg.x2_hat0)
            v = sr.control_v(d, x1, self.reg.x2_hat0)
            x2 = sr.x2_from_theta_dot(theta_dot0, x1, eta, v, d, lin)
            return x1, x2, eta
        # x1 = theta + f (k1 x1 + k2 x2);  x2 = theta_dot + f (k1 x2 + k2 (-a x1 + b v))
        a, b = lin.a, lin.b_lin
        lhs = np.array([
            [1 - f * k1, -f * k2],
            [f * k2 * (a + b * k1), 1 - f * k1 + f * k2 * b * k2],
        ])
        x1, x2 = np.linalg.solve(lhs, [theta0, theta_dot0])
        return float(x1), float(x2), sr.eta_from_x2_hat(d, float(x1), float(x2))

    # -- cart side ---------------------------------------------------------

    def _reference(self, v: float) -> tuple[float, float]:
        y_ref = self._y_coeffs[0] + self._y_coeffs[1] * v
        return y_ref, self._r_gain * y_ref

    # -- derivative --------------------------------------------------------

    def derivative(self, t: float, s: np.ndarray) -> np.ndarray:
        d, lin = self.design, self.lin
        eta = s[2]
        if self.mode == "sequential":
            x1, x2 = s[0], s[1]
            v = self._stance_v(x1, x2, eta)
            head = [x2, -lin.a * x1 + lin.b_lin * v]
        else:
            theta, theta_dot = s[0], s[1]
            x1, _, v = sr.resolve_loop(theta, eta, d, lin)
        _, r = self._reference(v)
        cart, _ = mrac.tracking_rates(self.mcfg, self.derived, self.params.cart_mass,
                                      self.params.friction_b, s[3:10].tolist(), r)
        if self.mode == "coupled":
            head = [theta_dot, pm.theta_ddot_full(self.params, theta, s[3], cart[1])]
        return np.array([*head, sr.observer_eta_dot(d, lin, x1, v, eta), *cart])

    def sample(self, t: float, s: np.ndarray) -> tuple:
        """One logged row in :data:`COLUMNS` order."""
        d, lin = self.design, self.lin
        eta = s[2]
        if self.mode == "sequential":
            x1, x2 = s[0], s[1]
            v = self._stance_v(x1, x2, eta)
            x2_hat = sr.x2_hat_from_eta(d, x1, eta) if self.reg.use_observer else x2
            eta_dot = sr.observer_eta_dot(d, lin, x1, v, eta)
            if self.reg.use_observer:
                v_dot = -d.k1 * x2 - d.k2 * (eta_dot + d.K_e * x2)
            else:
                v_dot = -d.k1 * x2 - d.k2 * (-lin.a * x1 + lin.b_lin * v)
            theta = sr.theta_from_state(x1, v, lin)
            theta_dot = x2 + lin.feedthrough * v_dot
        else:
            theta, theta_dot = s[0], s[1]
            x1, x2_hat, v = sr.resolve_loop(theta, eta, d, lin)
            x2 = sr.x2_from_theta_dot(theta_dot, x1, eta, v, d, lin)
        y_ref, r = self._reference(v)
        y, y_dot, xm1, xm2, kx1, kx2, kr = s[3:10].tolist()
        u = kx1 * y + kx2 * y_dot + kr * r
        e1, e2 = y - xm1, y_dot - xm2
        dKx = s[7:9] - self.K_x_ideal
        dKr = s[9] - self.K_r_ideal
        V = mrac.lyapunov_value((e1, e2), dKx, dKr, self.derived.P, self.mcfg)
        return (t, theta, theta_dot, x1, x2, x2_hat, v, y_ref, r, y, y_dot,
                u, e1, e2, kx1, kx2, kr, V)

    def initial_state(self, sim: SimConfig) -> np.ndarray:
        y0 = pm.equilibrium_cart_position(self.params) if sim.y0 is None else sim.y0
        m = self.mcfg
        if self.mode == "sequential":
            x1, x2, eta = self.initial_stance(sim.theta0, sim.theta_dot0)
            head = (x1, x2, eta)
        else:
            x1 = sr.resolve_x1(sim.theta0, self.reg.x2_hat0, self.design, self.lin)
            head = (sim.theta0, sim.theta_dot0, sr.eta_from_x2_hat(self.design, x1, self.reg.x2_hat0))
        # reference model starts on the plant so e(0) = 0
        return np.array([*head, y0, sim.y_dot0, y0, sim.y_dot0,
                         m.k_x_hat0[0], m.k_x_hat0[1], m.k_r_hat0], dtype=float)


def _run(loop: BalanceLoop, sim: SimConfig, x0: Optional[np.ndarray] = None) -> SimResult:
    step = STEPPERS[sim.integrator]
    s = loop.initial_state(sim) if x0 is None else np.asarray(x0, dtype=float)
    rows = [loop.sample(0.0, s)]
    status = COMPLETED
    for k in range(sim.steps):
        t = k * sim.dt
        s_next = step(loop.derivative, s, t, sim.dt)
        if np.max(np.abs(s_next)) > DIVERGENCE_LIMIT:
            status = DIVERGED
            break
        if loop.mode == "coupled" and abs(s_next[0]) >= pm.FALL_ANGLE:
            status = FELL
            break
        s = s_next
        rows.append(loop.sample((k + 1) * sim.dt, s))
    return SimResult.from_rows(rows, status=status, mode=loop.mode, dt=sim.dt)


def run_sequential(params: pm.PhysicalParams, reg: sr.RegulatorConfig, design: sr.RegulatorDesign,
                   mcfg: mrac.MracConfig, sim: SimConfig) -> SimResult:
    return _run(BalanceLoop(params, reg, design, mcfg, "sequential"), sim)


def run_coupled(params: pm.PhysicalParams, reg: sr.RegulatorConfig, design: sr.RegulatorDesign,
                mcfg: mrac.MracConfig, sim: SimConfig) -> SimResult:
    return _run(BalanceLoop(params, reg, design, mcfg, "coupled"), sim)


def run(params, reg, mcfg, sim: SimConfig) -> SimResult:
    """Design the regulator and dispatch on ``sim.mode``."""
    design = sr.design_regulator(sr.linearize(params), reg)
    runner = run_sequential if sim.mode == "sequential" else run_coupled
    return runner(params, reg, design, mcfg, sim)


def simulate_stance(design: sr.RegulatorDesign, lin: sr.StanceLinearization, x0, dt: float,
                    steps: int, v_override: Optional[Callable[[float], float]] = None,
                    integrator: str = "rk4") -> tuple[np.ndarray, np.ndarray]:
    """Integrate only the linear stance loop ``(X1, X2, eta)``.

    ``v_override`` replaces the regulator output with an exogenous signal.
    Returns ``(t, states)`` with ``states`` of shape ``(steps + 1, 3)``.
    """
    step = STEPPERS[integrator]

    def f(t, s):
        x1, x2, eta = s
        if v_override is None:
            v = sr.control_v(design, x1, sr.x2_hat_from_eta(design, x1, eta))
        else:
            v = v_override(t)
        return np.array([x2, -lin.a * x1 + lin.b_lin * v, sr.observer_eta_dot(design, lin, x1, v, eta)])

    out = np.empty((steps + 1, 3))
    out[0] = x0
    s = np.asarray(x0, dtype=float)
    for k in range(steps):
        s = step(f, s, k * dt, dt)
        out[k + 1] = s
    return np.arange(steps + 1) * dt, out


def settling_time(series, reference: float, band: float, t=None, dt: float = 1.0) -> Optional[float]:
    """First time after which ``|series - reference|`` stays within ``band`` of
    the initial deviation. ``None`` when the series ends outside the band."""
    if not 0 < band < 1:
        raise ValueError("band must lie in (0, 1)")
    dev = np.abs(np.asarray(series, dtype=float) - reference)
    t = np.arange(len(dev)) * dt if t is None else np.asarray(t, dtype=float)
    limit = band * dev[0]
    outside = np.nonzero(dev > limit)[0]
    if len(outside) == 0:
        return float(t[0])
    last = outside[-1]
    if last == len(dev) - 1:
        return None
    return float(t[last + 1])


class DegenerateFit(ValueError):
    pass


def fit_exp_rate(series, t) -> float:
    """Least-squares slope of ``log|series|`` against t, skipping zeros."""
    series = np.abs(np.asarray(series, dtype=float))
    t = np.asarray(t, dtype=float)
    mask = series > 0
    if np.count_nonzero(mask) < 10:
        raise DegenerateFit("fewer than 10 usable samples")
    slope, _ = np.polyfit(t[mask], np.log(series[mask]), 1)
    return float(slope)


def result_fields() -> tuple[str, ...]:
    return tuple(f.name for f in fields(SimResult))

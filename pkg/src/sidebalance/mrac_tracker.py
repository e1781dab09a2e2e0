"""Model reference adaptive control of the friction-uncertain cart.

Plant ``X' = A X + B Lambda u_c`` with ``X = [y, y_dot]``,
``A = [[0, 1], [0, -b/M]]`` and ``B = [0, 1/M]``. The reference model is

    A_m = [[0, 1], [-1, -b_n/M]],   B_m = [0, -b_n/M]

where ``b_n`` is the nominal friction the designer assumes. The control law
``u_c = k_x_hat . X + k_r_hat r`` adapts along ``-Gamma (e^T P B)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .control_core import as_mat2, as_vec2, is_hurwitz2, is_spd2, solve_lyapunov2

LAMBDA = 1.0


@dataclass(frozen=True)
class MracConfig:
    gamma_x: np.ndarray = field(default_factory=lambda: np.diag([10000.0, 2000.0]))
    gamma_r: float = 10.0
    Q: np.ndarray = field(default_factory=lambda: 10.0 * np.eye(2))
    b_nominal: float = 5.0
    prescale_reference: bool = True
    k_x_hat0: np.ndarray = field(default_factory=lambda: np.zeros(2))
    k_r_hat0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "gamma_x", as_mat2(self.gamma_x))
        object.__setattr__(self, "Q", as_mat2(self.Q))
        object.__setattr__(self, "k_x_hat0", as_vec2(self.k_x_hat0))
        object.__setattr__(self, "gamma_r", float(self.gamma_r))
        object.__setattr__(self, "b_nominal", float(self.b_nominal))
        object.__setattr__(self, "k_r_hat0", float(self.k_r_hat0))

    def violations(self) -> list[str]:
        """Names of fields breaking the Lyapunov-candidate preconditions."""
        bad = []
        if not is_spd2(self.gamma_x):
            bad.append("gamma_x")
        if not (math.isfinite(self.gamma_r) and self.gamma_r > 0):
            bad.append("gamma_r")
        if not is_spd2(self.Q):
            bad.append("Q")
        if not (math.isfinite(self.b_nominal) and self.b_nominal > 0):
            bad.append("b_nominal")
        return bad

    @cached_property
    def gamma_x_inv(self) -> np.ndarray:
        return np.linalg.inv(self.gamma_x)

    @cached_property
    def _gamma_scalars(self) -> tuple[float, ...]:
        return tuple(self.gamma_x.ravel().tolist())

    def validate(self) -> "MracConfig":
        bad = self.violations()
        if bad:
            raise ValueError(f"invalid MRAC configuration field(s): {', '.join(bad)}")
        return self


@dataclass(frozen=True)
class MracState:
    k_x_hat: np.ndarray
    k_r_hat: float
    x_m: np.ndarray


@dataclass(frozen=True)
class MracDerived:
    A_m: np.ndarray
    B_m: np.ndarray
    P: np.ndarray
    B: np.ndarray
    Lambda: float = LAMBDA

    @cached_property
    def PB(self) -> np.ndarray:
        return self.P @ self.B

    @cached_property
    def _scalars(self) -> tuple[float, ...]:
        Am, Bm, PB = self.A_m, self.B_m, self.PB
        return (*Am.ravel().tolist(), *Bm.tolist(), *PB.tolist())


def make_reference_model(M: float, b_nominal: float) -> tuple[np.ndarray, np.ndarray]:
    if not (M > 0 and b_nominal > 0):
        raise ValueError("M and b_nominal must be positive")
    c = b_nominal / M
    # B_m keeps the negative entry; see prescale_reference
    return np.array([[0.0, 1.0], [-1.0, -c]]), np.array([0.0, -c])


def plant_matrices(M: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    return np.array([[0.0, 1.0], [0.0, -b / M]]), np.array([0.0, 1.0 / M])


def derive(M: float, cfg: MracConfig) -> MracDerived:
    A_m, B_m = make_reference_model(M, cfg.b_nominal)
    assert is_hurwitz2(A_m)
    P = solve_lyapunov2(A_m, cfg.Q)
    _, B = plant_matrices(M, cfg.b_nominal)
    return MracDerived(A_m=A_m, B_m=B_m, P=P, B=B)


def ideal_gains(M: float, b_true: float, b_nominal: float) -> tuple[np.ndarray, float]:
    """Gains satisfying ``A + B K_x^T = A_m`` and ``B K_r = B_m``."""
    return np.array([-M, b_true - b_nominal]), -b_nominal


def matching_residuals(M: float, b_true: float, b_nominal: float, K_x, K_r) -> tuple[float, float]:
    A, B = plant_matrices(M, b_true)
    A_m, B_m = make_reference_model(M, b_nominal)
    K_x = as_vec2(K_x)
    res_x = np.max(np.abs(A + LAMBDA * np.outer(B, K_x) - A_m))
    res_r = np.max(np.abs(LAMBDA * B * K_r - B_m))
    return float(res_x), float(res_r)


def control_u(state: MracState, X, r: float) -> float:
    X = np.asarray(X, dtype=float)
    return float(state.k_x_hat @ X + state.k_r_hat * r)


def adapt_rates(
    cfg: MracConfig, derived: MracDerived, X, e, r: float
) -> tuple[np.ndarray, float]:
    s = float(np.asarray(e, dtype=float) @ derived.PB)  # e^T P B
    k_x_dot = -(cfg.gamma_x @ np.asarray(X, dtype=float)) * s * derived.Lambda
    k_r_dot = -cfg.gamma_r * s * r * derived.Lambda
    return k_x_dot, k_r_dot


def prescale_reference(y_ref: float, M: float, b_nominal: float, enabled: bool = True) -> float:
    """Map a desired cart position to the reference-model input.

    The reference model settles at ``-(b_n/M) r``; the prescale inverts that
    gain so the model position converges to ``y_ref``.
    """
    if not enabled:
        return y_ref
    if not b_nominal > 0:
        raise ValueError("b_nominal must be positive")
    return -(M / b_nominal) * y_ref


def lyapunov_value(e, dK_x, dK_r: float, P, cfg: MracConfig) -> float:
    """``e^T P e + tr(dK_x^T Gamma_x^-1 dK_x Lambda) + dK_r^2 Lambda / Gamma_r``.

    Evaluated as written for any configuration; it is only a Lyapunov
    function when ``cfg.violations()`` is empty.
    """
    e = np.asarray(e, dtype=float)
    dK_x = np.asarray(dK_x, dtype=float)
    P = np.asarray(P, dtype=float)
    gain_term = dK_x @ cfg.gamma_x_inv @ dK_x
    return float(e @ P @ e + gain_term * LAMBDA + dK_r * dK_r * LAMBDA / cfg.gamma_r)


def lyapunov_rate(cfg: MracConfig, derived: MracDerived, X, e, dK_x, dK_r: float, r: float) -> float:
    """Analytic dV/dt along the closed loop; equals ``-e^T Q e``."""
    e = np.asarray(e, dtype=float)
    X = np.asarray(X, dtype=float)
    dK_x = np.asarray(dK_x, dtype=float)
    e_dot = derived.A_m @ e + derived.B * derived.Lambda * (dK_x @ X + dK_r * r)
    k_x_dot, k_r_dot = adapt_rates(cfg, derived, X, e, r)
    return float(
        2 * e @ derived.P @ e_dot
        + 2 * (dK_x @ np.linalg.solve(cfg.gamma_x, k_x_dot)) * derived.Lambda
        + 2 * dK_r * k_r_dot * derived.Lambda / cfg.gamma_r
    )


def tracking_rates(
    cfg: MracConfig, derived: MracDerived, M: float, b_true: float, s, r: float
) -> tuple[list[float], float]:
    """Closed-loop rates of ``s = [y, y_dot, xm1, xm2, kx1, kx2, kr]``.

    The cart obeys the true friction ``b_true``; the controller only sees
    ``derived``. Returns ``(rates, u_c)``; ``rates[1]`` is the cart acceleration.
    """
    y, y_dot, xm1, xm2, kx1, kx2, kr = s
    u = kx1 * y + kx2 * y_dot + kr * r
    e1, e2 = y - xm1, y_dot - xm2
    a11, a12, a21, a22, bm1, bm2, pb1, pb2 = derived._scalars
    lam = derived.Lambda
    s_err = (e1 * pb1 + e2 * pb2) * lam
    g11, g12, g21, g22 = cfg._gamma_scalars
    rates = [
        y_dot,
        (lam * u - b_true * y_dot) / M,
        a11 * xm1 + a12 * xm2 + bm1 * r,
        a21 * xm1 + a22 * xm2 + bm2 * r,
        -(g11 * y + g12 * y_dot) * s_err,
        -(g21 * y + g22 * y_dot) * s_err,
        -cfg.gamma_r * s_err * r,
    ]
    return rates, u

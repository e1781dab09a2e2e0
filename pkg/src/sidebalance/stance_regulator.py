"""Observer-based pole-placement regulator for the linearized stance system.

In backstepping coordinates ``X1 = theta - (L/g) v`` and
``X2 = theta_dot - (L/g) v_dot`` the stance dynamics are

    X1' = X2
    X2' = -a X1 + b_lin v
    theta = X1 + (L/g) v

Only X1 is available (through theta), so X2 is reconstructed by a
minimum-order observer with state ``eta = x2_hat - K_e X1``. The regulator
is ``v = -(k1 X1 + k2 x2_hat)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .control_core import place_poles2
from .plant_models import PhysicalParams, delta

FEEDTHROUGH_TOL = 1e-9


class SingularFeedthrough(ValueError):
    """``1 - (L/g) k1`` (or its observer-loop analogue) is numerically zero."""


@dataclass(frozen=True)
class StanceLinearization:
    a: float
    b_lin: float
    feedthrough: float

    @property
    def A(self) -> np.ndarray:
        return np.array([[0.0, 1.0], [-self.a, 0.0]])

    @property
    def B(self) -> np.ndarray:
        return np.array([0.0, self.b_lin])


@dataclass(frozen=True)
class RegulatorConfig:
    mu1: complex = -4.5
    mu2: complex = -4.5
    observer_pole: float = -10.0
    # initial observer estimate of X2; eta(0) = x2_hat0 - K_e X1(0)
    x2_hat0: float = 0.0
    # False feeds the true X2 to the regulator (reference generation only)
    use_observer: bool = True

    def __post_init__(self):
        if not (complex(self.mu1).real < 0 and complex(self.mu2).real < 0):
            raise ValueError(f"closed-loop poles must be stable, got {self.mu1}, {self.mu2}")
        if not (math.isfinite(self.observer_pole) and self.observer_pole < 0):
            raise ValueError(f"observer_pole must be negative, got {self.observer_pole}")
        if abs(self.observer_pole) < max(abs(complex(self.mu1)), abs(complex(self.mu2))):
            warnings.warn(
                "observer pole is slower than the regulator poles", RuntimeWarning, stacklevel=2
            )


@dataclass(frozen=True)
class RegulatorDesign:
    K: np.ndarray
    K_e: float
    mu1: complex
    mu2: complex
    observer_pole: float

    @cached_property
    def k1(self) -> float:
        return float(self.K[0])

    @cached_property
    def k2(self) -> float:
        return float(self.K[1])


def linearize(params: PhysicalParams) -> StanceLinearization:
    M, m, L, g = params.cart_mass, params.body_mass, params.leg_length, params.gravity
    d = delta(params)
    return StanceLinearization(
        a=-g * L * (M + m) / d,
        b_lin=1.0 + L**2 * (M + m) / d,
        feedthrough=L / g,
    )


def design_regulator(lin: StanceLinearization, cfg: RegulatorConfig) -> RegulatorDesign:
    K = place_poles2(lin.A, lin.B, cfg.mu1, cfg.mu2)
    # scalar error dynamics e' = (A_bb - K_e A_ab) e = -K_e e
    K_e = -float(cfg.observer_pole)
    return RegulatorDesign(K=K, K_e=K_e, mu1=cfg.mu1, mu2=cfg.mu2, observer_pole=cfg.observer_pole)


def observer_eta_dot(
    design: RegulatorDesign, lin: StanceLinearization, x1: float, v: float, eta: float
) -> float:
    Ke = design.K_e
    return -Ke * eta + (-lin.a - Ke * Ke) * x1 + lin.b_lin * v


def x2_hat_from_eta(design: RegulatorDesign, x1: float, eta: float) -> float:
    return eta + design.K_e * x1


def eta_from_x2_hat(design: RegulatorDesign, x1: float, x2_hat: float) -> float:
    return x2_hat - design.K_e * x1


def control_v(design: RegulatorDesign, x1: float, x2_hat: float) -> float:
    return -(design.k1 * x1 + design.k2 * x2_hat)


def theta_from_state(x1: float, v: float, lin: StanceLinearization) -> float:
    return x1 + lin.feedthrough * v


def resolve_x1(
    theta: float, x2_hat: float, design: RegulatorDesign, lin: StanceLinearization
) -> float:
    """Solve ``x1 = theta - (L/g) v`` with ``v = -k1 x1 - k2 x2_hat`` for x1."""
    den = 1.0 - lin.feedthrough * design.k1
    if abs(den) <= FEEDTHROUGH_TOL:
        raise SingularFeedthrough(f"1 - (L/g)*k1 = {den:.3e}")
    return (theta + lin.feedthrough * design.k2 * x2_hat) / den


def observer_loop_denominator(design: RegulatorDesign, lin: StanceLinearization) -> float:
    """Denominator of the loop closure when the observer holds eta, not x2_hat.

    Since ``x2_hat = eta + K_e x1`` also depends on x1, the loop
    ``x1 = theta - (L/g) v`` closes with ``1 - (L/g)(k1 + k2 K_e)``. The same
    factor relates theta_dot to X2.
    """
    return 1.0 - lin.feedthrough * (design.k1 + design.k2 * design.K_e)


def resolve_loop(
    theta: float, eta: float, design: RegulatorDesign, lin: StanceLinearization
) -> tuple[float, float, float]:
    """Close the feedthrough loop from measured theta and observer state eta.

    Returns ``(x1, x2_hat, v)``. The result agrees with :func:`resolve_x1`
    evaluated at the returned x2_hat.
    """
    den = observer_loop_denominator(design, lin)
    if abs(den) <= FEEDTHROUGH_TOL:
        raise SingularFeedthrough(f"1 - (L/g)*(k1 + k2*K_e) = {den:.3e}")
    x1 = (theta + lin.feedthrough * design.k2 * eta) / den
    x2_hat = x2_hat_from_eta(design, x1, eta)
    return x1, x2_hat, control_v(design, x1, x2_hat)


def x2_from_theta_dot(
    theta_dot: float, x1: float, eta: float, v: float, design: RegulatorDesign,
    lin: StanceLinearization,
) -> float:
    """True X2 implied by theta_dot when v is produced by the observer loop.

    ``v_dot = -(k1 + k2 K_e) X2 - k2 eta_dot`` and ``X2 = theta_dot - (L/g) v_dot``.
    """
    den = observer_loop_denominator(design, lin)
    if abs(den) <= FEEDTHROUGH_TOL:
        raise SingularFeedthrough(f"1 - (L/g)*(k1 + k2*K_e) = {den:.3e}")
    eta_dot = observer_eta_dot(design, lin, x1, v, eta)
    return (theta_dot + lin.feedthrough * design.k2 * eta_dot) / den


def composite_matrix(design: RegulatorDesign, lin: StanceLinearization) -> np.ndarray:
    """Closed-loop matrix of (X1, X2, eta) under observer-based feedback."""
    k1, k2, Ke = design.k1, design.k2, design.K_e
    b, a = lin.b_lin, lin.a
    # v = -(k1 + k2 Ke) X1 - k2 eta
    v_row = np.array([-(k1 + k2 * Ke), 0.0, -k2])
    return np.array(
        [
            [0.0, 1.0, 0.0],
            np.array([-a, 0.0, 0.0]) + b * v_row,
            np.array([-a - Ke * Ke, 0.0, -Ke]) + b * v_row,
        ]
    )

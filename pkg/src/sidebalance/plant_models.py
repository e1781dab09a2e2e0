"""Planar one-leg stance with a moving-mass cart.

The stance leg (length L) pivots at the ankle. The body and swing leg are
lumped into a point mass m at lateral offset y_m; a cart of mass M slides
along the hip line at position y. Angles are in radians, lengths in metres.

All functions are pure and take a :class:`PhysicalParams` first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class PhysicalParams:
    """Ground-truth parameters of the simulated world.

    ``m / M = 2.04`` maps a hip-side CoM offset of 4.9 cm to a 10 cm cart
    equilibrium and 3.0 cm to about 6.1 cm.
    """

    cart_mass: float = 3.0
    body_mass: float = 6.12
    leg_length: float = 0.42
    gravity: float = 9.81
    com_offset: float = 0.049
    friction_b: float = 5.0

    def __post_init__(self):
        for name in ("cart_mass", "body_mass", "leg_length", "gravity"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if not (math.isfinite(self.friction_b) and self.friction_b >= 0):
            raise ValueError(f"friction_b must be >= 0, got {self.friction_b!r}")
        if not (math.isfinite(self.com_offset) and abs(self.com_offset) < self.leg_length):
            raise ValueError(
                f"|com_offset| must be below leg_length ({self.leg_length}), got {self.com_offset!r}"
            )


@dataclass(frozen=True)
class StanceState:
    theta: float
    theta_dot: float

    @property
    def fallen(self) -> bool:
        return abs(self.theta) >= FALL_ANGLE


@dataclass(frozen=True)
class CartState:
    y: float
    y_dot: float


@dataclass(frozen=True)
class DerivedConstants:
    delta: float
    equilibrium_y: float

    @classmethod
    def from_params(cls, params: PhysicalParams) -> "DerivedConstants":
        return cls(delta(params), equilibrium_cart_position(params))


FALL_ANGLE = math.pi / 2


def delta(params: PhysicalParams) -> float:
    """Effective inertia about the ankle with the y^2 term dropped."""
    M, m, L = params.cart_mass, params.body_mass, params.leg_length
    return M * L**2 + m * (L**2 + params.com_offset**2)


def stance_torque(params: PhysicalParams, theta: float, y: float, y_ddot: float) -> float:
    """Ankle torque from the cart inertia and both gravity moments."""
    M, m, L, g = params.cart_mass, params.body_mass, params.leg_length, params.gravity
    c, s = math.cos(theta), math.sin(theta)
    return M * y_ddot * L - m * g * (params.com_offset * c - L * s) + M * g * (y * c + L * s)


def inertia_sum(params: PhysicalParams, y: float) -> float:
    M, m, L = params.cart_mass, params.body_mass, params.leg_length
    return M * (L**2 + y**2) + m * (L**2 + params.com_offset**2)


def theta_ddot_full(params: PhysicalParams, theta: float, y: float, y_ddot: float) -> float:
    """Nonlinear angular acceleration: torque over the full inertia sum."""
    return stance_torque(params, theta, y, y_ddot) / inertia_sum(params, y)


def theta_ddot_linear(params: PhysicalParams, theta: float, y: float, y_ddot: float) -> float:
    """Small-angle angular acceleration, linear in theta, y and y_ddot."""
    M, m, L, g = params.cart_mass, params.body_mass, params.leg_length, params.gravity
    d = delta(params)
    return (
        (g * L / d) * (M + m) * theta
        - m * g * params.com_offset / d
        + (M * g / d) * y
        + (M * L / d) * y_ddot
    )


def cart_accel(params: PhysicalParams, u_c: float, y_dot: float) -> float:
    """Cart acceleration under force ``u_c`` and viscous friction."""
    M = params.cart_mass
    return u_c / M - (params.friction_b / M) * y_dot


def equilibrium_cart_position(params: PhysicalParams) -> float:
    """Cart position that balances the body moment at theta = 0."""
    return (params.body_mass / params.cart_mass) * params.com_offset


def virtual_from_y(params: PhysicalParams, y: float) -> float:
    """Virtual control seen by the stance subsystem for cart position ``y``."""
    M, m, g = params.cart_mass, params.body_mass, params.gravity
    d = delta(params)
    return (M * g / d) * y - m * g * params.com_offset / d


def y_from_virtual(params: PhysicalParams, v: float) -> float:
    """Inverse of :func:`virtual_from_y`."""
    M, m, g = params.cart_mass, params.body_mass, params.gravity
    return (delta(params) * v + m * g * params.com_offset) / (M * g)

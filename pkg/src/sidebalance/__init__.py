"""Lateral balance of a one-leg stance driven by a moving-mass cart.

The stance angle is regulated through a backstepping virtual control with a
minimum-order observer; the cart tracks the resulting position demand under
model reference adaptive control.
"""

from .plant_models import PhysicalParams, equilibrium_cart_position
from .scenarios import RunConfig, load_config, scenario_config
from .sim_engine import SimConfig, SimResult, run

__all__ = [
    "PhysicalParams",
    "RunConfig",
    "SimConfig",
    "SimResult",
    "equilibrium_cart_position",
    "load_config",
    "run",
    "scenario_config",
]
__version__ = "0.1.0"

"""Scenario registry, TOML run configuration and CSV export."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import mrac_tracker as mrac
from . import plant_models as pm
from . import sim_engine as se
from . import stance_regulator as sr
from .control_core import is_spd2


class UnknownScenario(KeyError):
    pass


class ConfigError(ValueError):
    pass


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class UnknownKey(ConfigError):
    def __init__(self, path: str):
        super().__init__(f"unknown configuration key {path!r}")
        self.path = path


@dataclass(frozen=True)
class Scenario:
    index: int
    name: str
    hip_adduction_deg: float
    y_m: float
    mu1: float
    mu2: float
    observer_pole: float
    gamma_x: tuple[tuple[float, float], tuple[float, float]]
    gamma_r: float

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["gamma_x"] = [list(row) for row in self.gamma_x]
        return d


_SCENARIOS = (
    Scenario(1, "scenario1", 6.0, 0.049, -4.5, -4.5, -10.0, ((10000.0, 0.0), (0.0, 2000.0)), 10.0),
    Scenario(2, "scenario2", 7.3, 0.04, -4.5, -4.5, -10.0, ((5000.0, 0.0), (0.0, 4000.0)), 14.0),
    Scenario(3, "scenario3", 8.0, 0.035, -7.0, -7.0, -14.0, ((7000.0, 0.0), (0.0, 700.0)), 6.3),
    Scenario(4, "scenario4", 8.5, 0.03, -2.0, -2.0, -4.0, ((7000.0, 0.0), (0.0, 5000.0)), 100.0),
)


def builtin_scenario(index: int) -> Scenario:
    if not (isinstance(index, int) and 1 <= index <= len(_SCENARIOS)):
        raise UnknownScenario(f"scenario index must be 1..{len(_SCENARIOS)}, got {index!r}")
    return _SCENARIOS[index - 1]


def all_scenarios() -> tuple[Scenario, ...]:
    return _SCENARIOS


def serialize_scenarios() -> str:
    """Canonical JSON of the registry (sorted keys, LF, trailing newline)."""
    return json.dumps([s.to_dict() for s in _SCENARIOS], sort_keys=True, indent=2) + "\n"


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    physical: pm.PhysicalParams
    regulator: sr.RegulatorConfig
    mrac: mrac.MracConfig
    sim: se.SimConfig = field(default_factory=se.SimConfig)

    @property
    def design(self) -> sr.RegulatorDesign:
        return sr.design_regulator(sr.linearize(self.physical), self.regulator)

    def run(self) -> se.SimResult:
        return se.run(self.physical, self.regulator, self.mrac, self.sim)

    def replace(self, **sections) -> "RunConfig":
        return dataclasses.replace(self, **sections)


def scenario_config(index: int) -> RunConfig:
    """Scenario values over global defaults."""
    sc = builtin_scenario(index)
    return RunConfig(
        scenario=sc,
        physical=pm.PhysicalParams(com_offset=sc.y_m),
        regulator=sr.RegulatorConfig(mu1=sc.mu1, mu2=sc.mu2, observer_pole=sc.observer_pole),
        mrac=mrac.MracConfig(gamma_x=np.array(sc.gamma_x), gamma_r=sc.gamma_r),
        sim=se.SimConfig(),
    )


# ---------------------------------------------------------------------------
# configuration files

def _number(path, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(path, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(path, "must be finite")
    return value


def _positive(path, value):
    value = _number(path, value)
    if value <= 0:
        raise ValidationError(path, f"must be > 0, got {value}")
    return value


def _negative(path, value):
    value = _number(path, value)
    if value >= 0:
        raise ValidationError(path, f"must be < 0, got {value}")
    return value


def _nonneg(path, value):
    value = _number(path, value)
    if value < 0:
        raise ValidationError(path, f"must be >= 0, got {value}")
    return value


def _boolean(path, value):
    if not isinstance(value, bool):
        raise ValidationError(path, f"expected true/false, got {value!r}")
    return value


def _vec2(path, value):
    if not (isinstance(value, list) and len(value) == 2):
        raise ValidationError(path, "expected a list of 2 numbers")
    return np.array([_number(f"{path}[{i}]", v) for i, v in enumerate(value)])


def _mat2(path, value):
    if not (isinstance(value, list) and len(value) == 2 and all(isinstance(r, list) and len(r) == 2 for r in value)):
        raise ValidationError(path, "expected a 2x2 nested list")
    return np.array([[_number(f"{path}[{i}][{j}]", v) for j, v in enumerate(row)] for i, row in enumerate(value)])


def _spd(path, value):
    m = _mat2(path, value)
    if not is_spd2(m):
        raise ValidationError(path, "must be symmetric positive definite")
    return m


def _choice(*options):
    def check(path, value):
        if value not in options:
            raise ValidationError(path, f"must be one of {', '.join(options)}, got {value!r}")
        return value
    return check


def _cart_start(path, value):
    if value == "equilibrium":
        return None
    return _number(path, value)


def _dt(path, value):
    value = _positive(path, value)
    if value > se.MAX_DT:
        raise ValidationError(path, f"must be <= {se.MAX_DT}, got {value}")
    return value


# section -> key -> (dataclass field, validator)
_SCHEMA = {
    "physical": {
        "cart_mass": ("cart_mass", _positive),
        "body_mass": ("body_mass", _positive),
        "leg_length": ("leg_length", _positive),
        "gravity": ("gravity", _positive),
        "com_offset": ("com_offset", _number),
        "friction_b": ("friction_b", _nonneg),
        "b_true": ("friction_b", _nonneg),
    },
    "regulator": {
        "mu1": ("mu1", _negative),
        "mu2": ("mu2", _negative),
        "observer_pole": ("observer_pole", _negative),
        "x2_hat0": ("x2_hat0", _number),
        "use_observer": ("use_observer", _boolean),
    },
    "mrac": {
        "gamma_x": ("gamma_x", _spd),
        "gamma_r": ("gamma_r", _positive),
        "Q": ("Q", _spd),
        "b_nominal": ("b_nominal", _positive),
        "prescale_reference": ("prescale_reference", _boolean),
        "k_x_hat0": ("k_x_hat0", _vec2),
        "k_r_hat0": ("k_r_hat0", _number),
    },
    "sim": {
        "dt": ("dt", _dt),
        "duration": ("duration", _positive),
        "integrator": ("integrator", _choice(*se.STEPPERS)),
        "mode": ("mode", _choice("sequential", "coupled")),
        "theta0": ("theta0", _number),
        "theta_dot0": ("theta_dot0", _number),
        "y0": ("y0", _cart_start),
        "y_dot0": ("y_dot0", _number),
    },
}


def apply_overrides(base: RunConfig, data: dict[str, Any]) -> RunConfig:
    """Merge a parsed configuration mapping over ``base``."""
    sections = {}
    for section, values in data.items():
        if section not in _SCHEMA:
            raise UnknownKey(section)
        if not isinstance(values, dict):
            raise ValidationError(section, "expected a table")
        changes = {}
        for key, value in values.items():
            path = f"{section}.{key}"
            if key not in _SCHEMA[section]:
                raise UnknownKey(path)
            name, check = _SCHEMA[section][key]
            if name in changes:
                raise ValidationError(path, f"duplicates another key for {section}.{name}")
            changes[name] = (path, check(path, value))
        current = getattr(base, section)
        try:
            sections[section] = dataclasses.replace(current, **{k: v for k, (_, v) in changes.items()})
        except ValueError as exc:
            # cross-field invariant; blame the first key the message mentions
            blamed = next((p for k, (p, _) in changes.items() if k in str(exc)), section)
            raise ValidationError(blamed, str(exc)) from exc
    cfg = dataclasses.replace(base, **sections)
    if cfg.sim.duration < cfg.sim.dt:
        raise ValidationError("sim.duration", "must be >= sim.dt")
    return cfg


def load_config(path, scenario: int = 1) -> RunConfig:
    """Read a TOML file with sections physical / regulator / mrac / sim.

    File values override the scenario, which overrides the global defaults.
    """
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return apply_overrides(scenario_config(scenario), data)


# ---------------------------------------------------------------------------
# output

CSV_HEADER = ",".join(se.COLUMNS)


def write_csv(result: se.SimResult, path) -> Path:
    path = Path(path)
    data = np.column_stack([getattr(result, c) for c in se.COLUMNS]) if len(result) else np.empty((0, len(se.COLUMNS)))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(se.COLUMNS)
        for row in data:
            writer.writerow([format(float(x), ".16e") for x in row])
    return path


def read_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array(body, dtype=float).reshape(-1, len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def csv_name(cfg: RunConfig) -> str:
    return f"{cfg.scenario.name}_{cfg.sim.mode}.csv"


@dataclass(frozen=True)
class RunReport:
    status: str
    settling_time_x1: Optional[float]
    terminal_theta: float
    terminal_tracking_error: float
    peak_u_c: float
    V_min: float
    V_max: float

    @classmethod
    def from_result(cls, result: se.SimResult, band: float = 1e-3) -> "RunReport":
        if result.status != se.COMPLETED:
            raise ValueError(f"report needs a completed run, status is {result.status!r}")
        return cls(
            status=result.status,
            settling_time_x1=se.settling_time(result.x1, 0.0, band, t=result.t),
            terminal_theta=float(abs(result.theta[-1])),
            terminal_tracking_error=float(result.e_norm[-1]),
            peak_u_c=float(np.max(np.abs(result.u_c))),
            V_min=float(np.min(result.V)),
            V_max=float(np.max(result.V)),
        )

    def lines(self) -> list[str]:
        settle = "not settled" if self.settling_time_x1 is None else f"{self.settling_time_x1:.3f} s"
        return [
            f"status                 {self.status}",
            f"x1 settling (1e-3)     {settle}",
            f"terminal |theta|       {self.terminal_theta:.3e} rad",
            f"terminal |e|           {self.terminal_tracking_error:.3e} m",
            f"peak |u_c|             {self.peak_u_c:.4f} N",
            f"V range                [{self.V_min:.6g}, {self.V_max:.6g}]",
        ]

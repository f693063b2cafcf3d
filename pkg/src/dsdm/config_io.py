"""Configuration ingestion: plant parameters, controller gains, and
simulation settings from one YAML file. All keys are SI; unknown keys are
rejected with the offending path."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, get_type_hints

import yaml

from .control import ControllerGains
from .params import (ActuatorConfig, ConfigError, JunctionGeometry,
                     MotorParams, OutputTrain, PortImpedance)

DEFAULT_CONFIG_RESOURCE = "prototype.yaml"


@dataclass(frozen=True)
class SimSettings:
    """Fixed-step integration settings.

    dt: inner (plant and current-allocation) step, s.
    outer_divisor: outer control loop runs every this many inner steps.
    """

    dt: float = 5.0e-5
    outer_divisor: int = 40

    def __post_init__(self) -> None:
        if not (self.dt > 0.0):
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if self.outer_divisor < 1:
            raise ConfigError(f"outer_divisor must be >= 1, got {self.outer_divisor}")

    @property
    def outer_dt(self) -> float:
        return self.dt * self.outer_divisor


@dataclass(frozen=True)
class FullConfig:
    plant: ActuatorConfig
    gains: ControllerGains
    sim: SimSettings


_SECTION_TYPES = {"plant": ActuatorConfig, "control": ControllerGains,
                  "simulation": SimSettings}


def _build(cls: type, data: Any, path: str) -> Any:
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(data).__name__}")
    hints = get_type_hints(cls)
    field_map = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(field_map)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}")
    kwargs = {}
    for name, f in field_map.items():
        sub_path = f"{path}.{name}"
        if name not in data:
            if (f.default is dataclasses.MISSING
                    and f.default_factory is dataclasses.MISSING):
                raise ConfigError(f"{sub_path}: required key missing")
            continue
        value = data[name]
        hint = hints[name]
        if dataclasses.is_dataclass(hint):
            kwargs[name] = _build(hint, value, sub_path)
        elif hint is int:
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"{sub_path}: expected an integer, got {value!r}")
            kwargs[name] = value
        elif hint is float:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(f"{sub_path}: expected a number, got {value!r}")
            kwargs[name] = float(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (ConfigError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_config(data: dict) -> FullConfig:
    """Validate a parsed YAML mapping into a FullConfig."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(data) - set(_SECTION_TYPES)
    if unknown:
        raise ConfigError(f"unknown top-level section(s) {sorted(unknown)}")
    if "plant" not in data:
        raise ConfigError("config must contain a 'plant' section")
    plant = _build(ActuatorConfig, data["plant"], "plant")
    gains = (_build(ControllerGains, data["control"], "control")
             if "control" in data else ControllerGains())
    sim = (_build(SimSettings, data["simulation"], "simulation")
           if "simulation" in data else SimSettings())
    return FullConfig(plant=plant, gains=gains, sim=sim)


def load_config(path: "str | Path | None" = None) -> FullConfig:
    """Load a configuration file; None loads the packaged prototype values."""
    if path is None:
        text = (resources.files(__package__) / DEFAULT_CONFIG_RESOURCE).read_text()
    else:
        text = Path(path).read_text()
    data = yaml.safe_load(text)
    return parse_config(data if data is not None else {})


def prototype_config() -> ActuatorConfig:
    """Plant parameters of the proof-of-concept linear actuator.

    Gear geometry, current/voltage limits, screw lead, and the resulting
    mechanical advantages (4 and 72) follow the bench hardware; rotor and
    screw inertias and the friction level are catalog-plausible calibration
    constants chosen so the apparent output masses land near the measured
    bench values. They are not measured ground truth.
    """
    motor = MotorParams(
        torque_constant=0.0234,
        resistance=2.32,
        inertia=1.05e-6,
        damping=0.0,
        max_current=1.2,
        max_voltage=24.0,
        max_speed=1050.0,
    )
    return ActuatorConfig(
        junction=JunctionGeometry(ring_to_sun=3.0, ring_reduction=54.0),
        motor_direct=motor,
        motor_geared=motor,
        port_out=PortImpedance(inertia=3.5e-6, damping=1.0e-4),
        port_direct=PortImpedance(inertia=1.05e-6, damping=0.0),
        port_geared=PortImpedance(inertia=1.05e-6, damping=0.0),
        train=OutputTrain(lead=0.02, coulomb=15.0),
        brake_engage_speed=0.5,
    )


def default_full_config() -> FullConfig:
    return FullConfig(plant=prototype_config(), gains=ControllerGains(),
                      sim=SimSettings())

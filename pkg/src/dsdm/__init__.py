"""Simulation library for a dual-speed dual-motor linear actuator.

Two motors drive one output through a 3-port planetary differential with a
locking brake, giving two effective gear ratios with seamless shifts.
"""

from .config_io import (FullConfig, SimSettings, default_full_config,
                        load_config, parse_config, prototype_config)
from .control import (BrakeRequest, ControlCommand, ControllerGains,
                      ControlMode, DsdmController, ImpedanceLevel,
                      ImpedanceParams, ModePolicy, NullspaceProjector,
                      Observation, PositionPI, TaskSpec, impedance_force)
from .dynamics import (BrakeState, LoadModel, PlantState, SimulationFault,
                       accel_free, accel_locked, apply_saturation,
                       derive_dynamics, engage_brake, release_brake, step)
from .params import (ActuatorConfig, ConfigError, GearMode, JunctionGeometry,
                     MotorParams, OutputTrain, PortImpedance, geared_speed,
                     output_speed, reflected_output_mass, torque_split)
from .scenarios import (CheckResult, ForcePulse, ModeSwitch, RunResult,
                        Scenario, TraceRecord, catalog, run_checks,
                        run_scenario, trace_to_csv, write_trace)
from .sizing import (MassModel, OperatingPoint, crossover_ratio, dsdm_mass,
                     mass_sweep, single_motor_mass, winding_loss)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"

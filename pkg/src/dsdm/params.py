"""Physical parameters and junction algebra for the dual-speed actuator.

Everything is SI internally: rad, rad/s, N·m, A, V, kg·m². Linear output
quantities (m, m/s, N) appear only through :class:`OutputTrain` conversions.

The actuator couples two motors through a 3-port planetary differential:
the "direct" motor drives the sun gear almost directly (small mechanical
advantage), the "geared" motor drives the ring gear through an upstream
reduction (large mechanical advantage). The planet carrier is the output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    """A parameter set violates its physical constraints."""


class GearMode(Enum):
    """The two effective gear ratios the actuator can present at the output."""

    HIGH_FORCE = "high_force"   # brake locked, geared motor drives alone
    HIGH_SPEED = "high_speed"   # brake free, direct motor dominates


@dataclass(frozen=True)
class JunctionGeometry:
    """Planetary differential geometry and derived mechanical advantages.

    ring_to_sun: ratio of ring gear teeth over sun gear teeth (> 0).
    ring_reduction: total upstream reduction between the geared motor and
        the ring gear (> 0).
    """

    ring_to_sun: float
    ring_reduction: float

    def __post_init__(self) -> None:
        if not (self.ring_to_sun > 0.0) or not math.isfinite(self.ring_to_sun):
            raise ConfigError(f"ring_to_sun must be > 0, got {self.ring_to_sun}")
        if not (self.ring_reduction > 0.0) or not math.isfinite(self.ring_reduction):
            raise ConfigError(f"ring_reduction must be > 0, got {self.ring_reduction}")
        if not (self.direct_advantage < self.geared_advantage):
            raise ConfigError(
                "invalid junction: direct advantage "
                f"{self.direct_advantage} must be smaller than geared advantage "
                f"{self.geared_advantage}"
            )

    @property
    def direct_advantage(self) -> float:
        """Mechanical advantage of the sun (direct motor) port."""
        return self.ring_to_sun + 1.0

    @property
    def geared_advantage(self) -> float:
        """Mechanical advantage of the ring (geared motor) port."""
        return self.ring_reduction * (self.ring_to_sun + 1.0) / self.ring_to_sun


def output_speed(w_direct: float, w_geared: float, geom: JunctionGeometry) -> float:
    """Output (carrier) speed from the two input shaft speeds, rad/s."""
    return w_direct / geom.direct_advantage + w_geared / geom.geared_advantage


def geared_speed(w_out: float, w_direct: float, geom: JunctionGeometry) -> float:
    """Geared-motor shaft speed implied by the junction constraint, rad/s."""
    return geom.geared_advantage * (w_out - w_direct / geom.direct_advantage)


def torque_split(tau_out: float, geom: JunctionGeometry) -> tuple[float, float]:
    """Torques at the two input shafts balancing an output torque tau_out.

    Returns (tau_direct, tau_geared). Both inputs carry the full output
    torque scaled by their mechanical advantage; the junction shares speed,
    not torque.
    """
    return (-tau_out / geom.direct_advantage, -tau_out / geom.geared_advantage)


@dataclass(frozen=True)
class MotorParams:
    """Electromechanical constants and hard limits of one motor.

    torque_constant: N·m/A; resistance: Ω; inertia: rotor+shaft kg·m²;
    damping: viscous N·m·s/rad; max_current: A; max_voltage: V;
    max_speed: mechanical rad/s.
    """

    torque_constant: float
    resistance: float
    inertia: float
    damping: float
    max_current: float
    max_voltage: float
    max_speed: float

    def __post_init__(self) -> None:
        for name in ("torque_constant", "resistance", "inertia", "max_current",
                     "max_voltage", "max_speed"):
            v = getattr(self, name)
            if not (v > 0.0) or not math.isfinite(v):
                raise ConfigError(f"motor {name} must be > 0, got {v}")
        if self.damping < 0.0 or not math.isfinite(self.damping):
            raise ConfigError(f"motor damping must be >= 0, got {self.damping}")

    @property
    def no_load_speed(self) -> float:
        """Back-EMF-limited speed at full supply voltage, rad/s."""
        return self.max_voltage / self.torque_constant


@dataclass(frozen=True)
class PortImpedance:
    """Lumped inertia and viscous damping seen at one junction port."""

    inertia: float
    damping: float

    def __post_init__(self) -> None:
        if not (self.inertia > 0.0) or not math.isfinite(self.inertia):
            raise ConfigError(f"port inertia must be > 0, got {self.inertia}")
        if self.damping < 0.0 or not math.isfinite(self.damping):
            raise ConfigError(f"port damping must be >= 0, got {self.damping}")


@dataclass(frozen=True)
class OutputTrain:
    """Ballscrew converting rotary output to linear travel.

    lead: linear travel per screw revolution, m/rev (> 0).
    coulomb: coulomb friction at the linear output, N (>= 0).
    """

    lead: float
    coulomb: float

    def __post_init__(self) -> None:
        if not (self.lead > 0.0) or not math.isfinite(self.lead):
            raise ConfigError(f"train lead must be > 0, got {self.lead}")
        if self.coulomb < 0.0 or not math.isfinite(self.coulomb):
            raise ConfigError(f"train coulomb must be >= 0, got {self.coulomb}")

    def to_linear(self, theta: float) -> float:
        """Screw angle (rad) to linear position (m)."""
        return theta * self.lead / TWO_PI

    def to_rotary(self, x: float) -> float:
        """Linear position (m) to screw angle (rad)."""
        return x * TWO_PI / self.lead

    def force_to_torque(self, force: float) -> float:
        """Linear force (N) to screw torque (N·m), ideal screw."""
        return force * self.lead / TWO_PI

    def torque_to_force(self, torque: float) -> float:
        """Screw torque (N·m) to linear force (N), ideal screw."""
        return torque * TWO_PI / self.lead

    @property
    def coulomb_torque(self) -> float:
        """Coulomb friction expressed as screw torque, N·m."""
        return self.force_to_torque(self.coulomb)


@dataclass(frozen=True)
class ActuatorConfig:
    """Complete plant description.

    brake_engage_speed: largest |direct shaft speed| (rad/s) at which the
    locking brake may be engaged; engaging above it is a faulted command.
    """

    junction: JunctionGeometry
    motor_direct: MotorParams
    motor_geared: MotorParams
    port_out: PortImpedance
    port_direct: PortImpedance
    port_geared: PortImpedance
    train: OutputTrain
    brake_engage_speed: float = 0.5

    def __post_init__(self) -> None:
        if not (self.brake_engage_speed > 0.0) or not math.isfinite(self.brake_engage_speed):
            raise ConfigError(
                f"brake_engage_speed must be > 0, got {self.brake_engage_speed}"
            )

    @property
    def r_direct(self) -> float:
        return self.junction.direct_advantage

    @property
    def r_geared(self) -> float:
        return self.junction.geared_advantage

    def max_linear_speed(self, mode: GearMode) -> float:
        """Voltage/speed-limited output speed for a mode, m/s."""
        if mode is GearMode.HIGH_FORCE:
            m, r = self.motor_geared, self.r_geared
        else:
            m, r = self.motor_direct, self.r_direct
        w_shaft = min(m.max_speed, m.no_load_speed)
        return self.train.to_linear(w_shaft / r)


def reflected_output_mass(cfg: ActuatorConfig, mode: GearMode) -> float:
    """Apparent mass at the linear output for a mode, kg.

    Inertia of the active motor reflected through its mechanical advantage
    plus the output port inertia, amplified by the screw conversion.
    """
    if mode is GearMode.HIGH_FORCE:
        j = cfg.port_out.inertia + cfg.r_geared**2 * cfg.port_geared.inertia
    else:
        j = cfg.port_out.inertia + cfg.r_direct**2 * cfg.port_direct.inertia
    return j * (TWO_PI / cfg.train.lead) ** 2

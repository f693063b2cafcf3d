"""Design-space analysis: mass and winding-loss comparison of a single
geared motor against the dual-speed dual-motor arrangement.

Component mass is taken proportional to the maximum torque at the
component's own shaft. Motors are modeled with a rectangular torque-speed
envelope capped at a catalog-class shaft speed; this cap is what forces a
single-motor solution to grow with the spread between operating speeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import ConfigError, MotorParams


@dataclass(frozen=True)
class OperatingPoint:
    """One required output condition: torque (N·m, > 0) at speed (rad/s, > 0)."""

    torque: float
    speed: float

    def __post_init__(self) -> None:
        if not (self.torque > 0.0 and self.speed > 0.0):
            raise ConfigError(
                f"operating point must have positive torque and speed, "
                f"got ({self.torque}, {self.speed})"
            )

    @property
    def power(self) -> float:
        return self.torque * self.speed


@dataclass(frozen=True)
class MassModel:
    """Catalog mass densities, kg per N·m of component shaft torque.

    motor_speed_cap is the shaft speed a catalog motor of this class can
    reach regardless of its torque rating, rad/s.
    """

    motor_density: float = 2.0
    gearbox_density: float = 0.01
    brake_density: float = 0.2
    motor_speed_cap: float = 800.0

    def __post_init__(self) -> None:
        for name in ("motor_density", "gearbox_density", "brake_density",
                     "motor_speed_cap"):
            if not (getattr(self, name) > 0.0):
                raise ConfigError(f"{name} must be > 0")


def _validate_pair(points: tuple[OperatingPoint, OperatingPoint]) -> None:
    a, b = points
    if abs(a.power - b.power) > 0.01 * max(a.power, b.power):
        raise ConfigError(
            f"operating points must have equal power within 1%: "
            f"{a.power:.4g} W vs {b.power:.4g} W"
        )


def single_motor_mass(points: tuple[OperatingPoint, OperatingPoint],
                      mm: MassModel, ratio_samples: int = 1000) -> float:
    """Lightest single motor plus gearbox covering both operating points.

    Sweeps the gear ratio (log-spaced); for each ratio the motor must
    produce the worst reflected torque and reach the worst reflected speed.
    """
    _validate_pair(points)
    w_fast = max(p.speed for p in points)
    tau_peak = max(p.torque for p in points)
    r_max = mm.motor_speed_cap / w_fast
    if r_max < 1e-9:
        raise ConfigError("no feasible gear ratio: operating speed exceeds "
                          "the motor speed cap")
    ratios = np.logspace(math.log10(r_max) - 3.0, math.log10(r_max),
                         ratio_samples)
    motor_torque = np.max(
        [[p.torque / r for r in ratios] for p in points], axis=0)
    masses = mm.motor_density * motor_torque + mm.gearbox_density * tau_peak
    return float(np.min(masses))


def dsdm_mass(points: tuple[OperatingPoint, OperatingPoint],
              mm: MassModel) -> float:
    """Mass of the dual-motor arrangement covering the same two points.

    The direct motor is sized for the fast point, the geared motor for the
    slow point, each behind its own best ratio; the junction constraint
    makes both motors carry the full reflected output torque, so neither
    scales with the speed spread. Gearbox and differential carry the output
    torque; the brake holds the output torque reflected at the direct port.
    """
    _validate_pair(points)
    fast = max(points, key=lambda p: p.speed)
    slow = min(points, key=lambda p: p.speed)
    r_fast = mm.motor_speed_cap / fast.speed
    r_slow = mm.motor_speed_cap / slow.speed
    tau_peak = max(p.torque for p in points)
    motor_fast = mm.motor_density * fast.torque / r_fast
    motor_slow = mm.motor_density * slow.torque / r_slow
    gearbox = mm.gearbox_density * slow.torque      # geared-motor reduction
    differential = mm.gearbox_density * tau_peak
    brake = mm.brake_density * tau_peak / r_fast
    return motor_fast + motor_slow + gearbox + differential + brake


def winding_loss(tau_out: float, ratio: float, motor: MotorParams) -> float:
    """Copper loss delivering an output torque through a gear ratio, W."""
    if ratio <= 0.0:
        raise ConfigError(f"ratio must be > 0, got {ratio}")
    return (motor.resistance * tau_out**2
            / (motor.torque_constant**2 * ratio**2))


def mass_sweep(power: float, speed_fast: float,
               lambda_values: "np.ndarray | list[float]",
               mm: MassModel) -> list[tuple[float, float, float]]:
    """(speed ratio, single-motor mass, dual-motor mass) rows for equal-power
    point pairs with the fast point fixed."""
    rows = []
    for lam in lambda_values:
        if lam < 1.0:
            raise ConfigError("speed ratio must be >= 1")
        fast = OperatingPoint(torque=power / speed_fast, speed=speed_fast)
        slow = OperatingPoint(torque=power / (speed_fast / lam),
                              speed=speed_fast / lam)
        pts = (fast, slow)
        rows.append((float(lam), single_motor_mass(pts, mm), dsdm_mass(pts, mm)))
    return rows


def crossover_ratio(power: float, speed_fast: float, mm: MassModel,
                    lo: float = 1.0, hi: float = 50.0,
                    tol: float = 1e-6) -> float:
    """Smallest speed ratio at which the dual-motor arrangement is lighter,
    found by bisection on the mass difference. Raises if no crossover."""

    def diff(lam: float) -> float:
        rows = mass_sweep(power, speed_fast, [lam], mm)
        _, single, dual = rows[0]
        return single - dual

    if diff(lo) >= 0.0:
        return lo
    if diff(hi) < 0.0:
        raise ConfigError("no mass crossover in the given ratio range")
    a, b = lo, hi
    while b - a > tol:
        mid = 0.5 * (a + b)
        if diff(mid) < 0.0:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)

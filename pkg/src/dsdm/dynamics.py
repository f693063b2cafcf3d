"""Time-domain plant model: coupled equations of motion and integrator.

With the brake free, the plant has two degrees of freedom (output shaft
and direct-motor shaft; the geared-motor shaft speed follows from the
junction constraint). With the brake locked, the direct shaft is held at
zero and a single degree of freedom remains.

Coulomb friction is regularized as f·tanh(w / COULOMB_SPEED_EPS) so the
right-hand side stays smooth for the fixed-step RK4 integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional

from .params import ActuatorConfig, ConfigError, MotorParams, geared_speed

COULOMB_SPEED_EPS = 1e-3  # rad/s, regularization width of the friction model


class SimulationFault(RuntimeError):
    """The simulation produced an invalid state or command."""


class BrakeState(Enum):
    FREE = "free"
    LOCKED = "locked"


@dataclass(frozen=True)
class PlantState:
    """Plant state at time t. The geared shaft speed is derived, not stored."""

    w_out: float = 0.0          # output shaft speed, rad/s
    w_direct: float = 0.0       # direct-motor shaft speed, rad/s
    theta_out: float = 0.0      # output shaft angle, rad
    theta_direct: float = 0.0   # direct-motor shaft angle, rad
    brake: BrakeState = BrakeState.FREE
    t: float = 0.0

    def w_geared(self, cfg: ActuatorConfig) -> float:
        return geared_speed(self.w_out, self.w_direct, cfg.junction)


@dataclass(frozen=True)
class LoadModel:
    """Composable load at the output port, all quantities reflected to rotary.

    inertia: added output inertia, kg·m² (>= 0).
    damping: added viscous damping, N·m·s/rad (>= 0).
    stiffness: spring rate, N·m/rad (>= 0).
    wall_angle: spring engagement angle, rad; if set the spring pushes back
        only while theta_out > wall_angle (one-sided contact), otherwise the
        spring is bilateral and anchored at zero.
    coulomb: extra coulomb torque beyond the drivetrain's own, N·m (>= 0).
    external_torque: applied torque signal tau(t), N·m; positive accelerates
        the output in the positive direction.
    """

    inertia: float = 0.0
    damping: float = 0.0
    stiffness: float = 0.0
    wall_angle: Optional[float] = None
    coulomb: float = 0.0
    external_torque: Optional[Callable[[float], float]] = None

    def __post_init__(self) -> None:
        for name in ("inertia", "damping", "stiffness", "coulomb"):
            v = getattr(self, name)
            if v < 0.0 or not math.isfinite(v):
                raise ConfigError(f"load {name} must be >= 0, got {v}")

    def spring_torque(self, theta_out: float) -> float:
        if self.stiffness == 0.0:
            return 0.0
        if self.wall_angle is None:
            return -self.stiffness * theta_out
        if theta_out > self.wall_angle:
            return -self.stiffness * (theta_out - self.wall_angle)
        return 0.0


@dataclass(frozen=True)
class DerivedDynamics:
    """Lumped free-mode dynamics: J_lumped·ẇ_out + b_lumped·w_out = forcing.

    input_matrix maps (i_direct, i_geared) to (ẇ_out, ẇ_direct) under the
    simplifying assumptions of zero input-port damping and no external
    torque.
    """

    lumped_inertia: float
    lumped_damping: float
    input_matrix: tuple[tuple[float, float], tuple[float, float]]


def derive_dynamics(cfg: ActuatorConfig) -> DerivedDynamics:
    """Closed-form free-mode state-space quantities from the port parameters."""
    r1, r2 = cfg.r_direct, cfg.r_geared
    j_o, j_1, j_2 = cfg.port_out.inertia, cfg.port_direct.inertia, cfg.port_geared.inertia
    b_o = cfg.port_out.damping
    k1 = cfg.motor_direct.torque_constant
    k2 = cfg.motor_geared.torque_constant
    if j_2 <= 0.0:
        raise ConfigError("geared port inertia must be > 0 for the lumped model")
    ratio = (r1 / r2) ** 2 * (j_1 / j_2)
    j_t = j_o + r1**2 * j_1 + ratio * j_o
    b_t = b_o * (1.0 + ratio)
    b = (
        (k1 * r1 / j_t, k2 * r1 * (r1 * j_1) / (r2 * j_2) / j_t),
        (k1 * (r1**2 + r1**2 * j_o / (r2**2 * j_2)) / j_t, -k2 * r1 * j_o / (r2 * j_2) / j_t),
    )
    return DerivedDynamics(lumped_inertia=j_t, lumped_damping=b_t, input_matrix=b)


def _output_side_torque(w_out: float, theta_out: float, t: float,
                        load: LoadModel, cfg: ActuatorConfig) -> float:
    """Net non-viscous torque acting on the output port (spring, friction,
    external), N·m."""
    tau = load.spring_torque(theta_out)
    coulomb = cfg.train.coulomb_torque + load.coulomb
    if coulomb:
        tau -= coulomb * math.tanh(w_out / COULOMB_SPEED_EPS)
    if load.external_torque is not None:
        tau += load.external_torque(t)
    return tau


def accel_free(state: PlantState, i_direct: float, i_geared: float,
               load: LoadModel, cfg: ActuatorConfig) -> tuple[float, float]:
    """Accelerations (ẇ_out, ẇ_direct) with the brake free.

    Solves the coupled two-port balance with the junction constraints
    eliminated, including input-port damping and the load folded into the
    output port.
    """
    return _accel_free_raw(state.w_out, state.w_direct, state.theta_out, state.t,
                           i_direct, i_geared, load, cfg)


def _accel_free_raw(w_out: float, w_direct: float, theta_out: float, t: float,
                    i_direct: float, i_geared: float,
                    load: LoadModel, cfg: ActuatorConfig) -> tuple[float, float]:
    r1, r2 = cfg.r_direct, cfg.r_geared
    j_o = cfg.port_out.inertia + load.inertia
    b_o = cfg.port_out.damping + load.damping
    j_1, b_1 = cfg.port_direct.inertia, cfg.port_direct.damping
    j_2, b_2 = cfg.port_geared.inertia, cfg.port_geared.damping
    k1 = cfg.motor_direct.torque_constant
    k2 = cfg.motor_geared.torque_constant

    tau_out = _output_side_torque(w_out, theta_out, t, load, cfg)

    # [a c; b d] [ẇ_out; ẇ_direct] = [r_1; r_2]
    a = j_o / r1
    c = j_1
    b = j_o / r2 + r2 * j_2
    d = -(r2 / r1) * j_2
    rhs1 = k1 * i_direct + tau_out / r1 - (b_o / r1) * w_out - b_1 * w_direct
    rhs2 = (k2 * i_geared + tau_out / r2
            - (b_o / r2 + r2 * b_2) * w_out + (r2 / r1) * b_2 * w_direct)
    det = a * d - b * c
    if det == 0.0:
        raise ConfigError("singular inertia matrix; check port inertias")
    dw_out = (rhs1 * d - rhs2 * c) / det
    dw_direct = (a * rhs2 - b * rhs1) / det
    return dw_out, dw_direct


def accel_locked(state: PlantState, i_geared: float,
                 load: LoadModel, cfg: ActuatorConfig) -> float:
    """Output acceleration with the brake locked (direct shaft held at zero)."""
    return _accel_locked_raw(state.w_out, state.theta_out, state.t,
                             i_geared, load, cfg)


def _accel_locked_raw(w_out: float, theta_out: float, t: float, i_geared: float,
                      load: LoadModel, cfg: ActuatorConfig) -> float:
    r2 = cfg.r_geared
    j = cfg.port_out.inertia + load.inertia + r2**2 * cfg.port_geared.inertia
    b = cfg.port_out.damping + load.damping + r2**2 * cfg.port_geared.damping
    k2 = cfg.motor_geared.torque_constant
    tau_out = _output_side_torque(w_out, theta_out, t, load, cfg)
    return (k2 * i_geared * r2 + tau_out - b * w_out) / j


def apply_saturation(i_cmd: float, w: float, motor: MotorParams) -> float:
    """Clamp a current command to the motor's current and voltage limits.

    The voltage constraint |r·i + k·w| <= v_max restricts the feasible
    current interval at speed w; the command is clamped into it. When
    back-EMF alone exceeds the supply (over-speed, externally driven) the
    voltage-feasible interval excludes zero; the hard current limit then
    takes precedence so the drive never exceeds its rating.
    """
    lo_v = (-motor.max_voltage - motor.torque_constant * w) / motor.resistance
    hi_v = (motor.max_voltage - motor.torque_constant * w) / motor.resistance
    i = min(max(i_cmd, lo_v), hi_v)
    return min(max(i, -motor.max_current), motor.max_current)


def step(state: PlantState, i_direct: float, i_geared: float,
         load: LoadModel, cfg: ActuatorConfig, dt: float) -> PlantState:
    """Advance the plant by one fixed RK4 step with zero-order-hold currents.

    Brake transitions are a control action and never happen inside a step.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    t = state.t
    if state.brake is BrakeState.LOCKED:
        w, th = state.w_out, state.theta_out

        k1a = _accel_locked_raw(w, th, t, i_geared, load, cfg)
        k2a = _accel_locked_raw(w + 0.5 * dt * k1a, th + 0.5 * dt * w,
                                t + 0.5 * dt, i_geared, load, cfg)
        w2s = w + 0.5 * dt * k2a
        k3a = _accel_locked_raw(w2s, th + 0.5 * dt * (w + 0.5 * dt * k1a),
                                t + 0.5 * dt, i_geared, load, cfg)
        w3s = w + dt * k3a
        k4a = _accel_locked_raw(w3s, th + dt * w2s, t + dt, i_geared, load, cfg)

        new_w = w + dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        new_th = th + dt / 6.0 * (w + 2.0 * (w + 0.5 * dt * k1a)
                                  + 2.0 * w2s + w3s)
        new = replace(state, w_out=new_w, theta_out=new_th, t=t + dt)
    else:
        wo, wd = state.w_out, state.w_direct
        tho, thd = state.theta_out, state.theta_direct

        a1o, a1d = _accel_free_raw(wo, wd, tho, t, i_direct, i_geared, load, cfg)
        wo1, wd1 = wo + 0.5 * dt * a1o, wd + 0.5 * dt * a1d
        a2o, a2d = _accel_free_raw(wo1, wd1, tho + 0.5 * dt * wo, t + 0.5 * dt,
                                   i_direct, i_geared, load, cfg)
        wo2, wd2 = wo + 0.5 * dt * a2o, wd + 0.5 * dt * a2d
        a3o, a3d = _accel_free_raw(wo2, wd2, tho + 0.5 * dt * wo1, t + 0.5 * dt,
                                   i_direct, i_geared, load, cfg)
        wo3, wd3 = wo + dt * a3o, wd + dt * a3d
        a4o, a4d = _accel_free_raw(wo3, wd3, tho + dt * wo2, t + dt,
                                   i_direct, i_geared, load, cfg)

        new_wo = wo + dt / 6.0 * (a1o + 2.0 * a2o + 2.0 * a3o + a4o)
        new_wd = wd + dt / 6.0 * (a1d + 2.0 * a2d + 2.0 * a3d + a4d)
        new_tho = tho + dt / 6.0 * (wo + 2.0 * wo1 + 2.0 * wo2 + wo3)
        new_thd = thd + dt / 6.0 * (wd + 2.0 * wd1 + 2.0 * wd2 + wd3)
        new = replace(state, w_out=new_wo, w_direct=new_wd,
                      theta_out=new_tho, theta_direct=new_thd, t=t + dt)

    if not (math.isfinite(new.w_out) and math.isfinite(new.w_direct)
            and math.isfinite(new.theta_out) and math.isfinite(new.theta_direct)):
        raise SimulationFault(
            f"non-finite state at t={t + dt:.6f}: w_out={new.w_out}, "
            f"w_direct={new.w_direct}"
        )
    return new


def engage_brake(state: PlantState, cfg: ActuatorConfig) -> PlantState:
    """Lock the brake. Faulted if the direct shaft is still moving."""
    if abs(state.w_direct) >= cfg.brake_engage_speed:
        raise SimulationFault(
            f"brake engage commanded at |w_direct|={abs(state.w_direct):.3f} rad/s "
            f">= threshold {cfg.brake_engage_speed}"
        )
    return replace(state, brake=BrakeState.LOCKED, w_direct=0.0)


def release_brake(state: PlantState) -> PlantState:
    """Free the direct shaft; it starts at rest."""
    return replace(state, brake=BrakeState.FREE)

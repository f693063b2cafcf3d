"""Controller stack: high-force PI, high-speed impedance control, nullspace
secondary control, both gear-shift procedures, and automatic mode selection.

Two clocks: the outer loop (mode selection, position/impedance laws) runs at
500 Hz, the inner loop (current allocation, braking law, friction
compensation) at the 20 kHz plant rate. Inner current loops are idealized as
one-tick set-point tracking; saturation is applied by the harness through
:func:`dsdm.dynamics.apply_saturation`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional

from .dynamics import BrakeState
from .params import ActuatorConfig, GearMode


class ControlMode(Enum):
    HIGH_FORCE = "high_force"
    HIGH_SPEED = "high_speed"
    SHIFTING_TO_HF = "shifting_to_hf"


class BrakeRequest(Enum):
    ENGAGE = "engage"
    RELEASE = "release"
    HOLD = "hold"


class ImpedanceLevel(Enum):
    HIGH = "high"
    LOW = "low"


class ModePolicy(Enum):
    FIXED = "fixed"   # mode changes only on explicit requests
    AUTO = "auto"     # state machine picks the mode from load conditions


@dataclass(frozen=True)
class ControlCommand:
    """Current set-points (A, before saturation) and a brake action."""

    i_direct_sp: float
    i_geared_sp: float
    brake_request: BrakeRequest = BrakeRequest.HOLD


@dataclass(frozen=True)
class Observation:
    """Plant measurements available to the controller at one tick."""

    t: float
    x: float            # linear output position, m
    v: float            # linear output speed, m/s
    w_out: float        # rad/s
    w_direct: float     # rad/s
    w_geared: float     # rad/s
    brake: BrakeState = BrakeState.FREE


@dataclass(frozen=True)
class NullspaceProjector:
    """Input directions that leave the output unaffected.

    kinematic: (w_direct, w_geared) direction with zero output speed.
    dynamic: (i_direct, i_geared) direction with zero output acceleration;
    depends only on motor-side parameters, not on the load.
    """

    kinematic: tuple[float, float]
    dynamic: tuple[float, float]

    @classmethod
    def from_config(cls, cfg: ActuatorConfig) -> "NullspaceProjector":
        r1, r2 = cfg.r_direct, cfg.r_geared
        j1, j2 = cfg.port_direct.inertia, cfg.port_geared.inertia
        k1 = cfg.motor_direct.torque_constant
        k2 = cfg.motor_geared.torque_constant
        return cls(
            kinematic=(1.0, -r2 / r1),
            dynamic=(j1 / k1, -r2 * j2 / (r1 * k2)),
        )


@dataclass(frozen=True)
class ImpedanceParams:
    """Prescribed output impedance in linear units.

    stiffness: N/m; damping: N·s/m; force_limit: optional cap on the
    commanded output force magnitude, N.
    """

    stiffness: float = 0.0
    damping: float = 0.0
    force_limit: Optional[float] = None


def impedance_force(x_ref: float, x: float, v: float,
                    params: ImpedanceParams) -> float:
    """Desired output force from the prescribed impedance, N (clamped)."""
    f = params.stiffness * (x_ref - x) - params.damping * v
    if params.force_limit is not None:
        f = min(max(f, -params.force_limit), params.force_limit)
    return f


def braking_secondary(w_direct: float, gain: float) -> float:
    """Secondary-controller input that brakes the direct shaft, 1/s · rad/s."""
    return -gain * w_direct


def hs_inner_allocation(tau_d: float, friction_comp: float, secondary_u: float,
                        proj: NullspaceProjector,
                        cfg: ActuatorConfig) -> tuple[float, float]:
    """Motor currents realizing an output torque plus a nullspace action.

    tau_d and friction_comp are rotary output torques (N·m). The drive share
    is split between the motors in the junction's static balance ratio, so a
    steady output torque does not pump the internal differential motion;
    secondary_u is projected through the dynamic nullspace and does not
    affect the output.
    """
    drive = tau_d + friction_comp
    i1 = drive / (cfg.motor_direct.torque_constant * cfg.r_direct)
    i2 = drive / (cfg.motor_geared.torque_constant * cfg.r_geared)
    return (proj.dynamic[0] * secondary_u + i1,
            proj.dynamic[1] * secondary_u + i2)


def kinematic_transition(u1: float, u2: float, proj: NullspaceProjector,
                         cfg: ActuatorConfig) -> tuple[float, float]:
    """Shaft-speed set-points giving output speed u2 while the direct shaft
    tracks u1 (assumes stiff local velocity loops on both motors)."""
    return (proj.kinematic[0] * u1,
            proj.kinematic[1] * u1 + cfg.r_geared * u2)


class PositionPI:
    """Position PI with clamping anti-windup, output in amperes.

    The integral term is skipped while the output is saturated in the
    direction the error keeps pushing, and is additionally clamped to
    windup_limit.
    """

    def __init__(self, kp: float, ki: float, output_limit: float,
                 windup_limit: float) -> None:
        self.kp = kp
        self.ki = ki
        self.output_limit = output_limit
        self.windup_limit = windup_limit
        self.integral = 0.0

    def reset(self) -> None:
        self.integral = 0.0

    def seed(self, output: float, error: float = 0.0) -> None:
        """Initialize so the next update with this error returns `output`."""
        self.integral = min(max(output - self.kp * error, -self.windup_limit),
                            self.windup_limit)

    def update(self, error: float, dt: float, extra: float = 0.0) -> float:
        """One step; `extra` (e.g. a damping term) is summed before the
        output clamp and participates in the anti-windup decision."""
        p = self.kp * error
        unclamped = p + self.integral + extra
        saturating = abs(unclamped) > self.output_limit
        if not (saturating and error * unclamped > 0.0):
            self.integral += self.ki * error * dt
            self.integral = min(max(self.integral, -self.windup_limit),
                                self.windup_limit)
        out = p + self.integral + extra
        return min(max(out, -self.output_limit), self.output_limit)


@dataclass
class TaskSpec:
    """What the actuator is asked to do.

    reference: target linear position vs time, m.
    desired_impedance: LOW forces high-speed mode (back-drivable / force
        limited); HIGH lets the selector pick the fastest-converging mode.
    impedance: prescribed impedance used in high-speed mode.
    mode_policy: FIXED keeps the initial mode except for explicit requests.
    secondary: optional nullspace input u(obs), active in high-speed mode.
    """

    reference: Callable[[float], float]
    desired_impedance: ImpedanceLevel = ImpedanceLevel.HIGH
    impedance: ImpedanceParams = field(default_factory=ImpedanceParams)
    mode_policy: ModePolicy = ModePolicy.FIXED
    secondary: Optional[Callable[[Observation], float]] = None


@dataclass(frozen=True)
class ModeState:
    """Automatic mode-selection state."""

    mode: ControlMode
    desired_impedance: ImpedanceLevel
    torque_limited: bool
    resistance_timer: float = 0.0
    upshift_timer: float = 0.0
    time_in_mode: float = 0.0


@dataclass(frozen=True)
class ControllerGains:
    """Controller gains and mode-selection thresholds (config-file backed)."""

    hf_kp: float = 3800.0                 # A/m
    hf_ki: float = 12000.0                # A/(m·s)
    hf_kv: float = 90.0                   # A·s/m, error-rate damping
    hf_windup_limit: float = 1.1          # A
    friction_cancel_fraction: float = 0.8
    comp_speed_eps: float = 0.01          # rad/s, compensation blend width
    braking_gain: float = 50.0            # 1/s
    max_shift_time: float = 2.0           # s
    hs_seed_blend: float = 1.0            # s, torque-bias decay entering HS
    hf_seed_blend: float = 0.5            # s, reference-offset decay entering HF
    resistance_speed_fraction: float = 0.05
    resistance_time: float = 0.05         # s
    upshift_current_fraction: float = 0.3
    upshift_error: float = 0.02           # m
    upshift_time: float = 0.05            # s
    hf_min_dwell: float = 1.0             # s, minimum stay before upshift

    def __post_init__(self) -> None:
        if not 0.0 <= self.friction_cancel_fraction <= 1.0:
            raise ValueError("friction_cancel_fraction must be in [0, 1]")


def mode_selector(state: ModeState, obs: Observation, task: TaskSpec,
                  cfg: ActuatorConfig, gains: ControllerGains, dt: float,
                  direct_saturated: bool, i_geared_applied: float) -> ModeState:
    """One deterministic step of the automatic mode-selection state machine.

    LOW desired impedance or an output force limit pins high-speed mode.
    Otherwise: downshift when the direct motor is saturated against a
    near-stalled output, upshift when the geared motor is lightly loaded
    but the target is still far.
    """
    state = replace(state, time_in_mode=state.time_in_mode + dt)
    if (state.desired_impedance is ImpedanceLevel.LOW) or state.torque_limited:
        return state

    if state.mode is ControlMode.HIGH_SPEED:
        v_max = cfg.max_linear_speed(GearMode.HIGH_SPEED)
        stalled = direct_saturated and abs(obs.v) < gains.resistance_speed_fraction * v_max
        timer = state.resistance_timer + dt if stalled else 0.0
        if timer >= gains.resistance_time:
            return replace(state, mode=ControlMode.SHIFTING_TO_HF,
                           resistance_timer=0.0, time_in_mode=0.0)
        return replace(state, resistance_timer=timer)

    if state.mode is ControlMode.HIGH_FORCE:
        err = task.reference(obs.t) - obs.x
        light = (abs(i_geared_applied)
                 < gains.upshift_current_fraction * cfg.motor_geared.max_current)
        eligible = (state.time_in_mode > gains.hf_min_dwell and light
                    and abs(err) > gains.upshift_error)
        timer = state.upshift_timer + dt if eligible else 0.0
        if timer >= gains.upshift_time:
            return replace(state, mode=ControlMode.HIGH_SPEED,
                           upshift_timer=0.0, time_in_mode=0.0)
        return replace(state, upshift_timer=timer)

    return state  # shifting: wait for completion


class DsdmController:
    """Deterministic synchronous controller for one actuator instance."""

    def __init__(self, cfg: ActuatorConfig, gains: ControllerGains,
                 task: TaskSpec,
                 initial_mode: ControlMode = ControlMode.HIGH_SPEED) -> None:
        if initial_mode is ControlMode.SHIFTING_TO_HF:
            raise ValueError("cannot start mid-shift")
        self.cfg = cfg
        self.gains = gains
        self.task = task
        self.proj = NullspaceProjector.from_config(cfg)
        self.mode = initial_mode
        self.pi = PositionPI(gains.hf_kp, gains.hf_ki,
                             cfg.motor_geared.max_current,
                             gains.hf_windup_limit)
        self.mode_state = ModeState(
            mode=initial_mode,
            desired_impedance=task.desired_impedance,
            torque_limited=task.impedance.force_limit is not None,
        )
        self.tau_d = 0.0            # rotary output torque demand, N·m
        self.i_geared_hold = 0.0    # HF current held between outer ticks
        self.hf_prev_err: Optional[float] = None
        self.tau_bias = 0.0
        self.bias_t0: Optional[float] = None
        self.ref_offset = 0.0
        self.ref_offset_t0: Optional[float] = None
        self.shift_start: Optional[float] = None
        self.pending_brake = BrakeRequest.HOLD
        self.requested = (0.0, 0.0)
        self.applied = (0.0, 0.0)
        self.direct_saturated = False
        self.geared_saturated = False
        self.last_comp_torque = 0.0
        self.last_drive_torque = 0.0
        self.faults: list[str] = []
        self.transitions: list[tuple[float, ControlMode, ControlMode]] = []

    # -- helpers -------------------------------------------------------

    def _impedance_torque(self, obs: Observation) -> float:
        f = impedance_force(self.task.reference(obs.t), obs.x, obs.v,
                            self.task.impedance)
        return self.cfg.train.force_to_torque(f)

    def _friction_comp_torque(self, obs: Observation) -> float:
        frac = self.gains.friction_cancel_fraction
        return (frac * self.cfg.train.coulomb_torque
                * math.tanh(obs.w_out / self.gains.comp_speed_eps))

    def _clamp_torque(self, tau: float) -> float:
        limit = self.task.impedance.force_limit
        if limit is None:
            return tau
        lim = self.cfg.train.force_to_torque(limit)
        return min(max(tau, -lim), lim)

    def _set_mode(self, t: float, new_mode: ControlMode) -> None:
        self.transitions.append((t, self.mode, new_mode))
        self.mode = new_mode
        self.mode_state = replace(self.mode_state, mode=new_mode,
                                  resistance_timer=0.0, upshift_timer=0.0,
                                  time_in_mode=0.0)

    def _start_release(self, obs: Observation) -> None:
        """High-force -> high-speed: release anytime, seed the torque demand
        from the geared-motor torque so the output force is continuous."""
        tau_seed = (self.cfg.motor_geared.torque_constant * self.applied[1]
                    * self.cfg.r_geared)
        tau_imp = self._impedance_torque(obs)
        # the inner loop will add friction compensation on top of tau_d, so
        # take it out of the seed to keep the net output force continuous
        self.tau_bias = tau_seed - tau_imp - self._friction_comp_torque(obs)
        self.bias_t0 = obs.t
        self.tau_d = self._clamp_torque(tau_imp + self.tau_bias)
        self.pending_brake = BrakeRequest.RELEASE
        self._set_mode(obs.t, ControlMode.HIGH_SPEED)

    def _start_shift(self, obs: Observation) -> None:
        """High-speed -> high-force: brake the direct shaft through the
        nullspace while the impedance law keeps driving the output."""
        self.shift_start = obs.t
        self._set_mode(obs.t, ControlMode.SHIFTING_TO_HF)

    def _finish_shift(self, obs: Observation) -> None:
        """Brake engagement reached: hand off to the PI without a torque or
        reference jump."""
        k2 = self.cfg.motor_geared.torque_constant
        # seed with the drive (torque demand plus friction-compensation
        # share) the geared motor carried just before the lock, so the
        # output force is continuous
        i_seed = self.last_drive_torque / (k2 * self.cfg.r_geared)
        self.ref_offset = self.task.reference(obs.t) - obs.x
        self.ref_offset_t0 = obs.t
        self.pi.seed(i_seed)
        self.i_geared_hold = i_seed
        self.hf_prev_err = None
        self.shift_start = None
        self._set_mode(obs.t, ControlMode.HIGH_FORCE)

    def _abort_shift(self, obs: Observation) -> None:
        self.faults.append(
            f"shift aborted at t={obs.t:.4f}: |w_direct|={abs(obs.w_direct):.3f} "
            f"rad/s after {self.gains.max_shift_time} s"
        )
        self.shift_start = None
        self._set_mode(obs.t, ControlMode.HIGH_SPEED)

    # -- public API ----------------------------------------------------

    def request_mode(self, target: ControlMode, obs: Observation) -> None:
        """Explicit (scheduled) mode change request."""
        if target is self.mode:
            return
        if target is ControlMode.HIGH_SPEED and self.mode is ControlMode.HIGH_FORCE:
            self._start_release(obs)
        elif target is ControlMode.HIGH_FORCE and self.mode is ControlMode.HIGH_SPEED:
            self._start_shift(obs)

    def outer_tick(self, obs: Observation, dt: float) -> None:
        """500 Hz loop: mode selection plus the position/impedance laws."""
        if self.task.mode_policy is ModePolicy.AUTO:
            prev = self.mode_state.mode
            self.mode_state = mode_selector(
                self.mode_state, obs, self.task, self.cfg, self.gains, dt,
                self.direct_saturated, self.applied[1])
            new = self.mode_state.mode
            if new is not prev:
                self.mode_state = replace(self.mode_state, mode=prev)
                if new is ControlMode.SHIFTING_TO_HF:
                    self._start_shift(obs)
                elif new is ControlMode.HIGH_SPEED:
                    self._start_release(obs)

        if self.mode is ControlMode.HIGH_FORCE:
            err = self.task.reference(obs.t) - obs.x
            if self.ref_offset_t0 is not None:
                err -= self.ref_offset * math.exp(
                    -(obs.t - self.ref_offset_t0) / self.gains.hf_seed_blend)
            derr = 0.0 if self.hf_prev_err is None else (err - self.hf_prev_err) / dt
            self.hf_prev_err = err
            self.i_geared_hold = self.pi.update(err, dt, self.gains.hf_kv * derr)
        else:
            tau_imp = self._impedance_torque(obs)
            if self.bias_t0 is not None:
                tau_imp += self.tau_bias * math.exp(
                    -(obs.t - self.bias_t0) / self.gains.hs_seed_blend)
            self.tau_d = self._clamp_torque(tau_imp)

    def inner_tick(self, obs: Observation) -> ControlCommand:
        """20 kHz loop: current allocation, braking law, brake sequencing."""
        brake_req = self.pending_brake
        self.pending_brake = BrakeRequest.HOLD

        if self.mode is ControlMode.SHIFTING_TO_HF:
            if abs(obs.w_direct) < self.cfg.brake_engage_speed:
                self._finish_shift(obs)
                brake_req = BrakeRequest.ENGAGE
            elif (obs.t - self.shift_start) > self.gains.max_shift_time:
                self._abort_shift(obs)

        if self.mode is ControlMode.HIGH_FORCE:
            self.last_comp_torque = 0.0
            cmd = ControlCommand(0.0, self.i_geared_hold, brake_req)
        else:
            comp = self._friction_comp_torque(obs)
            self.last_comp_torque = comp
            drive = self.tau_d + comp
            if self.mode is ControlMode.SHIFTING_TO_HF:
                u = braking_secondary(obs.w_direct, self.gains.braking_gain)
                # with the brake still open, the direct motor must react the
                # full output torque; cap the drive at what it can hold (with
                # headroom for the braking action) or it saturates and the
                # nullspace braking loses its grip on the shaft
                k1, r1 = self.cfg.motor_direct.torque_constant, self.cfg.r_direct
                headroom = max(self.cfg.motor_direct.max_current
                               - abs(self.proj.dynamic[0] * u), 0.0)
                cap = headroom * k1 * r1
                drive = min(max(drive, -cap), cap)
            elif self.task.secondary is not None:
                u = self.task.secondary(obs)
            else:
                u = 0.0
            self.last_drive_torque = drive
            i1, i2 = hs_inner_allocation(drive, 0.0, u, self.proj, self.cfg)
            cmd = ControlCommand(i1, i2, brake_req)

        self.requested = (cmd.i_direct_sp, cmd.i_geared_sp)
        return cmd

    def notify_applied(self, i_direct: float, i_geared: float) -> None:
        """Record post-saturation currents (used for stall detection and
        bumpless seeding)."""
        self.applied = (i_direct, i_geared)
        self.direct_saturated = abs(i_direct - self.requested[0]) > 1e-9
        self.geared_saturated = abs(i_geared - self.requested[1]) > 1e-9

    def output_torque_estimate(self) -> float:
        """Sensorless estimate of the net torque delivered to the load, N·m.

        Reconstructed from applied currents (minus the friction-compensation
        share); during a shift the motor currents carry the nullspace braking
        action, so the commanded output torque is reported instead.
        """
        if self.mode is ControlMode.HIGH_FORCE:
            return (self.cfg.motor_geared.torque_constant * self.applied[1]
                    * self.cfg.r_geared)
        if self.mode is ControlMode.SHIFTING_TO_HF:
            return self.last_drive_torque - self.last_comp_torque
        return (self.cfg.motor_direct.torque_constant * self.applied[0]
                * self.cfg.r_direct - self.last_comp_torque)

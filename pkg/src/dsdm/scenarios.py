"""Scenario catalog and simulation harness.

Each scenario couples the prototype plant to a load and a task, runs the
two-clock control loop, records a 500 Hz trace, and machine-checks its own
acceptance assertions. Traces are deterministic: identical inputs yield
bit-identical CSV files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

from .config_io import FullConfig, default_full_config
from .control import (ControlMode, ControllerGains, DsdmController,
                      ImpedanceLevel, ImpedanceParams, ModePolicy,
                      Observation, TaskSpec)
from .dynamics import (BrakeState, LoadModel, PlantState, SimulationFault,
                       apply_saturation, engage_brake, release_brake, step)
from .params import TWO_PI, ActuatorConfig, GearMode


@dataclass(frozen=True)
class TraceRecord:
    """One 500 Hz sample of the quantities a test bench would log."""

    t: float                # s
    x_out: float            # m
    v_out: float            # m/s
    w_direct: float         # rad/s
    w_geared: float         # rad/s
    i_direct: float         # A (applied, post-saturation)
    i_geared: float         # A
    mode: str
    brake: str
    tau_out_est: float      # N·m, sensorless output torque estimate


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ForcePulse:
    """Rectangular external force at the linear output, N."""

    start: float
    duration: float
    force: float


@dataclass(frozen=True)
class ModeSwitch:
    """Scheduled explicit mode-change request."""

    time: float
    target: ControlMode


@dataclass(frozen=True)
class RunResult:
    records: tuple[TraceRecord, ...]
    faults: tuple[str, ...]
    transitions: tuple[tuple[float, ControlMode, ControlMode], ...]

    def final(self) -> TraceRecord:
        return self.records[-1]


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    duration: float
    make_task: Callable[[ActuatorConfig], TaskSpec]
    make_load: Callable[[ActuatorConfig], LoadModel]
    initial_mode: ControlMode = ControlMode.HIGH_SPEED
    switches: tuple[ModeSwitch, ...] = ()
    check: Optional[Callable[["RunResult", ActuatorConfig], list[CheckResult]]] = None

    def __post_init__(self) -> None:
        if not (self.duration > 0.0):
            raise ValueError("scenario duration must be > 0")
        times = [s.time for s in self.switches]
        if times != sorted(times):
            raise ValueError("scenario mode switches must be time-ordered")


def pulses_to_torque(pulses: Sequence[ForcePulse],
                     cfg: ActuatorConfig) -> Callable[[float], float]:
    """External torque signal from a list of linear force pulses."""

    def tau(t: float) -> float:
        f = 0.0
        for p in pulses:
            if p.start <= t < p.start + p.duration:
                f += p.force
        return cfg.train.force_to_torque(f)

    return tau


def observe(state: PlantState, cfg: ActuatorConfig) -> Observation:
    return Observation(
        t=state.t,
        x=cfg.train.to_linear(state.theta_out),
        v=cfg.train.to_linear(state.w_out),
        w_out=state.w_out,
        w_direct=state.w_direct,
        w_geared=state.w_geared(cfg),
        brake=state.brake,
    )


def run_scenario(scenario: Scenario,
                 config: Optional[FullConfig] = None) -> RunResult:
    """Simulate a scenario and return its trace.

    Raises SimulationFault on a non-finite state; controller-level faults
    (e.g. an aborted shift) are reported in the result instead.
    """
    full = config if config is not None else default_full_config()
    cfg, gains, sim = full.plant, full.gains, full.sim
    task = scenario.make_task(cfg)
    load = scenario.make_load(cfg)
    ctrl = DsdmController(cfg, gains, task, initial_mode=scenario.initial_mode)
    brake0 = (BrakeState.LOCKED if scenario.initial_mode is ControlMode.HIGH_FORCE
              else BrakeState.FREE)
    state = PlantState(brake=brake0)
    pending = list(scenario.switches)
    n_steps = round(scenario.duration / sim.dt)
    records: list[TraceRecord] = []

    def snapshot(st: PlantState, i1: float, i2: float) -> TraceRecord:
        return TraceRecord(
            t=st.t,
            x_out=cfg.train.to_linear(st.theta_out),
            v_out=cfg.train.to_linear(st.w_out),
            w_direct=st.w_direct,
            w_geared=st.w_geared(cfg),
            i_direct=i1,
            i_geared=i2,
            mode=ctrl.mode.value,
            brake=st.brake.value,
            tau_out_est=ctrl.output_torque_estimate(),
        )

    i1 = i2 = 0.0
    for k in range(n_steps):
        obs = observe(state, cfg)
        while pending and pending[0].time <= state.t:
            ctrl.request_mode(pending.pop(0).target, obs)
        if k % sim.outer_divisor == 0:
            ctrl.outer_tick(obs, sim.outer_dt)
        cmd = ctrl.inner_tick(obs)
        if cmd.brake_request.value == "engage" and state.brake is BrakeState.FREE:
            state = engage_brake(state, cfg)
        elif cmd.brake_request.value == "release" and state.brake is BrakeState.LOCKED:
            state = release_brake(state)
        if state.brake is BrakeState.LOCKED:
            i1 = 0.0
        else:
            i1 = apply_saturation(cmd.i_direct_sp, state.w_direct, cfg.motor_direct)
        i2 = apply_saturation(cmd.i_geared_sp, state.w_geared(cfg), cfg.motor_geared)
        ctrl.notify_applied(i1, i2)
        if k % sim.outer_divisor == 0:
            records.append(snapshot(state, i1, i2))
        state = step(state, i1, i2, load, cfg, sim.dt)

    records.append(snapshot(state, i1, i2))
    return RunResult(records=tuple(records), faults=tuple(ctrl.faults),
                     transitions=tuple(ctrl.transitions))


CSV_HEADER = ("t_s,x_out_m,v_out_mps,w_direct_radps,w_geared_radps,"
              "i_direct_A,i_geared_A,mode,brake,tau_out_est_Nm")


def trace_to_csv(records: Sequence[TraceRecord]) -> str:
    lines = [CSV_HEADER]
    for r in records:
        lines.append(
            f"{r.t:.6f},{r.x_out:.12e},{r.v_out:.12e},{r.w_direct:.12e},"
            f"{r.w_geared:.12e},{r.i_direct:.12e},{r.i_geared:.12e},"
            f"{r.mode},{r.brake},{r.tau_out_est:.12e}"
        )
    return "\n".join(lines) + "\n"


def write_trace(records: Sequence[TraceRecord], path: "str | Path") -> None:
    Path(path).write_text(trace_to_csv(records))


# ---------------------------------------------------------------------------
# helpers shared by the scenario definitions


def _window(res: RunResult, t0: float, t1: float) -> list[TraceRecord]:
    return [r for r in res.records if t0 <= r.t <= t1]


def _force_est(r: TraceRecord, cfg: ActuatorConfig) -> float:
    return cfg.train.torque_to_force(r.tau_out_est)


def _no_faults(res: RunResult) -> CheckResult:
    return CheckResult("no controller faults", not res.faults,
                       "; ".join(res.faults) if res.faults else "clean")


def _check(name: str, ok: bool, detail: str) -> CheckResult:
    return CheckResult(name, bool(ok), detail)


def _screw_factor(cfg: ActuatorConfig) -> float:
    """(lead / 2π)²: converts linear load quantities to rotary."""
    return (cfg.train.lead / TWO_PI) ** 2


# ---------------------------------------------------------------------------
# scenario definitions


def _hf_step() -> Scenario:
    target = 0.2
    pulse = ForcePulse(start=5.0, duration=1.0, force=-222.0)

    def make_task(cfg: ActuatorConfig) -> TaskSpec:
        return TaskSpec(reference=lambda t: target,
                        desired_impedance=ImpedanceLevel.HIGH,
                        mode_policy=ModePolicy.FIXED)

    def make_load(cfg: ActuatorConfig) -> LoadModel:
        return LoadModel(external_torque=pulses_to_torque([pulse], cfg))

    def check(res: RunResult, cfg: ActuatorConfig) -> list[CheckResult]:
        err = abs(res.final().x_out - target)
        peak_v = max(r.v_out for r in _window(res, 0.0, 5.0))
        v_lim = cfg.max_linear_speed(GearMode.HIGH_FORCE)
        dip = max(abs(r.x_out - target) for r in _window(res, pulse.start,
                                                         pulse.start + pulse.duration))
        return [
            _check("final error < 1 um", err < 1e-6, f"{err * 1e6:.4f} um"),
            _check("voltage-limited plateau", peak_v > 0.9 * v_lim,
                   f"peak {peak_v * 1e3:.1f} mm/s vs limit {v_lim * 1e3:.1f} mm/s"),
            _check("disturbance visibly deflects then recovers",
                   2e-5 < dip < 2e-3, f"max deflection {dip * 1e3:.3f} mm"),
            _no_faults(res),
        ]

    return Scenario(
        name="hf-step-200mm",
        description="High-force mode 200 mm position step with a 222 N "
                    "disturbance pulse at t=5 s",
        duration=10.0,
        make_task=make_task,
        make_load=make_load,
        initial_mode=ControlMode.HIGH_FORCE,
        check=check,
    )


def _hs_step() -> Scenario:
    target = 0.2

    def make_task(cfg: ActuatorConfig) -> TaskSpec:
        return TaskSpec(reference=lambda t: target,
                        impedance=ImpedanceParams(stiffness=4000.0),
                        mode_policy=ModePolicy.FIXED)

    def make_load(cfg: ActuatorConfig) -> LoadModel:
        return LoadModel()

    def check(res: RunResult, cfg: ActuatorConfig) -> list[CheckResult]:
        peak_v = max(r.v_out for r in res.records)
        overshoot = max(r.x_out for r in res.records) - target
        err = abs(res.final().x_out - target)
        return [
            _check("peak speed >= 0.3 m/s", peak_v >= 0.3, f"{peak_v:.3f} m/s"),
            _check("overshoot < 10% of step", overshoot < 0.1 * target,
                   f"{overshoot * 1e3:.2f} mm"),
            _check("final error < 1 mm", err < 1e-3, f"{err * 1e3:.4f} mm"),
            _no_faults(res),
        ]

    return Scenario(
        name="hs-step-200mm",
        description="High-speed mode 200 mm step under pure-stiffness "
                    "impedance control",
        duration=2.5,
        make_task=make_task,
        make_load=make_load,
        check=check,
    )


def _backdrive() -> Scenario:
    pulse = ForcePulse(start=0.5, duration=1.0, force=20.0)

    def make_task(cfg: ActuatorConfig) -> TaskSpec:
        return TaskSpec(reference=lambda t: 0.0,
                        desired_impedance=ImpedanceLevel.LOW,
                        impedance=ImpedanceParams(stiffness=0.0),
                        mode_policy=ModePolicy.AUTO)

    def make_load(cfg: ActuatorConfig) -> LoadModel:
        return LoadModel(external_torque=pulses_to_torque([pulse], cfg))

    def check(res: RunResult, cfg: ActuatorConfig) -> list[CheckResult]:
        travel = max(r.x_out for r in res.records)
        v_end = abs(res.final().v_out)
        peak_force = max(abs(_force_est(r, cfg)) for r in res.records)
        comp_cap = 0.9 * cfg.train.coulomb
        modes = {r.mode for r in res.records}
        return [
            _check("external force back-drives the output", travel > 0.05,
                   f"travel {travel * 1e3:.1f} mm"),
            _check("coasts to rest after the push", v_end < 0.01,
                   f"|v| end {v_end * 1e3:.2f} mm/s"),
            _check("actuator applies no net force beyond friction comp",
                   peak_force <= comp_cap,
                   f"peak |force est| {peak_force:.2f} N <= {comp_cap:.1f} N"),
            _check("stays in high-speed mode (low impedance demanded)",
                   modes == {ControlMode.HIGH_SPEED.value}, f"modes {sorted(modes)}"),
            _no_faults(res),
        ]

    return Scenario(
        name="backdrive-zero-impedance",
        description="Zero prescribed impedance; a 20 N hand force back-drives "
                    "the output against residual friction",
        duration=4.0,
        make_task=make_task,
        make_load=make_load,
        check=check,
    )


def _constant_speed_shift() -> Scenario:
    v_cmd = 0.02
    t_up, t_down = 2.0, 4.0

    def make_task(cfg: ActuatorConfig) -> TaskSpec:
        r1, r2 = cfg.r_direct, cfg.r_geared

        def spin_down_geared(obs: Observation) -> float:
            # secondary objective: transfer junction speed to the direct
            # shaft so the later downshift actually has speed to brake
            return (r1 / r2) * 20.0 * obs.w_geared

        return TaskSpec(reference=lambda t: v_cmd * t,
                        impedance=ImpedanceParams(stiffness=4.0e4, damping=280.0),
                        mode_policy=ModePolicy.FIXED,
                        secondary=spin_down_geared)

    def make_load(cfg: ActuatorConfig) -> LoadModel:
        return LoadModel()

    def check(res: RunResult, cfg: ActuatorConfig) -> list[CheckResult]:
        out = []
        for (t0, t1), label in (((t_up - 0.5, t_up + 0.5), "upshift"),
                                ((t_down - 0.5, t_down + 0.5), "downshift")):
            dev = max(abs(r.v_out - v_cmd) for r in _window(res, t0, t1))
            out.append(_check(
                f"speed held within 5% across {label}",
                dev <= 0.05 * v_cmd,
                f"max |v - {v_cmd}| = {dev * 1e3:.3f} mm/s"))
        kinds = [(a.value, b.value) for (_, a, b) in res.transitions]
        out.append(_check(
            "transition sequence HF->HS->shift->HF",
            kinds == [("high_force", "high_speed"),
                      ("high_speed", "shifting_to_hf"),
                      ("shifting_to_hf", "high_force")],
            f"{kinds}"))
        out.append(_no_faults(res))
        return out

    return Scenario(
        name="constant-speed-shift",
        description="Track a 20 mm/s ramp; shift HF->HS at 2 s and back at "
                    "4 s without losing the output speed",
        duration=6.0,
        make_task=make_task,
        make_load=make_load,
        initial_mode=ControlMode.HIGH_FORCE,
        switches=(ModeSwitch(t_up, ControlMode.HIGH_SPEED),
                  ModeSwitch(t_down, ControlMode.HIGH_FORCE)),
        check=check,
    )


def _collision() -> Scenario:
    target = 0.3
    wall_x = 0.15
    wall_k = 2.0e4   # N/m
    f_limit = 30.0   # N

    def make_task(cfg: ActuatorConfig) -> TaskSpec:
        return TaskSpec(reference=lambda t: target,
                        impedance=ImpedanceParams(stiffness=2000.0,
                                                  force_limit=f_limit),
                        mode_policy=ModePolicy.AUTO)

    def make_load(cfg: ActuatorConfig) -> LoadModel:
        fac = _screw_factor(cfg)
        return LoadModel(stiffness=wall_k * fac,
                         wall_angle=cfg.train.to_rotary(wall_x))

    def check(res: RunResult, cfg: ActuatorConfig) -> list[CheckResult]:
        peak_force = max(abs(_force_est(r, cfg)) for r in res.records)
        xf, vf = res.final().x_out, abs(res.final().v_out)
        modes = {r.mode for r in res.records}
        return [
            _check("output force capped at the prescribed limit",
                   peak_force <= 1.1 * f_limit, f"peak {peak_force:.2f} N"),
            _check("settles pressing the obstacle",
                   wall_x < xf < wall_x + 0.01 and vf < 0.02,
                   f"x {xf * 1e3:.2f} mm, |v| {vf * 1e3:.1f} mm/s"),
            _check("force limit pins high-speed mode",
                   modes == {ControlMode.HIGH_SPEED.value}, f"modes {sorted(modes)}"),
            _no_faults(res),
        ]

    return Scenario(
        name="collision-force-limit",
        description="Run into a stiff obstacle with a 30 N output force "
                    "limit; no downshift allowed, no instability",
        duration=3.0,
        make_task=make_task,
        make_load=make_load,
        check=check,
    )


def _auto_downshift() -> Scenario:
    target = 0.3
    wall_x = 0.25
    wall_k = 6000.0  # N/m: holding the target needs ~300 N, far beyond
                     # high-speed capability but well inside high-force

    def make_task(cfg: ActuatorConfig) -> TaskSpec:
        return TaskSpec(reference=lambda t: target,
                        desired_impedance=ImpedanceLevel.HIGH,
                        impedance=ImpedanceParams(stiffness=2000.0, damping=50.0),
                        mode_policy=ModePolicy.AUTO)

    def make_load(cfg: ActuatorConfig) -> LoadModel:
        fac = _screw_factor(cfg)
        return LoadModel(stiffness=wall_k * fac,
                         wall_angle=cfg.train.to_rotary(wall_x))

    def check(res: RunResult, cfg: ActuatorConfig) -> list[CheckResult]:
        err = abs(res.final().x_out - target)
        downshifts = [(t, a, b) for (t, a, b) in res.transitions
                      if b is ControlMode.SHIFTING_TO_HF]
        contact_t = next((r.t for r in res.records if r.x_out > wall_x),
                         None)
        after_contact = (contact_t is not None and len(downshifts) == 1
                         and downshifts[0][0] > contact_t)
        f_end = _force_est(res.final(), cfg)
        return [
            _check("target reached against the spring", err < 1e-5,
                   f"error {err * 1e6:.2f} um"),
            _check("exactly one downshift, after contact", after_contact,
                   f"contact at {contact_t}, downshifts {[t for t, _, _ in downshifts]}"),
            _check("holding force within actuator envelope", 30.0 < f_end < 600.0,
                   f"{f_end:.1f} N"),
            _check("ends in high-force mode",
                   res.final().mode == ControlMode.HIGH_FORCE.value,
                   res.final().mode),
            _no_faults(res),
        ]

    return Scenario(
        name="auto-downshift-300mm",
        description="Automatic mode selection: sprint in high-speed mode, "
                    "meet a spring at 250 mm, downshift and push to 300 mm",
        duration=6.0,
        make_task=make_task,
        make_load=make_load,
        check=check,
    )


def catalog() -> dict[str, Scenario]:
    """Built-in scenarios, keyed by name."""
    scenarios = [_hf_step(), _hs_step(), _backdrive(), _constant_speed_shift(),
                 _collision(), _auto_downshift()]
    return {s.name: s for s in scenarios}


def run_checks(scenario: Scenario,
               config: Optional[FullConfig] = None
               ) -> tuple[RunResult, list[CheckResult]]:
    res = run_scenario(scenario, config)
    checks = scenario.check(res, (config or default_full_config()).plant) \
        if scenario.check else []
    return res, checks

"""Acceptance suite: twelve end-to-end criteria, one test each.

Each test finishes by printing a single PASS line (visible with -s or on
failure); the pytest -v report provides the per-criterion pass/fail line.
Tolerances are fixed here and must not be loosened to make a run pass.
"""

from __future__ import annotations

import dataclasses
import time

import numpy as np
import pytest

from dsdm import (ControlMode, JunctionGeometry, LoadModel, MassModel,
                  NullspaceProjector, PlantState, derive_dynamics,
                  output_speed, prototype_config, step, torque_split,
                  winding_loss)
from dsdm.control import braking_secondary
from dsdm.dynamics import accel_free
from dsdm.params import PortImpedance
from dsdm.scenarios import catalog, run_checks, run_scenario, trace_to_csv
from dsdm.sizing import crossover_ratio, mass_sweep


def _passed(num: int, detail: str) -> None:
    print(f"ACCEPTANCE {num:02d}: PASS — {detail}")


def _result(catalog_results, name):
    res, checks = catalog_results[name]
    failed = [c for c in checks if not c.passed]
    assert not failed, f"{name}: " + "; ".join(
        f"{c.name} ({c.detail})" for c in failed)
    return res


def test_01_junction_power_conservation():
    """Power through the three junction ports sums to zero."""
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    for _ in range(10_000):
        geom = JunctionGeometry(
            ring_to_sun=float(rng.uniform(0.5, 10.0)),
            ring_reduction=float(rng.uniform(11.0, 200.0)),
        )
        w1, w2 = rng.normal(scale=300.0, size=2)
        tau_o = float(rng.normal(scale=10.0))
        w_o = output_speed(w1, w2, geom)
        t1, t2 = torque_split(tau_o, geom)
        residual = t1 * w1 + t2 * w2 + tau_o * w_o
        scale = max(abs(t1 * w1), abs(t2 * w2), abs(tau_o * w_o), 1e-30)
        assert abs(residual) < 1e-12 * scale
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    _passed(1, f"10k samples, |residual| < 1e-12 relative, {elapsed:.2f} s")


def test_02_nullspace_exactness():
    """Dynamic projector annihilates the output row algebraically; injected
    nullspace drive leaves the simulated output at rest."""
    rng = np.random.default_rng(2)
    base = prototype_config()
    for _ in range(1000):
        cfg = dataclasses.replace(
            base,
            junction=JunctionGeometry(
                ring_to_sun=float(rng.uniform(1.0, 8.0)),
                ring_reduction=float(rng.uniform(9.0, 150.0))),
            port_out=PortImpedance(float(3.5e-6 * rng.uniform(0.2, 5.0)), 0.0),
            port_direct=PortImpedance(float(1.05e-6 * rng.uniform(0.2, 5.0)), 0.0),
            port_geared=PortImpedance(float(1.05e-6 * rng.uniform(0.2, 5.0)), 0.0),
        )
        b = np.array(derive_dynamics(cfg).input_matrix)
        d = np.array(NullspaceProjector.from_config(cfg).dynamic)
        out = b @ d
        assert abs(out[0]) < 1e-12 * abs(b).max() * max(abs(d).max(), 1.0)
        assert out[1] == pytest.approx(1.0, rel=1e-9)

    cfg = dataclasses.replace(
        base, train=dataclasses.replace(base.train, coulomb=0.0))
    proj = NullspaceProjector.from_config(cfg)
    u, state, peak = 5.0, PlantState(), 0.0
    for _ in range(20_000):  # 1 s at 20 kHz
        state = step(state, proj.dynamic[0] * u, proj.dynamic[1] * u,
                     LoadModel(), cfg, 5e-5)
        peak = max(peak, abs(state.w_out))
    assert peak < 1e-9 * abs(state.w_direct)
    _passed(2, f"1k configs algebraic; 1 s injection: |w_out| peak {peak:.2e} "
               f"vs w_direct {state.w_direct:.2f} rad/s")


def test_03_full_model_reduces_to_state_space():
    """With zero input-port damping and no load torques, the coupled model
    equals the closed-form lumped state space to 1e-10 relative."""
    rng = np.random.default_rng(3)
    base = prototype_config()
    worst = 0.0
    for _ in range(1000):
        cfg = dataclasses.replace(
            base,
            port_out=PortImpedance(float(3.5e-6 * rng.uniform(0.2, 5.0)),
                                   float(1e-4 * rng.uniform(0.0, 5.0))),
            port_direct=PortImpedance(float(1.05e-6 * rng.uniform(0.2, 5.0)), 0.0),
            port_geared=PortImpedance(float(1.05e-6 * rng.uniform(0.2, 5.0)), 0.0),
            train=dataclasses.replace(base.train, coulomb=0.0),
        )
        dd = derive_dynamics(cfg)
        b = np.array(dd.input_matrix)
        a = np.array([[-dd.lumped_damping / dd.lumped_inertia, 0.0],
                      [-cfg.r_direct * cfg.port_out.damping / dd.lumped_inertia,
                       0.0]])
        w = rng.normal(scale=50.0, size=2)
        i = rng.uniform(-1.2, 1.2, size=2)
        want = a @ w + b @ i
        got = np.array(accel_free(PlantState(w_out=w[0], w_direct=w[1]),
                                  i[0], i[1], LoadModel(), cfg))
        rel = np.max(np.abs(got - want)) / max(np.max(np.abs(want)), 1.0)
        worst = max(worst, rel)
    assert worst < 1e-10
    _passed(3, f"1k random evaluations, worst relative error {worst:.2e}")


def test_04_winding_loss_ratio_scaling():
    """Copper loss for the same output torque scales exactly with the
    inverse square of the gear ratio; the prototype pair gives 324."""
    cfg = prototype_config()
    rng = np.random.default_rng(4)
    for _ in range(100):
        r = float(rng.uniform(1.0, 100.0))
        lam = float(rng.uniform(1.0, 30.0))
        ratio = (winding_loss(1.0, r, cfg.motor_direct)
                 / winding_loss(1.0, lam * r, cfg.motor_direct))
        assert ratio == pytest.approx(lam**2, rel=1e-12)
    proto = (winding_loss(1.0, cfg.r_direct, cfg.motor_direct)
             / winding_loss(1.0, cfg.r_geared, cfg.motor_geared))
    assert proto == pytest.approx(324.0, rel=1e-12)
    _passed(4, "loss ratio == lambda^2 exactly; prototype 18^2 = 324")


def test_05_high_force_step():
    """200 mm step in high-force mode: sub-micron settling, disturbance
    recovery, simulated faster than 10 s of wall time."""
    start = time.perf_counter()
    res, checks = run_checks(catalog()["hf-step-200mm"])
    elapsed = time.perf_counter() - start
    failed = [c for c in checks if not c.passed]
    assert not failed, "; ".join(f"{c.name} ({c.detail})" for c in failed)
    err = abs(res.final().x_out - 0.2)
    assert err < 1e-6
    assert elapsed < 10.0
    _passed(5, f"final error {err * 1e9:.0f} nm, recovered from 222 N pulse, "
               f"{elapsed:.1f} s wall for 10 s sim")


def test_06_high_speed_step(catalog_results):
    """200 mm step in high-speed mode under pure-stiffness impedance."""
    res = _result(catalog_results, "hs-step-200mm")
    peak_v = max(r.v_out for r in res.records)
    err = abs(res.final().x_out - 0.2)
    assert peak_v >= 0.3
    assert err < 1e-3
    _passed(6, f"peak speed {peak_v:.2f} m/s, final error {err * 1e3:.2f} mm")


def test_07_seamless_constant_speed_shift(catalog_results):
    """Both gear shifts hold the commanded output speed within 5%, and the
    brake only ever engages below the speed threshold."""
    res = _result(catalog_results, "constant-speed-shift")
    v_cmd = 0.02
    dev = max(abs(r.v_out - v_cmd) for r in res.records if 1.5 <= r.t <= 4.5)
    assert dev <= 0.05 * v_cmd
    # the plant faults any engage command at |w_direct| >= 0.5 rad/s, so a
    # fault-free run with locked samples pinned at zero proves the guard
    assert not res.faults
    assert all(r.w_direct == 0.0 for r in res.records if r.brake == "locked")
    assert any(r.brake == "locked" for r in res.records)
    _passed(7, f"max speed deviation {dev / v_cmd * 100:.1f}% across both "
               f"shifts; brake engage guard held")


def test_08_braking_law_decay():
    """Open-loop nullspace braking with C = 50/s: fitted decay rate within
    5% of C, direct shaft below engage speed in < 0.5 s."""
    base = prototype_config()
    cfg = dataclasses.replace(
        base, train=dataclasses.replace(base.train, coulomb=0.0))
    proj = NullspaceProjector.from_config(cfg)
    gain, dt = 50.0, 5e-5
    state = PlantState(w_direct=20.0)
    times, speeds = [], []
    t_done = None
    for _ in range(8000):
        u = braking_secondary(state.w_direct, gain)
        i2 = proj.dynamic[1] * u
        assert abs(i2) < cfg.motor_geared.max_current  # stays linear
        state = step(state, proj.dynamic[0] * u, i2, LoadModel(), cfg, dt)
        times.append(state.t)
        speeds.append(state.w_direct)
        if t_done is None and abs(state.w_direct) < cfg.brake_engage_speed:
            t_done = state.t
    slope = np.polyfit(times[:4000], np.log(speeds[:4000]), 1)[0]
    assert -slope == pytest.approx(gain, rel=0.05)
    assert t_done is not None and t_done < 0.5
    _passed(8, f"fitted rate {-slope:.2f}/s vs commanded 50/s; "
               f"below engage speed at {t_done * 1e3:.0f} ms")


def test_09_automatic_downshift(catalog_results):
    """Sprint, contact a spring holdable only in high-force mode, downshift
    exactly once after contact, and settle on target."""
    res = _result(catalog_results, "auto-downshift-300mm")
    final = res.final()
    assert abs(final.x_out - 0.3) < 1e-5
    assert final.mode == ControlMode.HIGH_FORCE.value
    downshifts = [t for t, a, b in res.transitions
                  if b is ControlMode.SHIFTING_TO_HF]
    contact_t = next(r.t for r in res.records if r.x_out > 0.25)
    assert len(downshifts) == 1 and downshifts[0] > contact_t
    cfg = prototype_config()
    f_hold = cfg.train.torque_to_force(final.tau_out_est)
    assert 30.0 < f_hold < 600.0
    _passed(9, f"one downshift at {downshifts[0]:.2f} s (contact "
               f"{contact_t:.2f} s), holding {f_hold:.0f} N on target")


def test_10_sizing_crossover():
    """Equal-power 10 W point pairs: a mass crossover exists in [1, 10],
    the dual arrangement stays lighter beyond it, and wins at lambda = 5."""
    mm = MassModel()
    lam_star = crossover_ratio(10.0, 10.0, mm)
    assert 1.0 < lam_star < 10.0
    rows = mass_sweep(10.0, 10.0, np.linspace(1.0, 10.0, 37), mm)
    for lam, single, dual in rows:
        if lam >= lam_star + 1e-6:
            assert dual < single, f"lambda={lam}"
        elif lam <= lam_star - 1e-6:
            assert dual >= single, f"lambda={lam}"
    _, single5, dual5 = mass_sweep(10.0, 10.0, [5.0], mm)[0]
    assert dual5 < single5
    _passed(10, f"crossover lambda* = {lam_star:.2f}; at lambda=5 dual "
                f"{dual5:.3f} kg < single {single5:.3f} kg")


def test_11_integrator_order():
    """Step-halving on a smooth benchmark shrinks the error by ~2^4."""
    base = prototype_config()
    cfg = dataclasses.replace(
        base, train=dataclasses.replace(base.train, coulomb=0.0))
    load = LoadModel(stiffness=0.02, damping=1e-4)

    def integrate(n):
        s = PlantState(w_out=10.0, w_direct=-20.0)
        dt = 0.02 / n
        for _ in range(n):
            s = step(s, 0.5, -0.3, load, cfg, dt)
        return np.array([s.w_out, s.w_direct, s.theta_out, s.theta_direct])

    ref = integrate(4096)
    factor = (np.linalg.norm(integrate(64) - ref)
              / np.linalg.norm(integrate(128) - ref))
    assert 12.0 < factor < 20.0
    _passed(11, f"error reduction factor {factor:.1f} per step halving")


def test_12_deterministic_traces(catalog_results):
    """A second full catalog run reproduces every trace byte for byte."""
    for name, scenario in catalog().items():
        first = trace_to_csv(catalog_results[name][0].records)
        second = trace_to_csv(run_scenario(scenario).records)
        assert first == second, f"{name} trace differs between runs"
    _passed(12, f"{len(catalog())} scenarios re-run byte-identical")

import math

import numpy as np
import pytest

from imcflow.ambient import AmbientParams
from imcflow.errors import (FlowBreakdownError, InvalidConfigError,
                            TimestepUnderflowError)
from imcflow.flow import FlowConfig, FlowState, run, speed_field, stable_dt, step
from imcflow.sphere import build_grid
from imcflow.surface import coordinate_sphere, perturbed_sphere

AMB = AmbientParams(3, 1.0)


def test_speed_on_coordinate_sphere():
    g = build_grid("axisym_1d", 3, 64)
    surf = coordinate_sphere(g, AMB, 4.0)
    sp = speed_field(surf)
    expected = 1.0 / (2 * math.sqrt(0.5))
    assert np.max(np.abs(sp - expected)) < 1e-12


def test_speed_flat_sphere():
    amb = AmbientParams(3, 0.0)
    g = build_grid("axisym_1d", 3, 64)
    surf = coordinate_sphere(g, amb, 3.0)
    sp = speed_field(surf)
    assert np.max(np.abs(sp - 0.5)) < 1e-12  # d(phi)/dt = 1/(n-1)


def test_speed_breakdown_on_nonconvex():
    g = build_grid("axisym_1d", 3, 96)
    surf = perturbed_sphere(g, AMB, 4.0, 6, 0.2)  # rippled enough that H < 0 somewhere
    with pytest.raises(FlowBreakdownError):
        speed_field(surf)


def test_stable_dt_matches_formula_on_sphere():
    g = build_grid("axisym_1d", 3, 64)
    surf = coordinate_sphere(g, AMB, 4.0)
    dt = stable_dt(surf, cfl_safety=0.2)
    f_val = math.sqrt(0.5)
    expected = 0.2 * float(np.min(g.delta_sq)) * (2 * f_val) ** 2 / 2.0
    assert dt == pytest.approx(expected, rel=1e-12)


def test_stable_dt_quarters_under_refinement():
    s1 = coordinate_sphere(build_grid("axisym_1d", 3, 64), AMB, 4.0)
    s2 = coordinate_sphere(build_grid("axisym_1d", 3, 128), AMB, 4.0)
    ratio = stable_dt(s1) / stable_dt(s2)
    assert 3.4 < ratio < 4.6


def test_stable_dt_underflow():
    g = build_grid("axisym_1d", 3, 64)
    surf = coordinate_sphere(g, AMB, 4.0)
    with pytest.raises(TimestepUnderflowError):
        stable_dt(surf, dt_min=1.0)


def test_step_preserves_uniformity_and_rejects_bad_dt():
    g = build_grid("axisym_1d", 3, 64)
    surf = coordinate_sphere(g, AMB, 4.0, t_end=1.0)
    state = FlowState(surf)
    dt = stable_dt(surf)
    new = step(state, dt)
    assert new.surface.t == dt
    assert new.step_count == 1
    spread = np.max(new.surface.phi) - np.min(new.surface.phi)
    assert spread < 1e-15
    with pytest.raises(InvalidConfigError):
        step(state, -dt)
    with pytest.raises(InvalidConfigError):
        step(state, 0.0)


def test_coordinate_sphere_exact_solution():
    g = build_grid("axisym_1d", 3, 64)
    surf = coordinate_sphere(g, AMB, 4.0, t_end=2.0)
    trace = run(surf, FlowConfig(t_end=2.0, snapshot_interval=0.25))
    assert not trace.failed
    for rec in trace.records:
        s_exact = 4.0 * math.exp(rec.t / 2.0)
        grow = math.exp(rec.t / 2.0)
        assert abs(rec.lambda_tilde_min * grow - s_exact) / s_exact < 1e-6
        assert abs(rec.lambda_tilde_max * grow - s_exact) / s_exact < 1e-6
    assert trace.events == []


def test_rk2_order_by_fixed_dt_halving():
    g = build_grid("axisym_1d", 3, 32)
    errs = []
    for dt in (2e-3, 1e-3):
        surf = coordinate_sphere(g, AMB, 4.0, t_end=1.0)
        trace = run(surf, FlowConfig(t_end=1.0, snapshot_interval=1.0,
                                     fixed_dt=dt))
        s_end = trace.records[-1].lambda_tilde_max * math.exp(0.5)
        errs.append(abs(s_end - 4.0 * math.exp(0.5)))
    order = math.log2(errs[0] / errs[1])
    assert order > 1.8, (errs, order)


def test_symmetry_preserved_along_flow():
    g = build_grid("axisym_1d", 3, 64)
    surf = perturbed_sphere(g, AMB, 4.0, 2, 0.1, t_end=0.5)  # even mode
    trace = run(surf, FlowConfig(t_end=0.5, snapshot_interval=0.5,
                                 store_surfaces=True))
    final = trace.surfaces[-1]
    asym = np.max(np.abs(final.phi - final.phi[::-1]))
    assert asym < 1e-12


def test_monotone_expansion_and_sandwich():
    g = build_grid("axisym_1d", 3, 96)
    surf = perturbed_sphere(g, AMB, 4.0, 2, 0.1, t_end=1.5)
    trace = run(surf, FlowConfig(t_end=1.5, snapshot_interval=0.25))
    assert not trace.failed
    smin = trace.column("lambda_tilde_min") * np.exp(trace.t / 2)
    assert np.all(np.diff(smin) > 0)
    assert not any(e[1] == "sandwich-violation" for e in trace.events)
    assert not any(e[1] == "chi-bound-violation" for e in trace.events)
    # support-function lower bound with explicit margin
    chi = trace.column("chi_min")
    bound = trace.meta["chi_min0"] * np.exp(trace.t / 2)
    assert np.all(chi >= bound * (1 - 1e-6))


def test_breakdown_produces_failed_partial_trace():
    g = build_grid("axisym_1d", 3, 64)
    surf = perturbed_sphere(g, AMB, 4.0, 2, 0.1, t_end=1.0)
    trace = run(surf, FlowConfig(t_end=1.0, f_min=10.0))  # impossible threshold
    assert trace.failed
    assert "FlowBreakdownError" in trace.failure_reason
    assert any(e[1] == "breakdown" for e in trace.events)


def test_dt_underflow_produces_failed_trace():
    g = build_grid("axisym_1d", 3, 64)
    surf = perturbed_sphere(g, AMB, 4.0, 2, 0.1, t_end=1.0)
    trace = run(surf, FlowConfig(t_end=1.0, dt_min=1.0))
    assert trace.failed
    assert "TimestepUnderflowError" in trace.failure_reason


def test_run_rejects_nonconvex_initial():
    g = build_grid("axisym_1d", 3, 96)
    surf = perturbed_sphere(g, AMB, 4.0, 6, 0.2)
    with pytest.raises(FlowBreakdownError):
        run(surf, FlowConfig(t_end=1.0))


def test_map_autoextension():
    # a deliberately tight map gets widened before stepping
    from imcflow.ambient import build_phi_map

    g = build_grid("axisym_1d", 3, 32)
    pm = build_phi_map(AMB, 3.0, 5.0)
    surf = coordinate_sphere(g, AMB, 4.0, phimap=pm)
    trace = run(surf, FlowConfig(t_end=1.0, snapshot_interval=0.5))
    assert not trace.failed
    assert trace.records[-1].lambda_tilde_max * math.exp(0.5) > 5.0


def test_latlong_flow_short():
    g = build_grid("latlong_2d", 3, 24, 48)
    surf = perturbed_sphere(g, AMB, 4.0, 2, 0.1, t_end=0.2)
    trace = run(surf, FlowConfig(t_end=0.2, snapshot_interval=0.1))
    assert not trace.failed
    assert trace.meta["backend"] == "numpy"
    # zonal data: matches the axisym run of the same scenario
    g1 = build_grid("axisym_1d", 3, 24)
    tr1 = run(perturbed_sphere(g1, AMB, 4.0, 2, 0.1, t_end=0.2),
              FlowConfig(t_end=0.2, snapshot_interval=0.1))
    assert trace.records[-1].area == pytest.approx(tr1.records[-1].area,
                                                   rel=1e-6)


def test_config_validation():
    with pytest.raises(InvalidConfigError):
        FlowConfig(t_end=-1.0)
    with pytest.raises(InvalidConfigError):
        FlowConfig(t_end=1.0, cfl_safety=1.5)
    with pytest.raises(InvalidConfigError):
        FlowConfig(t_end=1.0, fixed_dt=-0.1)


def test_higher_dimensions_end_to_end():
    # the functional stays pinned to its dimension-dependent floor on round
    # data and decreases monotonically on perturbed data, for n = 4 and 5
    from imcflow.monitor import monotonicity_verdict, q_floor

    for n, m in ((4, 1.0), (5, 2.0)):
        amb = AmbientParams(n, m)
        g = build_grid("axisym_1d", n, 48)
        base = amb.s0 * 2
        tr = run(coordinate_sphere(g, amb, base, t_end=1.0),
                 FlowConfig(t_end=1.0, snapshot_interval=0.25))
        assert not tr.failed
        q = tr.column("Q")
        assert np.max(np.abs(q - q_floor(n))) < 1e-12
        s_end = tr.records[-1].lambda_tilde_max * math.exp(1.0 / (n - 1))
        assert abs(s_end - base * math.exp(1.0 / (n - 1))) / s_end < 1e-6
        trp = run(perturbed_sphere(g, amb, base, 2, 0.08, t_end=1.5),
                  FlowConfig(t_end=1.5, snapshot_interval=0.25))
        assert not trp.failed
        assert monotonicity_verdict(trp)["pass"]
        assert trp.records[0].Q > trp.records[-1].Q > q_floor(n) - 1e-9

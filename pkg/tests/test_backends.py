import numpy as np
import pytest

from imcflow._backend import BACKEND_NAME, get_backend
from imcflow.ambient import AmbientParams
from imcflow.flow import FlowConfig, _AxisymKernel, run, speed_field
from imcflow.sphere import build_grid
from imcflow.surface import coordinate_sphere, perturbed_sphere

AMB = AmbientParams(3, 1.0)

try:
    get_backend("compiled")
    HAS_COMPILED = True
except ImportError:
    HAS_COMPILED = False

needs_compiled = pytest.mark.skipif(not HAS_COMPILED,
                                    reason="compiled kernel not built")


def test_selected_backend_is_reported():
    assert BACKEND_NAME in ("compiled", "numpy")


@needs_compiled
def test_rhs_parity_random_surfaces():
    rng = np.random.default_rng(17)
    g = build_grid("axisym_1d", 3, 160)
    from imcflow.cli import random_admissible_surface

    for _ in range(10):
        surf = random_admissible_surface(g, AMB, rng)
        kn = _AxisymKernel(surf, get_backend("numpy"))
        kc = _AxisymKernel(surf, get_backend("compiled"))
        out_n = np.empty(160)
        out_c = np.empty(160)
        fn, cn, vn = kn.rhs(surf.phi, out_n)
        fc, cc, vc = kc.rhs(surf.phi, out_c)
        assert vn == vc == 0
        assert fn == pytest.approx(fc, rel=1e-13)
        assert cn == pytest.approx(cc, rel=1e-13)
        assert np.max(np.abs(out_n - out_c)) < 1e-13 * np.max(np.abs(out_n))


@needs_compiled
def test_flow_parity_between_backends():
    g = build_grid("axisym_1d", 3, 48)
    surf = perturbed_sphere(g, AMB, 4.0, 2, 0.1, t_end=0.5)
    tr_n = run(surf, FlowConfig(t_end=0.5, snapshot_interval=0.25),
               backend=get_backend("numpy"))
    tr_c = run(surf, FlowConfig(t_end=0.5, snapshot_interval=0.25),
               backend=get_backend("compiled"))
    assert tr_n.meta["steps"] == tr_c.meta["steps"]
    for a, b in zip(tr_n.records, tr_c.records):
        assert a.Q == pytest.approx(b.Q, rel=1e-12)
        assert a.area == pytest.approx(b.area, rel=1e-12)


@needs_compiled
def test_out_may_alias_input():
    # the run loop reuses the midpoint buffer as the stage-2 output
    g = build_grid("axisym_1d", 3, 64)
    surf = perturbed_sphere(g, AMB, 4.0, 2, 0.1)
    for name in ("numpy", "compiled"):
        kern = _AxisymKernel(surf, get_backend(name))
        phi = surf.phi.copy()
        out_sep = np.empty(64)
        kern.rhs(phi, out_sep)
        aliased = phi.copy()
        kern.rhs(aliased, aliased)
        assert np.array_equal(aliased, out_sep), name


def test_speed_field_same_under_forced_backend():
    g = build_grid("axisym_1d", 3, 48)
    surf = coordinate_sphere(g, AMB, 4.0)
    sp_default = speed_field(surf)
    sp_numpy = speed_field(surf, backend=get_backend("numpy"))
    assert np.max(np.abs(sp_default - sp_numpy)) < 1e-13


def test_bench_module_runs():
    from imcflow import bench

    assert bench.main(["--sizes", "32", "--reps", "5"]) == 0

import math

import numpy as np
import pytest
from scipy.special import eval_legendre

from imcflow.ambient import AmbientParams, unit_sphere_area
from imcflow.errors import HorizonViolationError, InvalidConfigError
from imcflow.sphere import build_grid, covariant_hessian, gradient_sq
from imcflow.surface import (area, coordinate_sphere, geometry_fields,
                             perturbed_sphere, star_shape_margin,
                             surface_from_s_values, umbilicity_deviation)

AMB = AmbientParams(3, 1.0)


def test_coordinate_sphere_geometry():
    g = build_grid("axisym_1d", 3, 64)
    surf = coordinate_sphere(g, AMB, 4.0)
    f = geometry_fields(surf)
    h_exact = 2 * math.sqrt(0.5) / 4.0
    assert np.max(np.abs(f.H - h_exact)) < 1e-12
    assert np.max(np.abs(f.kappa[0] - h_exact / 2)) < 1e-12
    assert np.max(np.abs(f.kappa[1] - h_exact / 2)) < 1e-12
    assert np.all(f.v == 1.0)
    assert np.max(np.abs(f.support - 4.0)) < 1e-10
    assert f.mean_convex


def test_coordinate_sphere_H_vanishes_toward_horizon():
    from imcflow.ambient import build_phi_map, lapse

    g = build_grid("axisym_1d", 3, 32)
    values = []
    for s in (3.0, 2.5, 2.1, 2.01):
        # near the horizon the map integrand steepens; a relaxed table
        # tolerance keeps the build cheap and is ample for this check
        pm = build_phi_map(AMB, AMB.s0 + 0.4 * (s - AMB.s0), s * 1.5, tol=1e-8)
        f = geometry_fields(coordinate_sphere(g, AMB, s, phimap=pm))
        h = float(np.max(f.H))
        assert h == pytest.approx(2 * lapse(AMB, s) / s, rel=1e-6)
        values.append(h)
    assert values == sorted(values, reverse=True)
    assert values[-1] < 0.1  # H -> 0 at the horizon


def test_area_examples():
    g = build_grid("axisym_1d", 3, 64)
    surf = coordinate_sphere(g, AMB, 4.0)
    assert area(surf) == pytest.approx(64 * math.pi, rel=1e-12)
    assert area(surf) > 0


def test_flat_round_sphere_classical_values():
    for n, N in ((3, 64), (4, 48)):
        amb = AmbientParams(n, 0.0)
        g = build_grid("axisym_1d", n, N)
        rho = 1.7
        surf = coordinate_sphere(g, amb, rho)
        f = geometry_fields(surf)
        assert np.max(np.abs(f.H - (n - 1) / rho)) < 1e-11
        assert np.max(np.abs(f.second_form_sq - (n - 1) / rho**2)) < 1e-11
        assert np.all(f.v == 1.0)
        assert np.max(np.abs(f.support - rho)) < 1e-11
        assert area(surf) == pytest.approx(rho ** (n - 1) * unit_sphere_area(n),
                                           rel=1e-11)


def test_star_shape_margin():
    g = build_grid("axisym_1d", 3, 64)
    surf = coordinate_sphere(g, AMB, 4.0)
    assert star_shape_margin(surf) == pytest.approx(4.0, abs=1e-10)
    pert = perturbed_sphere(g, AMB, 4.0, 2, 0.05)
    gsq = gradient_sq(g, pert.phi)
    lower = np.min(pert.s) / math.sqrt(1.0 + np.max(gsq))
    assert star_shape_margin(pert) >= lower - 1e-12


def test_umbilicity_sphere_zero():
    g = build_grid("axisym_1d", 3, 64)
    f = geometry_fields(coordinate_sphere(g, AMB, 4.0))
    assert umbilicity_deviation(f) < 1e-14
    assert umbilicity_deviation(f) >= 0.0


def test_umbilicity_flat_perturbed_value():
    # s = 1 + 0.1 P2(cos theta) in the flat background; at theta = pi/2 the
    # principal curvatures work out by hand (r' = 0, r'' = 0.3, r = 0.95):
    # kappa_polar = (1 - r''/r)/r, kappa_tan = 1/r, deviation (k1-k2)^2/2.
    amb = AmbientParams(3, 0.0)
    g = build_grid("axisym_1d", 3, 129)  # odd N puts a node at theta = pi/2
    x = np.cos(g.theta)
    surf = surface_from_s_values(g, amb, 1.0 + 0.1 * eval_legendre(2, x))
    f = geometry_fields(surf)
    mid = np.argmin(np.abs(g.theta - math.pi / 2))
    assert abs(g.theta[mid] - math.pi / 2) < 1e-12
    kdiff = 0.3 / 0.95**2
    expected = kdiff**2 / 2
    pointwise = f.second_form_sq - f.H**2 / 2
    assert pointwise[mid] == pytest.approx(expected, abs=2e-5)
    assert umbilicity_deviation(f) > 0.0
    assert np.min(pointwise) > -1e-13  # Cauchy-Schwarz pointwise


def test_trace_consistency_with_divergence_form():
    # sum of principal curvatures == ((n-1) f - sigma~ hess) / (v s) to rounding
    rng = np.random.default_rng(8)
    for n in (3, 4, 5):
        amb = AmbientParams(n, 0.8)
        g = build_grid("axisym_1d", n, 96)
        x = np.cos(g.theta)
        bump = sum(c * eval_legendre(l, x) / l**2
                   for l, c in enumerate(0.1 * rng.standard_normal(4), start=1))
        surf = perturbed_sphere(g, amb, 4.0, 2, 0.0)
        phi = surf.phi + bump
        surf = surf.with_phi(phi, 0.0)
        fl = geometry_fields(surf)
        hess = covariant_hessian(g, phi)
        gsq = gradient_sq(g, phi)
        vsq = 1.0 + gsq
        sig = hess.polar + (n - 2) * hess.tangential - gsq * hess.polar / vsq
        h_direct = ((n - 1) * fl.lapse - sig) / (np.sqrt(vsq) * fl.s)
        assert np.max(np.abs(fl.H - h_direct)) < 1e-12 * np.max(np.abs(fl.H))


def test_latlong_matches_axisym_for_zonal_data():
    g1 = build_grid("axisym_1d", 3, 48)
    g2 = build_grid("latlong_2d", 3, 48, 96)
    s1 = perturbed_sphere(g1, AMB, 4.0, 2, 0.1)
    s2 = perturbed_sphere(g2, AMB, 4.0, 2, 0.1)
    f1 = geometry_fields(s1)
    f2 = geometry_fields(s2)
    assert np.max(np.abs(f2.H - f1.H[:, None])) < 1e-11
    assert np.max(np.abs(f2.second_form_sq - f1.second_form_sq[:, None])) < 1e-11
    assert abs(area(s2) - area(s1)) < 1e-9
    assert umbilicity_deviation(f2) == pytest.approx(umbilicity_deviation(f1),
                                                     rel=1e-8, abs=1e-12)


def test_reflection_invariance_flat():
    amb = AmbientParams(3, 0.0)
    g = build_grid("axisym_1d", 3, 64)
    x = np.cos(g.theta)
    surf = perturbed_sphere(g, amb, 2.0, 3, 0.08)
    f = geometry_fields(surf)
    refl = surf.with_phi(surf.phi[::-1], 0.0)
    fr = geometry_fields(refl)
    assert np.max(np.abs(fr.H - f.H[::-1])) < 1e-11
    assert np.max(np.abs(fr.second_form_sq - f.second_form_sq[::-1])) < 1e-11
    assert np.max(np.abs(fr.support - f.support[::-1])) < 1e-11


def test_horizon_violation():
    g = build_grid("axisym_1d", 3, 32)
    with pytest.raises(HorizonViolationError):
        surface_from_s_values(g, AMB, np.full(32, 1.5))
    with pytest.raises(HorizonViolationError):
        # mixed: one node dips inside
        vals = np.full(32, 4.0)
        vals[5] = 1.9
        surface_from_s_values(g, AMB, vals)


def test_shape_mismatch_rejected():
    g = build_grid("axisym_1d", 3, 32)
    with pytest.raises(InvalidConfigError):
        perturbed_sphere(g, AMB, 4.0, 2, 0.1, target="r")
    surf = coordinate_sphere(g, AMB, 4.0)
    with pytest.raises(InvalidConfigError):
        surf.with_phi(np.zeros(16), 0.0)


def test_large_gradient_is_legal():
    # steep but admissible graphs evaluate fine; only H <= 0 stops a flow
    amb = AmbientParams(3, 0.0)
    g = build_grid("axisym_1d", 3, 96)
    surf = perturbed_sphere(g, amb, 2.0, 1, 1.5)
    f = geometry_fields(surf)
    assert np.all(np.isfinite(f.H))
    assert np.max(f.v) > 1.5

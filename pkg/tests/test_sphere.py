import math

import numpy as np
import pytest
from scipy.special import eval_legendre

from imcflow.errors import InvalidConfigError
from imcflow.sphere import (build_grid, covariant_hessian, gradient_sq,
                            integrate, laplace_beltrami)


def test_weight_normalization():
    assert build_grid("axisym_1d", 3, 64).total_weight == pytest.approx(
        4 * math.pi, rel=1e-13)
    assert build_grid("axisym_1d", 4, 64).total_weight == pytest.approx(
        2 * math.pi**2, rel=1e-13)
    assert build_grid("axisym_1d", 5, 48).total_weight == pytest.approx(
        8 * math.pi**2 / 3, rel=1e-13)
    assert build_grid("latlong_2d", 3, 24, 48).total_weight == pytest.approx(
        4 * math.pi, rel=1e-13)


def test_invalid_configs():
    with pytest.raises(InvalidConfigError):
        build_grid("latlong_2d", 5, 64, 64)
    with pytest.raises(InvalidConfigError):
        build_grid("axisym_1d", 3, 8)
    with pytest.raises(InvalidConfigError):
        build_grid("axisym_1d", 2, 64)
    with pytest.raises(InvalidConfigError):
        build_grid("axisym_1d", 3, 64, stencil_order=3)
    with pytest.raises(InvalidConfigError):
        build_grid("latlong_2d", 3, 24, 25)  # odd azimuth breaks pole closure


def test_nodes_interior():
    g = build_grid("axisym_1d", 3, 64)
    assert np.all((g.theta > 0) & (g.theta < math.pi))


def test_integrate_examples():
    g = build_grid("axisym_1d", 3, 64)
    x = np.cos(g.theta)
    assert integrate(g, np.ones(64)) == pytest.approx(4 * math.pi, rel=1e-13)
    assert abs(integrate(g, x)) < 1e-13
    assert integrate(g, x**2) == pytest.approx(4 * math.pi / 3, rel=1e-12)


def test_gauss_exactness_in_measure():
    # moments of cos(theta) against the sin^{n-2} measure: a 32-node rule is
    # exact through degree 63, so it must match a 200-node reference rule
    for n in (3, 4, 5):
        g = build_grid("axisym_1d", n, 32)
        ref = build_grid("axisym_1d", n, 200)
        for k in (0, 1, 2, 5, 12, 33, 63):
            val = integrate(g, np.cos(g.theta) ** k)
            exact = integrate(ref, np.cos(ref.theta) ** k)
            assert val == pytest.approx(exact, abs=1e-12 * g.total_weight)
    # closed-form spot checks for n = 3 (plain Gauss-Legendre)
    g3 = build_grid("axisym_1d", 3, 32)
    x = np.cos(g3.theta)
    assert integrate(g3, x**12) == pytest.approx(4 * math.pi / 13, rel=1e-13)


def test_derivatives_annihilate_constants_exactly():
    for mode, shape in (("axisym_1d", (64,)), ("latlong_2d", (24, 48))):
        g = build_grid(mode, 3, shape[0], *shape[1:])
        c = np.full(g.field_shape, -2.87)
        assert np.all(g.dtheta(c, 1) == 0.0)
        assert np.all(g.dtheta(c, 2) == 0.0)
        h = covariant_hessian(g, c)
        assert np.all(h.polar == 0.0)
        assert np.all(h.tangential == 0.0)
        assert np.all(gradient_sq(g, c) == 0.0)


def test_legendre_eigenvalues_n3():
    # truncation grows like l^6 h^4; calibrated bounds with ~4x headroom
    g = build_grid("axisym_1d", 3, 96)
    x = np.cos(g.theta)
    bounds = {1: 2e-7, 2: 1e-5, 3: 1e-4, 4: 5e-4, 5: 1.5e-3, 6: 4e-3}
    for l, bound in bounds.items():
        f = eval_legendre(l, x)
        err = np.max(np.abs(laplace_beltrami(g, f) + l * (l + 1) * f))
        assert err < bound, (l, err)


def test_gradient_sq_example():
    g = build_grid("axisym_1d", 3, 96)
    x = np.cos(g.theta)
    assert np.max(np.abs(gradient_sq(g, x) - np.sin(g.theta) ** 2)) < 1e-6
    # linearity of D in the amplitude
    eps = 1e-3
    f = eps * eval_legendre(2, x)
    assert np.max(gradient_sq(g, f)) < 10 * eps**2


def test_richardson_slope_of_derivative_error():
    # observed order of the Laplacian on P_6 under refinement, 4th-order stencils
    errs = []
    for N in (32, 64, 128):
        g = build_grid("axisym_1d", 3, N)
        x = np.cos(g.theta)
        f = eval_legendre(6, x)
        errs.append(np.max(np.abs(laplace_beltrami(g, f) + 42 * f)))
    slopes = [math.log2(errs[0] / errs[1]), math.log2(errs[1] / errs[2])]
    assert min(slopes) >= 3.5, (errs, slopes)


def test_stencil_order_configurable():
    errs = {}
    for order in (2, 4, 6):
        g = build_grid("axisym_1d", 3, 64, stencil_order=order)
        x = np.cos(g.theta)
        f = eval_legendre(4, x)
        errs[order] = np.max(np.abs(laplace_beltrami(g, f) + 20 * f))
    assert errs[2] > errs[4] > errs[6]


def test_divergence_theorem():
    rng = np.random.default_rng(11)
    residuals = {}
    for N in (64, 128):
        g = build_grid("axisym_1d", 3, N)
        x = np.cos(g.theta)
        f = sum(c * eval_legendre(l, x)
                for l, c in enumerate(rng.standard_normal(6), start=1))
        residuals[N] = abs(integrate(g, laplace_beltrami(g, f))) / np.max(np.abs(f))
        rng = np.random.default_rng(11)  # same field on both grids
    assert residuals[128] < 1e-4
    assert residuals[64] / residuals[128] > 8  # vanishes at stencil order


def test_latlong_harmonic_eigenvalue():
    g = build_grid("latlong_2d", 3, 48, 96)
    th = g.theta[:, None]
    ps = g.psi[None, :]
    f = np.sin(th) * np.cos(ps)  # degree-1 harmonic through the poles
    err = np.max(np.abs(laplace_beltrami(g, f) + 2 * f))
    assert err < 1e-5
    gsq = gradient_sq(g, f)
    exact = np.cos(th) ** 2 * np.cos(ps) ** 2 + np.sin(ps) ** 2
    assert np.max(np.abs(gsq - exact)) < 1e-5


def test_latlong_full_hessian_p2():
    g = build_grid("latlong_2d", 3, 48, 96)
    th = g.theta[:, None]
    f = np.broadcast_to(eval_legendre(2, np.cos(g.theta))[:, None],
                        g.field_shape).copy()
    h = covariant_hessian(g, f)
    lap = h.polar + h.tangential / np.sin(th) ** 2
    assert np.max(np.abs(lap + 6 * f)) < 2e-4
    assert np.max(np.abs(h.mixed)) < 1e-7  # zonal field has no mixed part


def test_reflection_symmetry():
    g = build_grid("axisym_1d", 3, 64)
    rng = np.random.default_rng(3)
    x = np.cos(g.theta)
    f = sum(c * eval_legendre(l, x)
            for l, c in enumerate(rng.standard_normal(4), start=1))
    fr = f[::-1]
    assert np.max(np.abs(g.dtheta(fr, 1) + g.dtheta(f, 1)[::-1])) < 1e-11
    assert np.max(np.abs(g.dtheta(fr, 2) - g.dtheta(f, 2)[::-1])) < 1e-9

"""Independent second routes for the formula-derived quantities.

Every headline quantity has a definitional cross-check here:

* mean curvature by embedding the graph in the geodesic chart (r, theta) and
  assembling the second fundamental form from ambient Christoffel symbols,
  against the closed graph formulas;
* the same in the "radius form" that differentiates r instead of phi;
* time-evolution identities for H and for the support function, checked as
  residuals between centered time differences of stored snapshots and the
  parabolic right-hand sides (including the tangential drift that converts
  the surface-following derivative into the fixed-angle derivative);
* Richardson order estimation for refinement studies.

Oracles run at snapshot cadence only; they are far more expensive than a
flow step and share no algebra with the production route beyond the raw
finite-difference stencils.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .ambient import AmbientParams, CumulativeRadialTable, ricci
from .errors import DegenerateRefinementError, InsufficientDataError
from .monitor import FlowTrace
from .sphere import GridMode, covariant_hessian
from .surface import GraphSurface, geometry_fields

__all__ = [
    "EmbeddingChart",
    "build_embedding_chart",
    "fd_mean_curvature",
    "mean_curvature_r_form",
    "evolution_residual_H",
    "evolution_residual_chi",
    "richardson_order",
]


def _chart_weight(params: AmbientParams, s):
    # dr/ds = 1/f in the geodesic gauge
    return 1.0 / np.sqrt(1.0 - 2.0 * params.m * s ** float(2 - params.n))


class ChartChristoffels(NamedTuple):
    """Nonzero ambient Christoffels of dr^2 + l(r)^2 sigma in the (r, theta) chart.

    Gamma^r_{ij} = radial_sphere * sigma_ij and Gamma^i_{rj} = mixed * delta^i_j;
    the intra-sphere symbols are those of the round metric itself.
    """

    radial_sphere: np.ndarray   # -l * l'
    mixed: np.ndarray           # l'/l


class EmbeddingChart(CumulativeRadialTable):
    """Geodesic radial coordinate r(s) = integral of ds/f, with inverse."""

    weight = staticmethod(_chart_weight)
    value_name = "geodesic radius"

    def r_of_s(self, s):
        return self.forward(s)

    def s_of_r(self, r):
        return self.inverse(r)

    def christoffels(self, s) -> ChartChristoffels:
        s = np.asarray(s, dtype=float)
        lapse = np.sqrt(1.0 - 2.0 * self.params.m
                        * s ** float(2 - self.params.n))
        return ChartChristoffels(radial_sphere=-s * lapse, mixed=lapse / s)


def build_embedding_chart(params: AmbientParams, s_min: float, s_max: float,
                          tol: float = 1e-12) -> EmbeddingChart:
    return EmbeddingChart.build(params, s_min, s_max, tol=tol)


def _chart_for(surface: GraphSurface, chart: EmbeddingChart | None):
    if chart is not None:
        return chart
    s = surface.s
    lo = float(np.min(s))
    hi = float(np.max(s))
    s0 = surface.ambient.s0
    return build_embedding_chart(
        surface.ambient, s0 + 0.5 * (lo - s0), hi * 1.01
    )


def fd_mean_curvature(surface: GraphSurface,
                      chart: EmbeddingChart | None = None) -> np.ndarray:
    """Mean curvature by the definitional embedding route.

    Differentiates the geodesic radius r(theta) of the graph, builds the unit
    normal from the ambient metric, assembles the second fundamental form
    h_ij = -<nabla_{T_i} T_j, nu> from the chart Christoffels, and traces with
    the induced metric. Shares only the raw stencils with the graph formulas.
    """
    grid = surface.grid
    n = surface.ambient.n
    chart = _chart_for(surface, chart)
    lam = surface.s
    lamp = np.sqrt(1.0 - 2.0 * surface.ambient.m
                   * lam ** float(2 - n))
    r = np.asarray(chart.r_of_s(lam))

    if grid.mode is GridMode.AXISYM_1D:
        rt = grid.dtheta(r, 1)
        rtt = grid.dtheta(r, 2)
        v = np.sqrt(1.0 + (rt / lam) ** 2)
        h_tt = (lam * lamp - rtt + 2.0 * lamp * rt**2 / lam) / v
        g_tt = rt**2 + lam**2
        sin_t = grid.sin_theta
        cos_t = np.cos(grid.theta)
        h_pp = (lam * lamp * sin_t**2 - sin_t * cos_t * rt) / v  # per unit S^{n-2}
        g_pp = lam**2 * sin_t**2
        return h_tt / g_tt + (n - 2) * h_pp / g_pp

    rt = grid.dtheta(r, 1)
    rp = grid.dpsi_deriv(r, 1)
    rtt = grid.dtheta(r, 2)
    rtp = grid.dpsi_deriv(grid.dtheta(r, 1), 1)
    rpp = grid.dpsi_deriv(r, 2)
    sin_t = grid.sin_theta[:, None]
    cos_t = np.cos(grid.theta)[:, None]
    cot = grid.cot_theta[:, None]
    # covariant sphere Hessian of r from the partials and round Christoffels
    cov_tt = rtt
    cov_tp = rtp - cot * rp
    cov_pp = rpp + sin_t * cos_t * rt
    v = np.sqrt(1.0 + (rt**2 + rp**2 / sin_t**2) / lam**2)
    h_tt = (lam * lamp + 2.0 * lamp * rt**2 / lam - cov_tt) / v
    h_tp = (2.0 * lamp * rt * rp / lam - cov_tp) / v
    h_pp = (lam * lamp * sin_t**2 + 2.0 * lamp * rp**2 / lam - cov_pp) / v
    g_tt = rt**2 + lam**2
    g_tp = rt * rp
    g_pp = rp**2 + lam**2 * sin_t**2
    det = g_tt * g_pp - g_tp**2
    return (g_pp * h_tt - 2.0 * g_tp * h_tp + g_tt * h_pp) / det


def mean_curvature_r_form(surface: GraphSurface,
                          chart: EmbeddingChart | None = None) -> np.ndarray:
    """Mean curvature from the radius-variable divergence form.

    H = (n-1) f/(v l) - sigma~^{ij} (r_;ij - f r_i r_j / l) / (v l^2), with the
    slope factor recomputed from r. A distinct nonlinear combination from the
    phi form; agrees with it to stencil order.
    """
    grid = surface.grid
    n = surface.ambient.n
    chart = _chart_for(surface, chart)
    lam = surface.s
    lamp = np.sqrt(1.0 - 2.0 * surface.ambient.m * lam ** float(2 - n))
    r = np.asarray(chart.r_of_s(lam))
    hess = covariant_hessian(grid, r)

    if grid.mode is GridMode.AXISYM_1D:
        rt = grid.dtheta(r, 1)
        vsq = 1.0 + (rt / lam) ** 2
        v = np.sqrt(vsq)
        x_tt = hess.polar - lamp * rt**2 / lam
        x_tan = hess.tangential  # cot * r'; tangential r_i vanish
        contraction = x_tt / vsq + (n - 2) * x_tan
        return (n - 1) * lamp / (v * lam) - contraction / (v * lam**2)

    rt = grid.dtheta(r, 1)
    rp = grid.dpsi_deriv(r, 1)
    sin2 = grid.sin_theta[:, None] ** 2
    vsq = 1.0 + (rt**2 + rp**2 / sin2) / lam**2
    v = np.sqrt(vsq)
    x_tt = hess.polar - lamp * rt * rt / lam
    x_tp = hess.mixed - lamp * rt * rp / lam
    x_pp = hess.tangential - lamp * rp * rp / lam
    # sigma~^{ij} = sigma^{ij} - r^i r^j / (l^2 v^2)
    ur_t = rt
    ur_p = rp / sin2
    trace = x_tt + x_pp / sin2
    quad = ur_t**2 * x_tt + 2.0 * ur_t * ur_p * x_tp + ur_p**2 * x_pp
    contraction = trace - quad / (lam**2 * vsq)
    return (n - 1) * lamp / (v * lam) - contraction / (v * lam**2)


# ---------------------------------------------------------------------------
# Evolution-identity residuals on stored snapshots
# ---------------------------------------------------------------------------

def _axisym_snapshots(trace: FlowTrace, t: float, delta: float):
    if delta <= 0:
        raise InsufficientDataError(f"delta must be positive, got {delta}")
    sm = trace.surface_at(t - delta)
    s0 = trace.surface_at(t)
    sp = trace.surface_at(t + delta)
    if s0.grid.mode is not GridMode.AXISYM_1D:
        raise InsufficientDataError(
            "evolution residuals are defined for axisymmetric flows"
        )
    return sm, s0, sp


def _induced_laplacian(grid, lam, v, u):
    """Laplace-Beltrami of an axisymmetric scalar u on the surface metric
    a^2 dtheta^2 + b^2 g_{S^{n-2}}, a = l v, b = l sin(theta).

    Only smooth axisym scalars (even across the poles) may be stencil
    differentiated, so the odd factor sin(theta) inside b is handled
    analytically: b'/b = l'/l + cot(theta).
    """
    a = lam * v
    du = grid.dtheta(u, 1)
    d2u = grid.dtheta(u, 2)
    da = grid.dtheta(a, 1)
    dlam = grid.dtheta(lam, 1)
    db_over_b = dlam / lam + grid.cot_theta
    n = grid.n
    return d2u / a**2 + du * ((n - 2) * db_over_b / a**2 - da / a**3)


def evolution_residual_H(trace: FlowTrace, t: float, delta: float) -> float:
    """Relative L-inf residual of the mean-curvature evolution identity.

    Compares the centered fixed-angle time difference of H against
    Lap H / H^2 - 2 |grad H|^2 / H^3 - |A|^2 / H - Ric(nu,nu)/H plus the
    fixed-angle drift term; vanishes as O(delta^2) + O(h^p).
    """
    sm, s0, sp = _axisym_snapshots(trace, t, delta)
    grid = s0.grid
    g0 = geometry_fields(s0)
    H0 = g0.H
    dHdt = (geometry_fields(sp).H - geometry_fields(sm).H) / (2.0 * delta)

    lam, v = g0.s, g0.v
    lap_H = _induced_laplacian(grid, lam, v, H0)
    dH = grid.dtheta(H0, 1)
    grad_H_sq = (dH / (lam * v)) ** 2
    a_r, b_r = ricci(s0.ambient, lam)
    ric_nn = a_r + b_r / v**2
    dphi = grid.dtheta(s0.phi, 1)
    drift = dphi * dH / (lam * H0 * v)
    rhs = (lap_H / H0**2 - 2.0 * grad_H_sq / H0**3 - g0.second_form_sq / H0
           - ric_nn / H0 + drift)
    scale = float(np.max(np.abs(rhs)))
    return float(np.max(np.abs(dHdt - rhs))) / scale


def evolution_residual_chi(trace: FlowTrace, t: float, delta: float) -> float:
    """Relative L-inf residual of the support-function evolution identity.

    Uses the rewritten form whose zeroth-order coefficient is
    |A|^2 + m n (n-2) l^{-n} |radial tangential part|^2, all over H^2,
    plus the same fixed-angle drift term.
    """
    sm, s0, sp = _axisym_snapshots(trace, t, delta)
    grid = s0.grid
    n, m = s0.ambient.n, s0.ambient.m
    g0 = geometry_fields(s0)
    chi0 = g0.support
    chi_m = geometry_fields(sm).support
    chi_p = geometry_fields(sp).support
    dchidt = (chi_p - chi_m) / (2.0 * delta)

    lam, v, H0 = g0.s, g0.v, g0.H
    lap_chi = _induced_laplacian(grid, lam, v, chi0)
    radial_tan_sq = g0.grad_phi_sq / v**2
    dphi = grid.dtheta(s0.phi, 1)
    dchi = grid.dtheta(chi0, 1)
    drift = dphi * dchi / (lam * H0 * v)
    rhs = (lap_chi + g0.second_form_sq * chi0
           + m * n * (n - 2) * lam ** float(-n) * radial_tan_sq * chi0) / H0**2 \
        + drift
    scale = float(np.max(np.abs(rhs)))
    return float(np.max(np.abs(dchidt - rhs))) / scale


def richardson_order(coarse: float, mid: float, fine: float) -> float:
    """Observed convergence order from one diagnostic at N, 2N, 4N.

    log2 of the ratio of successive differences; raises if the differences
    sit at rounding level.
    """
    d1 = coarse - mid
    d2 = mid - fine
    scale = max(abs(coarse), abs(mid), abs(fine), 1e-300)
    if abs(d1) < 64 * np.finfo(float).eps * scale or \
       abs(d2) < 64 * np.finfo(float).eps * scale:
        raise DegenerateRefinementError(
            "refinement differences at rounding level; no order estimate"
        )
    return math.log2(abs(d1) / abs(d2))

"""Geometry of star-shaped graph hypersurfaces over S^{n-1}.

A surface is stored as nodal values of the flow variable phi (the
reparametrized radius with d(phi) = ds/(s f)); the area radius s is recovered
through the tabulated radius map. From the graph, this module produces every
pointwise quantity the flow and its monitors need: slope factor v, shape
operator, mean curvature H, support function, area element weight.

Axisymmetric surfaces use the closed-form principal curvatures

    kappa_polar      = (f - phi''/v^2) / (v s)
    kappa_tangential = (f - cot(theta) phi') / (v s)    [multiplicity n-2]

whose sum reproduces the divergence-form mean curvature
((n-1) f - sigma~^{ij} phi_ij) / (v s) to rounding. Latitude-longitude
surfaces assemble the full 2x2 mixed shape operator.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import eval_legendre

from .ambient import AmbientParams, PhiMap, build_phi_map
from .errors import HorizonViolationError, InvalidConfigError
from .sphere import GridMode, SphereGrid, covariant_hessian, gradient_sq, integrate

__all__ = [
    "GraphSurface",
    "GeometryFields",
    "geometry_fields",
    "area",
    "star_shape_margin",
    "umbilicity_deviation",
    "coordinate_sphere",
    "perturbed_sphere",
    "surface_from_phi_values",
    "surface_from_s_values",
    "default_phi_map",
]


@dataclass(eq=False)
class GraphSurface:
    """Nodal flow-variable values of a star-shaped graph at flow time t."""

    grid: SphereGrid
    phi: np.ndarray
    ambient: AmbientParams
    phimap: PhiMap
    t: float = 0.0

    def __post_init__(self):
        self.phi = np.ascontiguousarray(self.phi, dtype=float)
        if self.phi.shape != self.grid.field_shape:
            raise InvalidConfigError(
                f"phi shape {self.phi.shape} != grid shape {self.grid.field_shape}"
            )
        if not np.all(np.isfinite(self.phi)):
            raise InvalidConfigError("phi contains non-finite values")
        if np.min(self.s) <= self.ambient.s0:
            raise HorizonViolationError(
                f"surface touches the horizon: min s = {np.min(self.s)}"
            )

    @cached_property
    def s(self) -> np.ndarray:
        """Area radius at the nodes (cached; surfaces are immutable by use)."""
        return np.asarray(self.phimap.s_of_phi(self.phi))

    def with_phi(self, phi: np.ndarray, t: float) -> "GraphSurface":
        return GraphSurface(self.grid, phi, self.ambient, self.phimap, t)


@dataclass(eq=False)
class GeometryFields:
    """Pointwise geometric data derived from a graph surface."""

    s: np.ndarray               # area radius (= warping radius)
    lapse: np.ndarray           # f(s) = dl/dr
    dlapse_dr: np.ndarray       # m(n-2) s^{1-n}
    v: np.ndarray               # slope factor sqrt(1 + |D phi|^2)
    grad_phi_sq: np.ndarray
    H: np.ndarray               # mean curvature (sum of principal curvatures)
    support: np.ndarray         # <s d_r, nu> = s / v; > 0 iff star-shaped
    second_form_sq: np.ndarray  # |A|^2
    area_weight: np.ndarray     # s^{n-1} v (area element / round measure)
    kappa: tuple                # principal curvatures; axisym: (polar, tangential)
    hh_max: np.ndarray          # largest eigenvalue of H * shape operator
    shape_op: np.ndarray | None = None  # latlong only: (2, 2, Nt, Npsi) mixed
    n: int = 0

    @property
    def mean_convex(self) -> bool:
        return bool(np.min(self.H) > 0.0)


def geometry_fields(surface: GraphSurface) -> GeometryFields:
    """Evaluate the full pointwise geometry of a graph surface."""
    grid = surface.grid
    n = surface.ambient.n
    m = surface.ambient.m
    s = surface.s
    if np.min(s) <= surface.ambient.s0:
        raise HorizonViolationError("surface touches the horizon")
    lapse = np.sqrt(1.0 - 2.0 * m * s ** float(2 - n))
    dlapse_dr = m * (n - 2) * s ** float(1 - n)

    hess = covariant_hessian(grid, surface.phi)
    gsq = gradient_sq(grid, surface.phi)
    vsq = 1.0 + gsq
    v = np.sqrt(vsq)

    if grid.mode is GridMode.AXISYM_1D:
        kap_polar = (lapse - hess.polar / vsq) / (v * s)
        kap_tan = (lapse - hess.tangential) / (v * s)
        H = kap_polar + (n - 2) * kap_tan
        a2 = kap_polar**2 + (n - 2) * kap_tan**2
        kappa = (kap_polar, kap_tan)
        hh_max = H * np.maximum(kap_polar, kap_tan)
        shape_op = None
    else:
        dp_t = grid.dtheta(surface.phi, 1)
        dp_p = grid.dpsi_deriv(surface.phi, 1)
        sin2 = grid.sin_theta[:, None] ** 2
        up_t = dp_t                # phi^theta
        up_p = dp_p / sin2         # phi^psi
        # G_i = phi^k phi_;ki
        g_t = up_t * hess.polar + up_p * hess.mixed
        g_p = up_t * hess.mixed + up_p * hess.tangential
        # mixed contraction sigma~^{jk} phi_;ki, rows j, columns i
        b_tt = hess.polar - up_t * g_t / vsq
        b_tp = hess.mixed - up_t * g_p / vsq
        b_pt = hess.mixed / sin2 - up_p * g_t / vsq
        b_pp = hess.tangential / sin2 - up_p * g_p / vsq
        h_tt = (lapse - b_tt) / (v * s)
        h_tp = -b_tp / (v * s)
        h_pt = -b_pt / (v * s)
        h_pp = (lapse - b_pp) / (v * s)
        H = h_tt + h_pp
        det = h_tt * h_pp - h_tp * h_pt
        a2 = H**2 - 2.0 * det
        disc = np.sqrt(np.maximum(H**2 - 4.0 * det, 0.0))
        kappa = ((H - disc) / 2.0, (H + disc) / 2.0)
        hh_max = H * kappa[1]
        shape_op = np.stack(
            [np.stack([h_tt, h_tp]), np.stack([h_pt, h_pp])]
        )

    return GeometryFields(
        s=s, lapse=lapse, dlapse_dr=dlapse_dr, v=v, grad_phi_sq=gsq,
        H=H, support=s / v, second_form_sq=a2,
        area_weight=s ** float(n - 1) * v,
        kappa=kappa, hh_max=hh_max, shape_op=shape_op, n=n,
    )


def area(surface: GraphSurface) -> float:
    """Total area: integral of s^{n-1} v over the round sphere."""
    fields = geometry_fields(surface)
    return integrate(surface.grid, fields.area_weight)


def star_shape_margin(surface: GraphSurface) -> float:
    """Minimum of the support function s/v over the nodes."""
    gsq = gradient_sq(surface.grid, surface.phi)
    return float(np.min(surface.s / np.sqrt(1.0 + gsq)))


def umbilicity_deviation(fields: GeometryFields) -> float:
    """Max over nodes of |A|^2 - H^2/(n-1) >= 0; zero iff totally umbilical."""
    return float(np.max(fields.second_form_sq - fields.H**2 / (fields.n - 1)))


def roundness_deviation(fields: GeometryFields) -> float:
    """Max over nodes and components of |(s/f) * shape - identity|."""
    scale = fields.s / fields.lapse
    if fields.shape_op is None:
        kp, kt = fields.kappa
        dev = np.maximum(np.abs(scale * kp - 1.0), np.abs(scale * kt - 1.0))
    else:
        h = fields.shape_op
        dev = np.maximum(
            np.maximum(np.abs(scale * h[0, 0] - 1.0), np.abs(scale * h[1, 1] - 1.0)),
            np.maximum(np.abs(scale * h[0, 1]), np.abs(scale * h[1, 0])),
        )
    return float(np.max(dev))


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------

def default_phi_map(ambient: AmbientParams, s_lo: float, s_hi: float,
                    t_end: float = 0.0, tol: float = 1e-12) -> PhiMap:
    """Radius map wide enough for [s_lo, s_hi] evolved to t_end (plus margin).

    The domain is pre-extended by the exact coordinate-sphere growth factor
    e^{(t_end + 1)/(n-1)} so flow lookups never leave the table.
    """
    if s_lo <= ambient.s0:
        raise HorizonViolationError(
            f"surface radius {s_lo} not outside horizon {ambient.s0}"
        )
    s_min = ambient.s0 + 0.25 * (s_lo - ambient.s0)
    s_max = s_hi * np.exp((t_end + 1.0) / (ambient.n - 1)) * 1.05
    return build_phi_map(ambient, s_min, s_max, tol=tol)


def coordinate_sphere(grid: SphereGrid, ambient: AmbientParams, s: float,
                      phimap: PhiMap | None = None, t_end: float = 0.0,
                      t: float = 0.0) -> GraphSurface:
    """Round graph at constant area radius s (exact flow solution)."""
    if phimap is None:
        phimap = default_phi_map(ambient, s, s, t_end)
    phi = np.full(grid.field_shape, phimap.phi_of_s(s))
    return GraphSurface(grid, phi, ambient, phimap, t)


def perturbed_sphere(grid: SphereGrid, ambient: AmbientParams, s: float,
                     mode_l: int, amplitude: float, target: str = "phi",
                     phimap: PhiMap | None = None, t_end: float = 0.0) -> GraphSurface:
    """Coordinate sphere plus a zonal Legendre mode, in phi or in s.

    target="phi": phi = phi(s) + amplitude * P_l(cos theta)  (default; keeps
    the flow variable smooth). target="s": s = s + amplitude * P_l(cos theta).
    """
    if target not in ("phi", "s"):
        raise InvalidConfigError(f"perturbation target must be 'phi' or 's', got {target!r}")
    x = np.cos(grid.theta)
    bump = amplitude * eval_legendre(mode_l, x)
    if grid.mode is GridMode.LATLONG_2D:
        bump = np.broadcast_to(bump[:, None], grid.field_shape).copy()
    if target == "phi":
        pad = abs(amplitude) + 0.1
        if phimap is None:
            phimap = default_phi_map(
                ambient, s * np.exp(-pad), s * np.exp(pad), t_end
            )
        phi = phimap.phi_of_s(s) + bump
        return GraphSurface(grid, phi, ambient, phimap, 0.0)
    s_field = s + bump
    return surface_from_s_values(grid, ambient, s_field, phimap, t_end)


def surface_from_s_values(grid: SphereGrid, ambient: AmbientParams,
                          s_values: np.ndarray, phimap: PhiMap | None = None,
                          t_end: float = 0.0) -> GraphSurface:
    """Build a graph from nodal area radii."""
    s_values = np.asarray(s_values, dtype=float)
    if np.min(s_values) <= ambient.s0:
        raise HorizonViolationError("nodal radius inside the horizon")
    if phimap is None:
        phimap = default_phi_map(
            ambient, float(np.min(s_values)), float(np.max(s_values)), t_end
        )
    phi = np.asarray(phimap.phi_of_s(s_values))
    return GraphSurface(grid, phi, ambient, phimap, 0.0)


def surface_from_phi_values(grid: SphereGrid, ambient: AmbientParams,
                            phi_values: np.ndarray, phimap: PhiMap,
                            t: float = 0.0) -> GraphSurface:
    """Build a graph from nodal flow-variable values against an existing map."""
    return GraphSurface(grid, np.asarray(phi_values, dtype=float), ambient, phimap, t)

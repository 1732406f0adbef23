"""Integral functionals, trace records, and verdicts for flow runs.

The central object is the expansion-normalized functional

    Q = |Sigma|^{-(n-2)/(n-1)} * ( integral of f H dmu  +  2(n-1) m omega_{n-1} )

which is constant on coordinate spheres, strictly larger on any other
star-shaped mean-convex graph, and nonincreasing along inverse mean curvature
flow with floor (n-1) omega_{n-1}^{1/(n-1)}. The gap functions report the
sharp lower bound for the lapse-weighted mean-curvature integral in its two
equivalent normalizations (area-radius form and horizon-area form).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ambient import horizon_area, normal_flux_density, unit_sphere_area
from .errors import InsufficientDataError
from .sphere import integrate
from .surface import (GraphSurface, area, geometry_fields, roundness_deviation,
                      umbilicity_deviation)

__all__ = [
    "CSV_COLUMNS",
    "TraceRecord",
    "FlowTrace",
    "weighted_mean_curvature_integral",
    "quantity_Q",
    "q_floor",
    "minkowski_gap",
    "minkowski_gap_horizon_form",
    "flux_integral",
    "snapshot_record",
    "monotonicity_verdict",
    "limit_diagnostics",
    "fit_log_linear_decay",
    "trace_to_csv",
]

CSV_COLUMNS = (
    "t", "area", "fH_integral", "Q", "gap", "flux",
    "H_min", "H_max", "Hexp_min", "Hexp_max", "chi_min", "grad_phi_max",
    "lambda_tilde_min", "lambda_tilde_max", "umbilicity_max", "roundness_max",
    "dt",
)


@dataclass(frozen=True)
class TraceRecord:
    t: float
    area: float
    fH_integral: float
    Q: float
    gap: float
    flux: float
    H_min: float
    H_max: float
    Hexp_min: float
    Hexp_max: float
    chi_min: float
    grad_phi_max: float
    lambda_tilde_min: float
    lambda_tilde_max: float
    umbilicity_max: float
    roundness_max: float
    dt: float

    def row(self) -> tuple:
        return tuple(getattr(self, c) for c in CSV_COLUMNS)


@dataclass
class FlowTrace:
    """Time series of snapshot records plus run metadata and events."""

    records: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    events: list = field(default_factory=list)
    failed: bool = False
    failure_reason: str | None = None
    surfaces: list | None = None

    @property
    def t(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def surface_at(self, t: float, rtol: float = 1e-9) -> GraphSurface:
        if not self.surfaces:
            raise InsufficientDataError("run did not store snapshot surfaces")
        scale = max(1.0, abs(t))
        for surf in self.surfaces:
            if abs(surf.t - t) <= rtol * scale:
                return surf
        raise InsufficientDataError(f"no stored snapshot at t = {t}")


def weighted_mean_curvature_integral(surface: GraphSurface) -> float:
    """Integral of f H over the surface area element."""
    g = geometry_fields(surface)
    return integrate(surface.grid, g.lapse * g.H * g.area_weight)


def q_floor(n: int) -> float:
    """Limiting lower bound (n-1) omega_{n-1}^{1/(n-1)} of the Q functional."""
    return (n - 1) * unit_sphere_area(n) ** (1.0 / (n - 1))


def quantity_Q(surface: GraphSurface) -> float:
    """Expansion-normalized weighted curvature functional (see module docs).

    The sphere area omega_{n-1} entering the additive mass term is taken from
    the grid normalization, so discrete cancellations are exact.
    """
    n, m = surface.ambient.n, surface.ambient.m
    omega = surface.grid.total_weight
    a = area(surface)
    fh = weighted_mean_curvature_integral(surface)
    return a ** (-(n - 2) / (n - 1)) * (fh + 2.0 * (n - 1) * m * omega)


def minkowski_gap(surface: GraphSurface) -> float:
    """Slack in the sharp bound, area-radius normalization.

    integral(f H) - (n-1) omega_{n-1} ( (|Sigma|/omega_{n-1})^{(n-2)/(n-1)} - 2m );
    zero exactly on coordinate spheres, positive otherwise.
    """
    n, m = surface.ambient.n, surface.ambient.m
    omega = unit_sphere_area(n)
    a = area(surface)
    fh = weighted_mean_curvature_integral(surface)
    return fh - (n - 1) * omega * ((a / omega) ** ((n - 2) / (n - 1)) - 2.0 * m)


def minkowski_gap_horizon_form(surface: GraphSurface) -> float:
    """Same slack in the horizon-area normalization.

    integral(f H) - (n-1) omega^{1/(n-1)} ( |Sigma|^{(n-2)/(n-1)}
                                            - |horizon|^{(n-2)/(n-1)} ).
    """
    n = surface.ambient.n
    omega = unit_sphere_area(n)
    a = area(surface)
    fh = weighted_mean_curvature_integral(surface)
    ex = (n - 2) / (n - 1)
    return fh - (n - 1) * omega ** (1.0 / (n - 1)) * (
        a**ex - horizon_area(surface.ambient) ** ex
    )


def flux_integral(surface: GraphSurface) -> float:
    """Flux of the ambient lapse gradient through the surface.

    Equals m (n-2) omega_{n-1} for every surface enclosing the horizon
    (divergence theorem against a harmonic potential), independent of shape.
    """
    g = geometry_fields(surface)
    dens = normal_flux_density(surface.ambient, g.s, g.v)
    return integrate(surface.grid, dens * g.area_weight)


def snapshot_record(surface: GraphSurface, dt: float) -> TraceRecord:
    """Full monitor record for one snapshot."""
    n, m = surface.ambient.n, surface.ambient.m
    grid = surface.grid
    g = geometry_fields(surface)
    a = integrate(grid, g.area_weight)
    fh = integrate(grid, g.lapse * g.H * g.area_weight)
    omega_grid = grid.total_weight
    q = a ** (-(n - 2) / (n - 1)) * (fh + 2.0 * (n - 1) * m * omega_grid)
    omega = unit_sphere_area(n)
    gap = fh - (n - 1) * omega * ((a / omega) ** ((n - 2) / (n - 1)) - 2.0 * m)
    flux = integrate(grid, normal_flux_density(surface.ambient, g.s, g.v)
                     * g.area_weight)
    decay = math.exp(surface.t / (n - 1))
    return TraceRecord(
        t=surface.t, area=a, fH_integral=fh, Q=q, gap=gap, flux=flux,
        H_min=float(np.min(g.H)), H_max=float(np.max(g.H)),
        Hexp_min=float(np.min(g.H)) * decay, Hexp_max=float(np.max(g.H)) * decay,
        chi_min=float(np.min(g.support)),
        grad_phi_max=float(np.sqrt(np.max(g.grad_phi_sq))),
        lambda_tilde_min=float(np.min(g.s)) / decay,
        lambda_tilde_max=float(np.max(g.s)) / decay,
        umbilicity_max=umbilicity_deviation(g),
        roundness_max=roundness_deviation(g),
        dt=dt,
    )


def monotonicity_verdict(trace: FlowTrace, slack_rel: float = 1e-8,
                         slack_dt2: float = 0.0) -> dict:
    """Check Q(t) never increases beyond slack between consecutive snapshots.

    slack per pair = slack_rel * |Q_k| + slack_dt2 * dt_k^2 * |Q_k|. Also
    reports whether near-stationary stretches coincide with vanishing
    umbilicity deviation (the equality configuration).
    """
    if len(trace.records) < 2:
        raise InsufficientDataError("need at least two records")
    q = trace.column("Q")
    t = trace.t
    dts = trace.column("dt")
    umb = trace.column("umbilicity_max")
    violations = []
    max_excess = 0.0
    for k in range(len(q) - 1):
        slack = slack_rel * abs(q[k]) + slack_dt2 * dts[k + 1] ** 2 * abs(q[k])
        excess = q[k + 1] - q[k] - slack
        if excess > 0:
            violations.append((float(t[k]), float(t[k + 1]), float(excess)))
        max_excess = max(max_excess, float(q[k + 1] - q[k]))
    dq_dt = np.diff(q) / np.diff(t)
    scale = max(abs(q[0]), abs(q[-1]))
    flat = np.abs(dq_dt) < 1e-6 * scale
    equality_pairs = [
        (float(t[k]), float(umb[k])) for k in np.nonzero(flat)[0]
    ]
    return {
        "name": "monotonicity",
        "pass": not violations,
        "measured": max_excess,
        "tolerance": slack_rel,
        "violations": violations,
        "flat_episodes": equality_pairs,
    }


def fit_log_linear_decay(t, y):
    """Least-squares fit log(y) = a - rate * t; returns (rate, r_squared).

    Positive rate means decay. Raises on fewer than three usable points.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = y > 0
    if np.count_nonzero(keep) < 3:
        raise InsufficientDataError("need at least three positive samples to fit")
    t, ly = t[keep], np.log(y[keep])
    a = np.vstack([np.ones_like(t), -t]).T
    coef, *_ = np.linalg.lstsq(a, ly, rcond=None)
    resid = ly - a @ coef
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(coef[1]), r2


def limit_diagnostics(trace: FlowTrace, fit_window: tuple | None = None) -> dict:
    """End-state convergence report: Q excess over the floor, normalized-radius
    spread, roundness, and fitted decay rates over the tail window."""
    if len(trace.records) < 3:
        raise InsufficientDataError("need at least three records")
    n = trace.meta["n"]
    last = trace.records[-1]
    t = trace.t
    if fit_window is None:
        fit_window = (t[-1] / 2.0, t[-1])
    sel = (t >= fit_window[0] - 1e-12) & (t <= fit_window[1] + 1e-12)
    if np.count_nonzero(sel) < 3:
        raise InsufficientDataError("fit window contains fewer than three records")

    spread = trace.column("lambda_tilde_max") - trace.column("lambda_tilde_min")
    mean_lt = 0.5 * (last.lambda_tilde_max + last.lambda_tilde_min)
    # tail trend of Q: since Q is nonincreasing, the end value bounds the
    # limit from above and the slope quantifies how settled the tail is
    q = trace.column("Q")[sel]
    tw = t[sel]
    q_slope = float(np.polyfit(tw, q, 1)[0]) if len(tw) >= 2 else 0.0
    out = {
        "q_excess": last.Q - q_floor(n),
        "q_trend_slope": q_slope,
        "lambda_tilde_spread_rel": float(spread[-1]) / mean_lt,
        "roundness_max": last.roundness_max,
        "fit_window": tuple(float(x) for x in fit_window),
    }
    grad = trace.column("grad_phi_max")
    try:
        rate, r2 = fit_log_linear_decay(t[sel], grad[sel])
        out["grad_decay_rate"] = rate
        out["grad_decay_r2"] = r2
    except InsufficientDataError:
        out["grad_decay_rate"] = None
        out["grad_decay_r2"] = None
    try:
        rate_s, r2_s = fit_log_linear_decay(t[sel], spread[sel])
        out["spread_decay_rate"] = rate_s
        out["spread_decay_r2"] = r2_s
    except InsufficientDataError:
        out["spread_decay_rate"] = None
        out["spread_decay_r2"] = None
    return out


def trace_to_csv(trace: FlowTrace) -> str:
    """Render the trace in the published column order; floats via repr."""
    lines = [",".join(CSV_COLUMNS)]
    for rec in trace.records:
        lines.append(",".join(repr(float(x)) for x in rec.row()))
    return "\n".join(lines) + "\n"

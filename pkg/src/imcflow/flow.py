"""Explicit time stepping of the scalar parabolic flow d(phi)/dt = 1/F.

F = ((n-1) f - sigma~^{ij} phi_ij) / v^2 is the graph form of lambda H / v;
the flow is the inverse-mean-curvature motion of the surface written in the
flow variable, and stays parabolic exactly as long as the surface is mean
convex. Steps are RK2 (midpoint) under a CFL bound derived from the diffusion
tensor sigma~^{ij} / (v^2 F^2), whose eigenvalues lie in [1/v^2, 1] times
1/(v^2 F^2):

    dt = cfl_safety * min_nodes( dx_local^2 * v^2 F^2 ) / (2 * grid_dim)

Coordinate spheres evolve exactly as s(t) = s(0) e^{t/(n-1)} and serve as the
regression anchor throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import (FlowBreakdownError, InvalidConfigError, RangeError,
                     TimestepUnderflowError)
from .monitor import FlowTrace, snapshot_record
from .sphere import GridMode, covariant_hessian
from .surface import GraphSurface, geometry_fields

__all__ = [
    "FlowConfig",
    "FlowState",
    "speed_field",
    "stable_dt",
    "step",
    "run",
]


@dataclass(frozen=True)
class FlowConfig:
    """Stepping and monitoring policy for a flow run."""

    t_end: float
    cfl_safety: float = 0.2
    snapshot_interval: float | None = None
    max_steps: int = 20_000_000
    f_min: float = 1e-10          # breakdown threshold on F = lambda H / v
    dt_min: float = 1e-13
    fixed_dt: float | None = None  # diagnostic override; bypasses the CFL bound
    extra_snapshot_times: tuple = ()
    store_surfaces: bool = False
    sandwich_tol: float = 1e-6
    chi_tol: float = 1e-6

    def __post_init__(self):
        if self.t_end <= 0:
            raise InvalidConfigError(f"t_end must be > 0, got {self.t_end}")
        if not (0.0 < self.cfl_safety <= 1.0):
            raise InvalidConfigError(
                f"cfl_safety must be in (0, 1], got {self.cfl_safety}"
            )
        if self.fixed_dt is not None and self.fixed_dt <= 0:
            raise InvalidConfigError(
                f"fixed_dt must be positive, got {self.fixed_dt}"
            )

    def snapshot_times(self) -> np.ndarray:
        interval = self.snapshot_interval or self.t_end / 50.0
        k = int(math.floor(self.t_end / interval + 1e-9))
        times = [i * interval for i in range(k + 1)]
        times += [self.t_end]
        times += [float(x) for x in self.extra_snapshot_times]
        times = sorted(x for x in times if 0.0 <= x <= self.t_end + 1e-12)
        out: list = []
        eps = 1e-11 * max(1.0, self.t_end)
        for x in times:
            if not out or x - out[-1] > eps:
                out.append(min(x, self.t_end))
        return np.array(out)


@dataclass
class FlowState:
    """One owner's mutable view of an evolving surface."""

    surface: GraphSurface
    step_count: int = 0
    dt: float = 0.0
    events: list = field(default_factory=list)


class _AxisymKernel:
    """Prepacked arrays + backend binding for the hot axisymmetric RHS."""

    def __init__(self, surface: GraphSurface, backend=None):
        grid = surface.grid
        pm = surface.phimap
        amb = surface.ambient
        self.impl = backend or _backend.get_backend(None)
        self.backend_name = self.impl.BACKEND_NAME
        self.n = amb.n
        self.args = (
            np.ascontiguousarray(grid.w1),
            np.ascontiguousarray(grid.w2),
            np.ascontiguousarray(grid.cot_theta),
            np.ascontiguousarray(grid.delta_sq),
            np.ascontiguousarray(pm.phi_nodes),
            np.ascontiguousarray(pm.s_nodes),
            np.ascontiguousarray(pm.dphi_ds),
            np.ascontiguousarray(pm.dsdphi),
            amb.n,
            2.0 * amb.m,
            float(2 - amb.n),
            grid.stencil_order // 2,
        )

    def rhs(self, phi: np.ndarray, out: np.ndarray):
        return self.impl.axisym_rhs(phi, *self.args, out)


class _LatlongKernel:
    """Numpy-only RHS for latitude-longitude grids (no compiled twin)."""

    backend_name = "numpy"

    def __init__(self, surface: GraphSurface, backend=None):
        self.grid = surface.grid
        self.pm = surface.phimap
        amb = surface.ambient
        self.n = amb.n
        self.two_m = 2.0 * amb.m
        self.exp_pow = float(2 - amb.n)
        from ._kernels_np import s_lookup

        self._lookup = s_lookup

    def rhs(self, phi: np.ndarray, out: np.ndarray):
        grid = self.grid
        hess = covariant_hessian(grid, phi)
        ft = grid.dtheta(phi, 1)
        fp = grid.dpsi_deriv(phi, 1)
        sin2 = grid.sin_theta[:, None] ** 2
        up_t = ft
        up_p = fp / sin2
        vsq = 1.0 + ft**2 + fp**2 / sin2
        lap = hess.polar + hess.tangential / sin2
        quad = up_t**2 * hess.polar + 2 * up_t * up_p * hess.mixed \
            + up_p**2 * hess.tangential
        sig = lap - quad / vsq
        pm = self.pm
        s, nviol = self._lookup(phi, pm.phi_nodes, pm.s_nodes, pm.dphi_ds,
                                pm.dsdphi, self.two_m, self.exp_pow)
        fval = np.sqrt(1.0 - self.two_m * s**self.exp_pow)
        F = ((self.n - 1) * fval - sig) / vsq
        np.divide(1.0, F, out=out)
        fmin = float(np.min(F))
        cfl = float(np.min(grid.delta_sq * (vsq * (F * F))))
        return fmin, cfl, nviol


def _make_kernel(surface: GraphSurface, backend=None):
    if surface.grid.mode is GridMode.AXISYM_1D:
        return _AxisymKernel(surface, backend)
    return _LatlongKernel(surface, backend)


def _c_dim(grid) -> float:
    return 2.0 if grid.mode is GridMode.AXISYM_1D else 4.0


def speed_field(surface: GraphSurface, f_min: float = 1e-10,
                backend=None) -> np.ndarray:
    """Pointwise flow speed 1/F; raises FlowBreakdownError if F <= f_min."""
    kern = _make_kernel(surface, backend)
    out = np.empty(surface.grid.field_shape)
    fmin, _, nviol = kern.rhs(surface.phi, out)
    _raise_on(fmin, f_min, nviol)
    return out


def stable_dt(surface: GraphSurface, cfl_safety: float = 0.2,
              dt_min: float = 0.0, backend=None) -> float:
    """CFL-stable explicit step for the current surface."""
    kern = _make_kernel(surface, backend)
    out = np.empty(surface.grid.field_shape)
    fmin, cfl, nviol = kern.rhs(surface.phi, out)
    _raise_on(fmin, 0.0, nviol)
    dt = cfl_safety * cfl / _c_dim(surface.grid)
    if dt < dt_min:
        raise TimestepUnderflowError(
            f"stable dt {dt} below floor {dt_min}: the flow is too stiff here"
        )
    return dt


def _raise_on(fmin: float, f_min: float, nviol: int):
    if nviol:
        raise RangeError(
            f"{nviol} nodes left the tabulated radius domain; widen the map"
        )
    if fmin <= f_min:
        raise FlowBreakdownError(
            f"parabolicity lost: min F = {fmin} <= threshold {f_min}"
        )


def step(state: FlowState, dt: float, f_min: float = 1e-10,
         backend=None) -> FlowState:
    """One RK2 (midpoint) step of size dt; dt must be positive and CFL-stable
    (run() guarantees the latter; direct callers own that precondition)."""
    if dt <= 0.0:
        raise InvalidConfigError(f"dt must be positive, got {dt}")
    surface = state.surface
    kern = _make_kernel(surface, backend)
    k1 = np.empty(surface.grid.field_shape)
    k2 = np.empty(surface.grid.field_shape)
    fmin, _, nviol = kern.rhs(surface.phi, k1)
    _raise_on(fmin, f_min, nviol)
    phi_mid = surface.phi + (0.5 * dt) * k1
    fmin, _, nviol = kern.rhs(phi_mid, k2)
    _raise_on(fmin, f_min, nviol)
    new_surface = surface.with_phi(surface.phi + dt * k2, surface.t + dt)
    return FlowState(new_surface, state.step_count + 1, dt, list(state.events))


def run(initial: GraphSurface, config: FlowConfig, backend=None) -> FlowTrace:
    """Advance to t_end with adaptive steps, snapshot records, and bound checks.

    Breakdown or step underflow terminates early with the partial trace
    flagged failed. Per-snapshot checks: radius sandwich between the exact
    sphere solutions through the initial min/max radius, the exponential
    lower bound on the support function, and positivity of H e^{t/(n-1)}.
    """
    fields0 = geometry_fields(initial)
    if not fields0.mean_convex:
        raise FlowBreakdownError(
            f"initial surface is not mean convex: min H = {np.min(fields0.H)}"
        )
    needed_smax = float(np.max(fields0.s)) * math.exp(
        (config.t_end + 1.0) / (initial.ambient.n - 1)
    )
    if initial.phimap.s_max < needed_smax:
        initial = GraphSurface(initial.grid, initial.phi, initial.ambient,
                               initial.phimap.extended(needed_smax * 1.05),
                               initial.t)

    n = initial.ambient.n
    kern = _make_kernel(initial, backend)
    c_dim = _c_dim(initial.grid)
    trace = FlowTrace(meta={
        "n": n, "m": initial.ambient.m,
        "grid_mode": initial.grid.mode.value,
        "N": initial.grid.theta.size,
        "stencil_order": initial.grid.stencil_order,
        "t_end": config.t_end,
        "cfl_safety": config.cfl_safety,
        "backend": kern.backend_name,
        "lambda_min0": float(np.min(fields0.s)),
        "lambda_max0": float(np.max(fields0.s)),
        "chi_min0": float(np.min(fields0.support)),
    })
    if config.store_surfaces:
        trace.surfaces = []

    snap_times = config.snapshot_times()
    phi = initial.phi.copy()
    t = 0.0
    dt_last = 0.0
    steps = 0
    k1 = np.empty(initial.grid.field_shape)
    k2 = np.empty(initial.grid.field_shape)

    def emit(t_now: float):
        surf = GraphSurface(initial.grid, phi.copy(), initial.ambient,
                            initial.phimap, t_now)
        rec = snapshot_record(surf, dt_last)
        trace.records.append(rec)
        if trace.surfaces is not None:
            trace.surfaces.append(surf)
        grow = math.exp(t_now / (n - 1))
        lo = trace.meta["lambda_min0"] * grow
        hi = trace.meta["lambda_max0"] * grow
        if rec.lambda_tilde_min * grow < lo * (1.0 - config.sandwich_tol) or \
           rec.lambda_tilde_max * grow > hi * (1.0 + config.sandwich_tol):
            trace.events.append(
                (t_now, "sandwich-violation",
                 f"radius range [{rec.lambda_tilde_min * grow}, "
                 f"{rec.lambda_tilde_max * grow}] vs bounds [{lo}, {hi}]")
            )
        chi_bound = trace.meta["chi_min0"] * grow
        if rec.chi_min < chi_bound * (1.0 - config.chi_tol):
            trace.events.append(
                (t_now, "chi-bound-violation",
                 f"chi_min {rec.chi_min} < {chi_bound}")
            )
        # outward flow must never drift back toward the horizon
        if rec.lambda_tilde_min * grow < trace.meta["lambda_min0"] * (1.0 - 1e-9):
            trace.events.append(
                (t_now, "horizon-approach",
                 f"min radius {rec.lambda_tilde_min * grow} below initial "
                 f"{trace.meta['lambda_min0']}")
            )
        if rec.Hexp_min <= 0.0:
            trace.events.append(
                (t_now, "hexp-positivity-violation", f"min He^t/(n-1) = {rec.Hexp_min}")
            )

    try:
        for t_target in snap_times:
            while t < t_target - 1e-13 * max(1.0, t_target):
                fmin, cfl, nviol = kern.rhs(phi, k1)
                _raise_on(fmin, config.f_min, nviol)
                dt = config.fixed_dt or config.cfl_safety * cfl / c_dim
                if dt < config.dt_min:
                    raise TimestepUnderflowError(
                        f"dt {dt} under floor {config.dt_min} at t = {t}"
                    )
                clipped = min(dt, t_target - t)
                np.multiply(k1, 0.5 * clipped, out=k2)
                k2 += phi
                fmin, _, nviol = kern.rhs(k2, k2)
                _raise_on(fmin, config.f_min, nviol)
                k2 *= clipped
                phi += k2
                t = t_target if clipped < dt else t + dt
                dt_last = clipped
                steps += 1
                if steps > config.max_steps:
                    raise FlowBreakdownError(
                        f"exceeded max_steps = {config.max_steps}"
                    )
            emit(t_target)
    except (FlowBreakdownError, TimestepUnderflowError, RangeError) as exc:
        trace.failed = True
        trace.failure_reason = f"{type(exc).__name__}: {exc}"
        trace.events.append((t, _event_kind(exc), str(exc)))

    trace.meta["steps"] = steps
    trace.meta["t_final"] = t
    if trace.records and min(r.Hexp_min for r in trace.records) <= 0.0:
        trace.events.append((t, "hexp-positivity-violation", "final check"))
    return trace


def _event_kind(exc) -> str:
    if isinstance(exc, TimestepUnderflowError):
        return "dt-underflow"
    if isinstance(exc, RangeError):
        return "range-violation"
    return "breakdown"

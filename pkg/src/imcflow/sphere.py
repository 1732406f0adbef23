"""Discrete calculus on the round unit sphere S^{n-1}.

Two grid flavors:

* AXISYM_1D  -- zonal fields phi(theta) for any ambient dimension n >= 3.
  Nodes are Gauss-Jacobi points in cos(theta) with weight exponent
  (n-3)/2 matching the sin^{n-2} measure, so the quadrature normalization
  sum(w) = omega_{n-1} holds to rounding in every dimension (for n = 3 this
  is plain Gauss-Legendre).
* LATLONG_2D -- full fields phi(theta, psi) for n = 3 only: Gauss-Legendre
  in cos(theta) crossed with a uniform periodic azimuth.

No nodes sit on the poles. Polar derivatives close with ghost nodes by even
reflection (psi shifted by pi in 2-D), which encodes smoothness across the
axis and avoids 0/0 in the cot(theta) terms. Stencil weights are Fornberg
weights on the local (non-uniform) nodes; each row is re-centered so that
constants are annihilated exactly, not just to truncation.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import roots_jacobi

from .ambient import unit_sphere_area
from .errors import InvalidConfigError

__all__ = [
    "GridMode",
    "SphereGrid",
    "build_grid",
    "covariant_hessian",
    "gradient_sq",
    "laplace_beltrami",
    "integrate",
    "CovariantHessian",
]


class GridMode(str, enum.Enum):
    AXISYM_1D = "axisym_1d"
    LATLONG_2D = "latlong_2d"


def fornberg_weights(x: np.ndarray, x0: float, max_order: int) -> np.ndarray:
    """Finite-difference weights on arbitrary nodes x for derivatives at x0.

    Returns shape (max_order+1, len(x)); row m holds the weights of the m-th
    derivative. Classic recursive construction.
    """
    npts = len(x)
    c = np.zeros((max_order + 1, npts))
    c1 = 1.0
    c4 = x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, npts):
        mn = min(i, max_order)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


class CovariantHessian(NamedTuple):
    """Covariant second derivatives of a scalar field on the round sphere.

    AXISYM_1D: polar = phi'', tangential = cot(theta) * phi' (the (n-2)-fold
    degenerate mixed eigenvalue), mixed = None.
    LATLONG_2D: lowered components polar = phi_;tt, tangential = phi_;pp,
    mixed = phi_;tp.
    """

    polar: np.ndarray
    tangential: np.ndarray
    mixed: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class SphereGrid:
    """Immutable quadrature + differentiation setup on S^{n-1}."""

    mode: GridMode
    n: int
    theta: np.ndarray          # polar angles, ascending, strictly inside (0, pi)
    weights: np.ndarray        # quadrature weights, shape like a scalar field
    stencil_order: int
    psi: np.ndarray | None = None
    # derivative machinery (filled by build_grid)
    w1: np.ndarray = field(default=None, repr=False)
    w2: np.ndarray = field(default=None, repr=False)
    dpsi: float | None = None
    cot_theta: np.ndarray = field(default=None, repr=False)
    sin_theta: np.ndarray = field(default=None, repr=False)
    delta_sq: np.ndarray = field(default=None, repr=False)  # min local spacing^2
    total_weight: float = 0.0

    @property
    def npoints(self) -> int:
        return self.weights.size

    @property
    def field_shape(self) -> tuple:
        if self.mode is GridMode.AXISYM_1D:
            return (self.theta.size,)
        return (self.theta.size, self.psi.size)

    # -- polar finite differences on the extended (ghosted) array -----------

    def _extend(self, f: np.ndarray) -> np.ndarray:
        p = self.stencil_order // 2
        if self.mode is GridMode.AXISYM_1D:
            return np.concatenate([f[:p][::-1], f, f[-p:][::-1]])
        half = self.psi.size // 2
        top = np.roll(f[:p][::-1], half, axis=1)
        bot = np.roll(f[-p:][::-1], half, axis=1)
        return np.concatenate([top, f, bot], axis=0)

    def dtheta(self, f: np.ndarray, order: int = 1) -> np.ndarray:
        """Partial derivative in theta (order 1 or 2), pole-regular closure.

        Applied in sum-of-differences form sum_j w_j (f_j - f_center), so a
        constant field yields exactly zero, independent of weight rounding.
        """
        f = np.asarray(f, dtype=float)
        w = self.w1 if order == 1 else self.w2
        ext = self._extend(f)
        nt = self.theta.size
        k = w.shape[1]
        out = w[:, 0] * (ext[0:nt] - f).T
        for j in range(1, k):
            out += w[:, j] * (ext[j : j + nt] - f).T
        return out.T

    def dpsi_deriv(self, f: np.ndarray, order: int = 1) -> np.ndarray:
        """Periodic azimuthal derivative (LATLONG_2D only)."""
        p = self.stencil_order // 2
        w = _uniform_central_weights(self.stencil_order, order) / self.dpsi**order
        ext = np.concatenate([f[:, -p:], f, f[:, :p]], axis=1)
        npsi = self.psi.size
        out = w[0] * (ext[:, 0:npsi] - f)
        for j in range(1, 2 * p + 1):
            out += w[j] * (ext[:, j : j + npsi] - f)
        return out

    def dtheta_dpsi(self, f: np.ndarray) -> np.ndarray:
        return self.dpsi_deriv(self.dtheta(f, 1), 1)


@functools.lru_cache(maxsize=None)
def _uniform_central_weights(stencil_order: int, deriv: int) -> np.ndarray:
    p = stencil_order // 2
    x = np.arange(-p, p + 1, dtype=float)
    return fornberg_weights(x, 0.0, deriv)[deriv]


def _polar_stencils(theta: np.ndarray, p: int):
    """Per-node Fornberg weight rows on the ghost-extended polar nodes."""
    nt = theta.size
    ext = np.concatenate([-theta[:p][::-1], theta, 2 * math.pi - theta[-p:][::-1]])
    w1 = np.empty((nt, 2 * p + 1))
    w2 = np.empty((nt, 2 * p + 1))
    for k in range(nt):
        local = ext[k : k + 2 * p + 1]
        c = fornberg_weights(local, theta[k], 2)
        w1[k] = c[1]
        w2[k] = c[2]
    # exact annihilation of constants: force each row to sum to zero
    mid = p
    w1[:, mid] -= w1.sum(axis=1)
    w2[:, mid] -= w2.sum(axis=1)
    return w1, w2, ext


def build_grid(mode, n: int, N: int, N_psi: int | None = None,
               stencil_order: int = 4) -> SphereGrid:
    """Construct a sphere grid with quadrature and derivative stencils."""
    mode = GridMode(mode)
    if n < 3 or int(n) != n:
        raise InvalidConfigError(f"ambient dimension must be >= 3, got {n}")
    if N < 16:
        raise InvalidConfigError(f"need at least 16 polar nodes, got {N}")
    if stencil_order not in (2, 4, 6):
        raise InvalidConfigError(f"stencil order must be 2, 4 or 6, got {stencil_order}")
    if mode is GridMode.LATLONG_2D and n != 3:
        raise InvalidConfigError("latitude-longitude grids are only defined for n = 3")

    alpha = (n - 3) / 2.0
    x, jw = roots_jacobi(N, alpha, alpha)
    theta = np.arccos(x[::-1])            # ascending in theta
    jw = jw[::-1]
    p = stencil_order // 2
    w1, w2, ext = _polar_stencils(theta, p)

    gaps = np.diff(ext[p - 1 : p + N + 1]) if p >= 1 else np.diff(theta)
    # local spacing: min of the two adjacent gaps (ghost gaps at the ends)
    delta = np.minimum(gaps[:-1], gaps[1:])

    if mode is GridMode.AXISYM_1D:
        weights = unit_sphere_area(n - 1) * jw
        grid = SphereGrid(
            mode=mode, n=n, theta=theta, weights=weights,
            stencil_order=stencil_order,
            w1=w1, w2=w2,
            cot_theta=1.0 / np.tan(theta), sin_theta=np.sin(theta),
            delta_sq=delta**2,
            total_weight=math.fsum(weights),
        )
        return grid

    if N_psi is None:
        N_psi = 2 * N
    if N_psi < 16 or N_psi % 2:
        raise InvalidConfigError(
            f"need an even azimuthal count >= 16, got {N_psi}"
        )
    dpsi = 2.0 * math.pi / N_psi
    psi = dpsi * np.arange(N_psi)
    weights = np.broadcast_to((jw * dpsi)[:, None], (N, N_psi)).copy()
    sin_t = np.sin(theta)
    # metric spacing per node: polar gap and azimuthal arc sin(theta)*dpsi
    delta2d = np.minimum(delta[:, None], (sin_t * dpsi)[:, None])
    delta2d = np.broadcast_to(delta2d, (N, N_psi)).copy()
    return SphereGrid(
        mode=mode, n=n, theta=theta, weights=weights,
        stencil_order=stencil_order, psi=psi,
        w1=w1, w2=w2, dpsi=dpsi,
        cot_theta=1.0 / np.tan(theta), sin_theta=sin_t,
        delta_sq=delta2d**2,
        total_weight=math.fsum(weights.ravel()),
    )


def covariant_hessian(grid: SphereGrid, phi: np.ndarray) -> CovariantHessian:
    """Covariant Hessian of a scalar field (see CovariantHessian for layout)."""
    phi = _check_field(grid, phi)
    if grid.mode is GridMode.AXISYM_1D:
        dp = grid.dtheta(phi, 1)
        return CovariantHessian(polar=grid.dtheta(phi, 2),
                                tangential=grid.cot_theta * dp)
    ft = grid.dtheta(phi, 1)
    fp = grid.dpsi_deriv(phi, 1)
    cot = grid.cot_theta[:, None]
    sc = (grid.sin_theta * np.cos(grid.theta))[:, None]
    htt = grid.dtheta(phi, 2)
    htp = grid.dpsi_deriv(ft, 1) - cot * fp
    hpp = grid.dpsi_deriv(phi, 2) + sc * ft
    return CovariantHessian(polar=htt, tangential=hpp, mixed=htp)


def gradient_sq(grid: SphereGrid, phi: np.ndarray) -> np.ndarray:
    """Squared round-sphere gradient |D phi|^2."""
    phi = _check_field(grid, phi)
    if grid.mode is GridMode.AXISYM_1D:
        return grid.dtheta(phi, 1) ** 2
    ft = grid.dtheta(phi, 1)
    fp = grid.dpsi_deriv(phi, 1)
    return ft**2 + (fp / grid.sin_theta[:, None]) ** 2


def laplace_beltrami(grid: SphereGrid, phi: np.ndarray) -> np.ndarray:
    """Trace of the covariant Hessian with the round metric."""
    h = covariant_hessian(grid, phi)
    if grid.mode is GridMode.AXISYM_1D:
        return h.polar + (grid.n - 2) * h.tangential
    return h.polar + h.tangential / grid.sin_theta[:, None] ** 2


def integrate(grid: SphereGrid, f: np.ndarray) -> float:
    """Quadrature over S^{n-1} with deterministic compensated summation."""
    f = _check_field(grid, f)
    return math.fsum((grid.weights * f).ravel(order="C"))


def _check_field(grid: SphereGrid, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != grid.field_shape:
        raise InvalidConfigError(
            f"field shape {f.shape} does not match grid {grid.field_shape}"
        )
    return f

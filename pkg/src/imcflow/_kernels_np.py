"""Pure-numpy twin of the compiled flow kernel.

Same arithmetic, same association order as the Cython extension: stencils in
sum-of-differences form, inverse radius lookup by binary search + cubic
Hermite + one Newton polish against the forward interpolant.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "numpy"


def _hermite(u, y0, y1, d0, d1, h):
    u2 = u * u
    u3 = u2 * u
    return (
        (2 * u3 - 3 * u2 + 1) * y0
        + (u3 - 2 * u2 + u) * h * d0
        + (-2 * u3 + 3 * u2) * y1
        + (u3 - u2) * h * d1
    )


def s_lookup(y, phi_tab, s_tab, dphids_tab, dsdphi_tab, two_m, exp_pow):
    """Vectorized inverse of the radius table; returns (s, out_of_range_count)."""
    y = np.asarray(y)
    slack = 1e-12 * max(1.0, abs(phi_tab[-1]))
    nviol = int(np.count_nonzero((y < phi_tab[0] - slack) | (y > phi_tab[-1] + slack)))
    yc = np.clip(y, phi_tab[0], phi_tab[-1])
    i = np.clip(np.searchsorted(phi_tab, yc, side="right") - 1, 0, len(phi_tab) - 2)
    hp = phi_tab[i + 1] - phi_tab[i]
    u = (yc - phi_tab[i]) / hp
    s = _hermite(u, s_tab[i], s_tab[i + 1], dsdphi_tab[i], dsdphi_tab[i + 1], hp)
    hs = s_tab[i + 1] - s_tab[i]
    us = (s - s_tab[i]) / hs
    phi_hat = _hermite(us, phi_tab[i], phi_tab[i + 1],
                       dphids_tab[i], dphids_tab[i + 1], hs)
    s = s - (phi_hat - yc) * s * np.sqrt(1.0 - two_m * s**exp_pow)
    return s, nviol


def axisym_rhs(phi, w1, w2, cot, delta_sq, phi_tab, s_tab, dphids_tab,
               dsdphi_tab, ndim, two_m, exp_pow, p, out_speed):
    """Flow speed 1/F for an axisymmetric graph.

    Returns (min F, min of delta^2 * v^2 F^2 for the CFL bound, range count).
    out_speed may alias phi: every read of phi happens before the single
    write at the end (the compiled twin honors the same contract).
    """
    nt = phi.shape[0]
    ext = np.concatenate([phi[:p][::-1], phi, phi[-p:][::-1]])
    k = w1.shape[1]
    dphi = w1[:, 0] * (ext[0:nt] - phi)
    d2 = w2[:, 0] * (ext[0:nt] - phi)
    for j in range(1, k):
        diff = ext[j : j + nt] - phi
        dphi += w1[:, j] * diff
        d2 += w2[:, j] * diff
    vsq = 1.0 + dphi * dphi
    s, nviol = s_lookup(phi, phi_tab, s_tab, dphids_tab, dsdphi_tab, two_m, exp_pow)
    fval = np.sqrt(1.0 - two_m * s**exp_pow)
    sig = d2 + (ndim - 2) * cot * dphi - dphi * dphi * d2 / vsq
    F = ((ndim - 1) * fval - sig) / vsq
    np.divide(1.0, F, out=out_speed)
    fmin = float(np.min(F))
    cfl = float(np.min(delta_sq * (vsq * (F * F))))
    return fmin, cfl, nviol

# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled flow kernel: hot RHS of the inverse-curvature graph flow.

Mirrors _kernels_np.axisym_rhs operation for operation (same stencil
association order, same Hermite/Newton inverse radius lookup) so the two
backends agree to rounding. All reads of phi go through the ghost-extended
scratch copy, so out_speed may alias phi.
"""

import numpy as np

from libc.math cimport pow, sqrt

BACKEND_NAME = "compiled"


cdef inline double _hermite(double u, double y0, double y1,
                            double d0, double d1, double h) nogil:
    cdef double u2 = u * u
    cdef double u3 = u2 * u
    return ((2 * u3 - 3 * u2 + 1) * y0
            + (u3 - 2 * u2 + u) * h * d0
            + (-2 * u3 + 3 * u2) * y1
            + (u3 - u2) * h * d1)


def axisym_rhs(double[::1] phi, double[:, ::1] w1, double[:, ::1] w2,
               double[::1] cot, double[::1] delta_sq,
               double[::1] phi_tab, double[::1] s_tab,
               double[::1] dphids_tab, double[::1] dsdphi_tab,
               int ndim, double two_m, double exp_pow, int p,
               double[::1] out_speed):
    """Flow speed 1/F for an axisymmetric graph (compiled twin).

    Returns (min F, min of delta^2 * v^2 F^2 for the CFL bound, range count).
    """
    cdef Py_ssize_t nt = phi.shape[0]
    cdef Py_ssize_t k = w1.shape[1]
    cdef Py_ssize_t mtab = phi_tab.shape[0]
    cdef Py_ssize_t i, j, idx, lo, hi, mid
    cdef double y, yc, hp, u, s, hs, us, phi_hat, fval
    cdef double dphi, d2, diff, c, vsq, sig, F, cfl
    cdef double fmin = 1e300
    cdef double cflmin = 1e300
    cdef int nviol = 0
    cdef double phi_lo = phi_tab[0]
    cdef double phi_hi = phi_tab[mtab - 1]
    cdef double ahi = phi_hi if phi_hi >= 0.0 else -phi_hi
    cdef double slack = 1e-12 * (ahi if ahi > 1.0 else 1.0)

    ext_arr = np.empty(nt + 2 * p)
    cdef double[::1] ext = ext_arr
    for i in range(p):
        ext[i] = phi[p - 1 - i]
        ext[nt + p + i] = phi[nt - 1 - i]
    for i in range(nt):
        ext[p + i] = phi[i]

    with nogil:
        for i in range(nt):
            c = ext[p + i]
            dphi = 0.0
            d2 = 0.0
            for j in range(k):
                diff = ext[i + j] - c
                dphi += w1[i, j] * diff
                d2 += w2[i, j] * diff
            vsq = 1.0 + dphi * dphi

            # inverse radius lookup: binary search + Hermite + Newton polish
            y = c
            if y < phi_lo - slack or y > phi_hi + slack:
                nviol += 1
            yc = y
            if yc < phi_lo:
                yc = phi_lo
            elif yc > phi_hi:
                yc = phi_hi
            lo = 0
            hi = mtab
            while lo < hi:
                mid = (lo + hi) >> 1
                if phi_tab[mid] <= yc:
                    lo = mid + 1
                else:
                    hi = mid
            idx = lo - 1
            if idx < 0:
                idx = 0
            elif idx > mtab - 2:
                idx = mtab - 2
            hp = phi_tab[idx + 1] - phi_tab[idx]
            u = (yc - phi_tab[idx]) / hp
            s = _hermite(u, s_tab[idx], s_tab[idx + 1],
                         dsdphi_tab[idx], dsdphi_tab[idx + 1], hp)
            hs = s_tab[idx + 1] - s_tab[idx]
            us = (s - s_tab[idx]) / hs
            phi_hat = _hermite(us, phi_tab[idx], phi_tab[idx + 1],
                               dphids_tab[idx], dphids_tab[idx + 1], hs)
            s = s - (phi_hat - yc) * s * sqrt(1.0 - two_m * pow(s, exp_pow))

            fval = sqrt(1.0 - two_m * pow(s, exp_pow))
            sig = d2 + (ndim - 2) * cot[i] * dphi - dphi * dphi * d2 / vsq
            F = ((ndim - 1) * fval - sig) / vsq
            out_speed[i] = 1.0 / F
            if F < fmin:
                fmin = F
            cfl = delta_sq[i] * (vsq * (F * F))
            if cfl < cflmin:
                cflmin = cfl

    return fmin, cflmin, nviol

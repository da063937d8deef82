# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops; see ``_kernels_py`` for the reference semantics."""

import numpy as np
from libc.math cimport isfinite, fmin, fmax

NAME = "cython"

cdef extern from *:
    """
    #if defined(__GNUC__) || defined(__clang__)
    #define SMARTCD_PREFETCH(p) __builtin_prefetch((const void *)(p))
    #else
    #define SMARTCD_PREFETCH(p) ((void)0)
    #endif
    """
    void SMARTCD_PREFETCH(const void *p) noexcept nogil


cdef double _bisect(double tau, double a) noexcept nogil:
    cdef double lo = 0.0, hi = tau, mid
    cdef int it
    for it in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if ((mid + 1.0) * mid + a) * mid - a > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


cdef double _next_tau(double tau) noexcept nogil:
    cdef double a = tau * tau, t = tau, p, dp, nt
    cdef int it
    for it in range(100):
        p = ((t + 1.0) * t + a) * t - a
        if p <= 0.0:
            break
        dp = (3.0 * t + 2.0) * t + a
        nt = t - p / dp
        if not (0.0 < nt < t):
            return _bisect(tau, a)
        t = nt
    return t


def next_tau_lipschitz(double tau):
    return _next_tau(tau)


def schedule_sequence(int regime, double tau0, Py_ssize_t count, double beta1):
    taus_arr = np.empty(count + 1)
    betas_arr = np.empty(count + 1)
    cdef double[::1] taus = taus_arr
    cdef double[::1] betas = betas_arr
    cdef double tau = tau0, beta = beta1
    cdef Py_ssize_t k
    taus[0] = tau
    betas[0] = beta
    with nogil:
        for k in range(1, count + 1):
            if regime == 0:
                tau = _next_tau(tau)
                beta = beta / (1.0 + tau)
            else:
                tau = tau / (1.0 + tau)
                beta = (1.0 - tau) * beta
            taus[k] = tau
            betas[k] = beta
    return taus_arr, betas_arr


def efficient_loop(const long long[::1] blocks,
                   const int[::1] A_indptr, const int[::1] A_indices, const double[::1] A_data,
                   const int[::1] M_indptr, const int[::1] M_indices, const double[::1] M_data,
                   const double[::1] normA2, const double[::1] Lhat,
                   const double[::1] w, const double[::1] bvec,
                   const double[::1] l1, const double[::1] lo, const double[::1] hi,
                   int h_kind, double h_lam, const double[::1] cvec, const double[::1] ydot,
                   int regime, double tau0,
                   double[::1] u, double[::1] z,
                   double[::1] r_uf, double[::1] r_zf, double[::1] r_uh, double[::1] r_zh,
                   double[::1] scal):
    cdef double tau = scal[0], beta = scal[1], c = scal[2], c_prev = scal[3]
    cdef Py_ssize_t it, nit = blocks.shape[0], j, row
    cdef long long i
    cdef int a0, a1, m0, m1
    cdef long long ops = 0
    cdef Py_ssize_t done = 0
    cdef double v, y, grad, step, zi, v0, thr, zn, t, coef, dt
    cdef long long nx
    with nogil:
        for it in range(nit):
            i = blocks[it]
            # sampled order is random, so pull upcoming columns in early:
            # offsets three ahead, column entries two ahead, residual rows one ahead
            if it + 3 < nit:
                nx = blocks[it + 3]
                SMARTCD_PREFETCH(&A_indptr[nx])
                SMARTCD_PREFETCH(&M_indptr[nx])
                SMARTCD_PREFETCH(&z[nx])
                SMARTCD_PREFETCH(&u[nx])
                SMARTCD_PREFETCH(&Lhat[nx])
                SMARTCD_PREFETCH(&normA2[nx])
                SMARTCD_PREFETCH(&w[nx])
                SMARTCD_PREFETCH(&l1[nx])
            if it + 2 < nit:
                nx = blocks[it + 2]
                SMARTCD_PREFETCH(&A_indices[A_indptr[nx]])
                SMARTCD_PREFETCH(&A_data[A_indptr[nx]])
                if M_indptr[nx + 1] > M_indptr[nx]:
                    SMARTCD_PREFETCH(&M_indices[M_indptr[nx]])
                    SMARTCD_PREFETCH(&M_data[M_indptr[nx]])
            if it + 1 < nit:
                nx = blocks[it + 1]
                for j in range(A_indptr[nx], A_indptr[nx + 1]):
                    row = A_indices[j]
                    SMARTCD_PREFETCH(&ydot[row])
                    SMARTCD_PREFETCH(&r_uh[row])
                    SMARTCD_PREFETCH(&r_zh[row])
                for j in range(M_indptr[nx], M_indptr[nx + 1]):
                    row = M_indices[j]
                    SMARTCD_PREFETCH(&r_uf[row])
                    SMARTCD_PREFETCH(&r_zf[row])
                    SMARTCD_PREFETCH(&bvec[row])
            a0 = A_indptr[i]
            a1 = A_indptr[i + 1]
            grad = 0.0
            for j in range(a0, a1):
                row = A_indices[j]
                v = ydot[row] + (c * r_uh[row] + r_zh[row]) / beta
                if h_kind == 0:
                    y = fmin(fmax(v, -h_lam), h_lam)
                else:
                    y = v - cvec[row] / beta
                grad += A_data[j] * y
            grad += w[i]
            m0 = M_indptr[i]
            m1 = M_indptr[i + 1]
            if m1 > m0:
                v = 0.0
                for j in range(m0, m1):
                    row = M_indices[j]
                    v += M_data[j] * (c * r_uf[row] + r_zf[row] - bvec[row])
                grad += v
            step = tau0 / (tau * (Lhat[i] + normA2[i] / beta))
            zi = z[i]
            v0 = zi - step * grad
            if v0 != v0:
                # fmin/fmax below would otherwise swallow a NaN
                break
            thr = l1[i] * step
            if v0 > thr:
                zn = v0 - thr
            elif v0 < -thr:
                zn = v0 + thr
            else:
                zn = 0.0
            zn = fmin(fmax(zn, lo[i]), hi[i])
            if not isfinite(zn):
                break
            t = zn - zi
            z[i] = zn
            coef = (1.0 - tau / tau0) / c
            u[i] -= coef * t
            for j in range(a0, a1):
                row = A_indices[j]
                dt = A_data[j] * t
                r_zh[row] += dt
                r_uh[row] -= coef * dt
            for j in range(m0, m1):
                row = M_indices[j]
                dt = M_data[j] * t
                r_zf[row] += dt
                r_uf[row] -= coef * dt
            ops += (a1 - a0) + (m1 - m0)
            c_prev = c
            if regime == 0:
                tau = _next_tau(tau)
                beta = beta / (1.0 + tau)
            else:
                tau = tau / (1.0 + tau)
                beta = (1.0 - tau) * beta
            c = c * (1.0 - tau)
            done += 1
    scal[0] = tau
    scal[1] = beta
    scal[2] = c
    scal[3] = c_prev
    return done, ops

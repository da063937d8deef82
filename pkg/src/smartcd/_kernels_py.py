"""Pure-Python/numpy implementations of the hot loops.

Mirrors ``_kernels.pyx`` operation for operation; used when the compiled
extension is unavailable or ``SMARTCD_PURE_PYTHON`` is set.
"""

import math

import numpy as np

NAME = "python"


def next_tau_lipschitz(tau):
    a = tau * tau
    t = tau
    for _ in range(100):
        p = ((t + 1.0) * t + a) * t - a
        if p <= 0.0:
            break
        dp = (3.0 * t + 2.0) * t + a
        nt = t - p / dp
        if not 0.0 < nt < t:
            return _bisect(tau, a)
        t = nt
    return t


def _bisect(tau, a):
    lo, hi = 0.0, tau
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if ((mid + 1.0) * mid + a) * mid - a > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def schedule_sequence(regime, tau0, count, beta1):
    taus = np.empty(count + 1)
    betas = np.empty(count + 1)
    tau, beta = tau0, beta1
    taus[0] = tau
    betas[0] = beta
    for k in range(1, count + 1):
        if regime == 0:
            tau = next_tau_lipschitz(tau)
            beta = beta / (1.0 + tau)
        else:
            tau = tau / (1.0 + tau)
            beta = (1.0 - tau) * beta
        taus[k] = tau
        betas[k] = beta
    return taus, betas


def efficient_loop(blocks, A_indptr, A_indices, A_data, M_indptr, M_indices, M_data,
                   normA2, Lhat, w, bvec, l1, lo, hi, h_kind, h_lam, cvec, ydot,
                   regime, tau0, u, z, r_uf, r_zf, r_uh, r_zh, scal):
    """Run ``len(blocks)`` efficient iterations on scalar blocks, in place.

    ``scal`` holds ``[tau, beta_next, c, c_prev]`` and is updated. Returns
    ``(completed, ops)`` where ``ops`` counts touched matrix nonzeros.
    """
    tau, beta, c, c_prev = (float(v) for v in scal)
    ops = 0
    done = 0
    for i in blocks:
        i = int(i)
        a0, a1 = A_indptr[i], A_indptr[i + 1]
        rows = A_indices[a0:a1]
        vals = A_data[a0:a1]
        v = ydot[rows] + (c * r_uh[rows] + r_zh[rows]) / beta
        if h_kind == 0:
            y = np.minimum(np.maximum(v, -h_lam), h_lam)
        else:
            y = v - cvec[rows] / beta
        grad = float(vals @ y) + w[i]
        m0, m1 = M_indptr[i], M_indptr[i + 1]
        mrows = M_indices[m0:m1]
        mvals = M_data[m0:m1]
        if m1 > m0:
            grad += float(mvals @ (c * r_uf[mrows] + r_zf[mrows] - bvec[mrows]))
        step = tau0 / (tau * (Lhat[i] + normA2[i] / beta))
        zi = z[i]
        v0 = zi - step * grad
        if math.isnan(v0):
            # the clamp below would otherwise swallow a NaN
            break
        thr = l1[i] * step
        if v0 > thr:
            zn = v0 - thr
        elif v0 < -thr:
            zn = v0 + thr
        else:
            zn = 0.0
        zn = min(max(zn, lo[i]), hi[i])
        if not math.isfinite(zn):
            break
        t = zn - zi
        z[i] = zn
        coef = (1.0 - tau / tau0) / c
        u[i] -= coef * t
        if a1 > a0:
            dt = vals * t
            r_zh[rows] += dt
            r_uh[rows] -= coef * dt
        if m1 > m0:
            dt = mvals * t
            r_zf[mrows] += dt
            r_uf[mrows] -= coef * dt
        ops += (a1 - a0) + (m1 - m0)
        c_prev = c
        if regime == 0:
            tau = next_tau_lipschitz(tau)
            beta = beta / (1.0 + tau)
        else:
            tau = tau / (1.0 + tau)
            beta = (1.0 - tau) * beta
        c = c * (1.0 - tau)
        done += 1
    scal[0], scal[1], scal[2], scal[3] = tau, beta, c, c_prev
    return done, int(ops)

"""Compiled inner loops for the cubic and PWL circuit variants.

Parameters travel as a flat float64 array so numba sees one signature:

    [r1, c1, c2, l, a, b, c, drive_amplitude, drive_omega]

cubic: a=theta, b=sigma.  PWL: a=inner_slope, b=outer_slope, c=breakpoint.
The pure-Python reference lives in ``dynamics.rhs``/``dynamics.jacobian``;
the test suite checks that both paths agree.
"""

import math

import numpy as np
from numba import njit

CUBIC = 0
PWL = 1

OK = 0
NONFINITE = 1
RUNAWAY = 2


@njit(cache=True)
def deriv(t, phi, v1, v2, il, p, kind):
    vm = v1
    if p[7] != 0.0:
        vm = v1 - p[7] * math.sin(p[8] * t)
    if kind == CUBIC:
        i = (p[4] + p[5] * phi * phi) * vm
    else:
        i = p[5] * vm + 0.5 * (p[4] - p[5]) * (abs(vm + p[6]) - abs(vm - p[6]))
    return (
        vm,
        ((v2 - v1) / p[0] - i) / p[1],
        ((v1 - v2) / p[0] - il) / p[2],
        v2 / p[3],
    )


@njit(cache=True)
def jac(t, phi, v1, v2, il, p, kind, out):
    vm = v1
    if p[7] != 0.0:
        vm = v1 - p[7] * math.sin(p[8] * t)
    if kind == CUBIC:
        di_dphi = 2.0 * p[5] * phi * vm
        di_dv1 = p[4] + p[5] * phi * phi
    else:
        di_dphi = 0.0
        di_dv1 = p[4] if abs(vm) < p[6] else p[5]
    out[:, :] = 0.0
    out[0, 1] = 1.0
    out[1, 0] = -di_dphi / p[1]
    out[1, 1] = (-1.0 / p[0] - di_dv1) / p[1]
    out[1, 2] = 1.0 / (p[0] * p[1])
    out[2, 1] = 1.0 / (p[0] * p[2])
    out[2, 2] = -1.0 / (p[0] * p[2])
    out[2, 3] = -1.0 / p[2]
    out[3, 2] = 1.0 / p[3]


@njit(cache=True)
def _status(phi, v1, v2, il, limit):
    if not (math.isfinite(phi) and math.isfinite(v1) and math.isfinite(v2) and math.isfinite(il)):
        return NONFINITE
    if abs(phi) > limit or abs(v1) > limit or abs(v2) > limit or abs(il) > limit:
        return RUNAWAY
    return OK


@njit(cache=True)
def _rk4(t, phi, v1, v2, il, dt, p, kind):
    h = 0.5 * dt
    a1, b1, c1, d1 = deriv(t, phi, v1, v2, il, p, kind)
    a2, b2, c2, d2 = deriv(t + h, phi + h * a1, v1 + h * b1, v2 + h * c1, il + h * d1, p, kind)
    a3, b3, c3, d3 = deriv(t + h, phi + h * a2, v1 + h * b2, v2 + h * c2, il + h * d2, p, kind)
    a4, b4, c4, d4 = deriv(t + dt, phi + dt * a3, v1 + dt * b3, v2 + dt * c3, il + dt * d3, p, kind)
    s = dt / 6.0
    return (
        phi + s * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
        v1 + s * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
        v2 + s * (c1 + 2.0 * c2 + 2.0 * c3 + c4),
        il + s * (d1 + 2.0 * d2 + 2.0 * d3 + d4),
    )


@njit(cache=True)
def step(t, x, dt, p, kind):
    phi, v1, v2, il = _rk4(t, x[0], x[1], x[2], x[3], dt, p, kind)
    return np.array([phi, v1, v2, il])


@njit(cache=True)
def integrate(x0, t0, dt, n_skip, n_rec, every, p, kind, limit):
    """Record the state at steps n_skip, n_skip+every, ... (n_rec rows).

    Returns (samples, n_filled, status, t_fail).
    """
    out = np.empty((n_rec, 4))
    phi, v1, v2, il = x0[0], x0[1], x0[2], x0[3]
    last = n_skip + (n_rec - 1) * every
    k = 0
    for i in range(last + 1):
        if i >= n_skip and (i - n_skip) % every == 0:
            out[k, 0] = phi
            out[k, 1] = v1
            out[k, 2] = v2
            out[k, 3] = il
            k += 1
        if i == last:
            break
        t = t0 + i * dt
        phi, v1, v2, il = _rk4(t, phi, v1, v2, il, dt, p, kind)
        st = _status(phi, v1, v2, il, limit)
        if st != OK:
            return out, k, st, t0 + (i + 1) * dt
    return out, k, OK, t0 + last * dt


@njit(cache=True)
def _matmul4(a, b, out):
    for i in range(4):
        for j in range(4):
            s = 0.0
            for k in range(4):
                s += a[i, k] * b[k, j]
            out[i, j] = s


@njit(cache=True)
def gram_schmidt(q, norms):
    """Modified Gram-Schmidt on the columns of ``q`` in place."""
    n = q.shape[1]
    for j in range(n):
        for k in range(j):
            d = 0.0
            for i in range(q.shape[0]):
                d += q[i, j] * q[i, k]
            for i in range(q.shape[0]):
                q[i, j] -= d * q[i, k]
        nrm = 0.0
        for i in range(q.shape[0]):
            nrm += q[i, j] * q[i, j]
        nrm = math.sqrt(nrm)
        norms[j] = nrm
        for i in range(q.shape[0]):
            q[i, j] /= nrm


@njit(cache=True)
def lyapunov(x0, t0, dt, n_skip, n_blocks, renorm, p, kind, limit):
    """Benettin spectrum with the variational equation co-integrated by RK4.

    Returns (log_sums, history, trace_integral, x_final, status, t_fail);
    history rows are (elapsed, running estimates in Gram-Schmidt order).
    """
    phi, v1, v2, il = x0[0], x0[1], x0[2], x0[3]
    hist = np.zeros((n_blocks, 5))
    sums = np.zeros(4)
    xf = np.empty(4)
    for i in range(n_skip):
        phi, v1, v2, il = _rk4(t0 + i * dt, phi, v1, v2, il, dt, p, kind)
        st = _status(phi, v1, v2, il, limit)
        if st != OK:
            return sums, hist, 0.0, xf, st, t0 + (i + 1) * dt

    q = np.eye(4)
    qs = np.empty((4, 4))
    j1 = np.empty((4, 4))
    j2 = np.empty((4, 4))
    j3 = np.empty((4, 4))
    j4 = np.empty((4, 4))
    k1 = np.empty((4, 4))
    k2 = np.empty((4, 4))
    k3 = np.empty((4, 4))
    k4 = np.empty((4, 4))
    norms = np.empty(4)
    h = 0.5 * dt
    trace_int = 0.0
    n = 0
    jac(t0 + n_skip * dt, phi, v1, v2, il, p, kind, j1)
    tr_prev = j1[0, 0] + j1[1, 1] + j1[2, 2] + j1[3, 3]
    for b in range(n_blocks):
        for r in range(renorm):
            t = t0 + (n_skip + n) * dt
            # j1 already holds the Jacobian at the current state
            a1, b1, c1, d1 = deriv(t, phi, v1, v2, il, p, kind)
            _matmul4(j1, q, k1)
            pa, va, wa, ia = phi + h * a1, v1 + h * b1, v2 + h * c1, il + h * d1
            a2, b2, c2, d2 = deriv(t + h, pa, va, wa, ia, p, kind)
            jac(t + h, pa, va, wa, ia, p, kind, j2)
            for i in range(4):
                for j in range(4):
                    qs[i, j] = q[i, j] + h * k1[i, j]
            _matmul4(j2, qs, k2)
            pa, va, wa, ia = phi + h * a2, v1 + h * b2, v2 + h * c2, il + h * d2
            a3, b3, c3, d3 = deriv(t + h, pa, va, wa, ia, p, kind)
            jac(t + h, pa, va, wa, ia, p, kind, j3)
            for i in range(4):
                for j in range(4):
                    qs[i, j] = q[i, j] + h * k2[i, j]
            _matmul4(j3, qs, k3)
            pa, va, wa, ia = phi + dt * a3, v1 + dt * b3, v2 + dt * c3, il + dt * d3
            a4, b4, c4, d4 = deriv(t + dt, pa, va, wa, ia, p, kind)
            jac(t + dt, pa, va, wa, ia, p, kind, j4)
            for i in range(4):
                for j in range(4):
                    qs[i, j] = q[i, j] + dt * k3[i, j]
            _matmul4(j4, qs, k4)
            s = dt / 6.0
            phi += s * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            v1 += s * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
            v2 += s * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
            il += s * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
            for i in range(4):
                for j in range(4):
                    q[i, j] += s * (k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])
            n += 1
            jac(t0 + (n_skip + n) * dt, phi, v1, v2, il, p, kind, j1)
            tr = j1[0, 0] + j1[1, 1] + j1[2, 2] + j1[3, 3]
            trace_int += 0.5 * dt * (tr_prev + tr)
            tr_prev = tr
            st = _status(phi, v1, v2, il, limit)
            if st != OK:
                return sums, hist, trace_int, xf, st, t0 + (n_skip + n) * dt
        gram_schmidt(q, norms)
        elapsed = n * dt
        hist[b, 0] = elapsed
        for k in range(4):
            sums[k] += math.log(norms[k])
            hist[b, k + 1] = sums[k] / elapsed
    xf[0], xf[1], xf[2], xf[3] = phi, v1, v2, il
    return sums, hist, trace_int, xf, OK, t0 + (n_skip + n) * dt

"""Compiled right-hand side and fixed-step RK4 loop of the nonlinear model."""
import math

import numpy as np
from numba import njit

# state layout
I_D, I_Q, DTHETA, X_PSL, Z1_D, Z1_Q, Z2_D, Z2_Q, FF_D, FF_Q, X_QF, X_PF, X_PI = range(13)
N_STATE = 13
# parameter layout, same order as ControllerParams fields
(K_M, T_D, M_, K_P, K_PI, A_P, K_Q, A_Q, L_, R_A, A_A, A_F, W1, E_SET, P_REF,
 Q_REF) = range(16)
# grid layout: mode (0 forced PCC voltage, 1 series RL closure), R_g, L_g, vg_d, vg_q
# perturbation layout: axis (0 none, 1 d, 2 q), amplitude, omega, t_start, dE_d, dE_q
# output layout
N_OUT = 8  # i_d, i_q, P, Q, E_d, E_q, E_ref, dtheta
DIVERGENCE = 1e3


@njit(cache=True, nogil=True)
def _injection(t, pert):
    axis = pert[0]
    ed = pert[4]
    eq = pert[5]
    if axis != 0.0 and t >= pert[3]:
        val = pert[1] * math.cos(pert[2] * (t - pert[3]))
        if axis == 1.0:
            ed += val
        else:
            eq += val
    return ed, eq


@njit(cache=True, nogil=True)
def _eval(t, x, p, g, pert, dx, y):
    """Fill dx (derivatives) and y (outputs) at time t."""
    i = complex(x[I_D], x[I_Q])
    th = x[DTHETA]
    rot = complex(math.cos(th), math.sin(th))  # e^{j dtheta}
    w1 = p[W1]
    L = p[L_]
    Ra = p[R_A]
    i0 = complex(p[P_REF], -p[Q_REF]) / p[E_SET]

    # converter voltage from states only
    ic = i * rot.conjugate()
    z2 = complex(x[Z2_D], x[Z2_Q])
    ff = complex(x[FF_D], x[FF_Q])
    iref = i0 + z2
    vc = Ra * (iref - ic) + 1j * w1 * L * ic + ff
    v = vc * rot

    if g[0] == 0.0:
        ed, eq = _injection(t, pert)
        E = complex(p[E_SET] + ed, eq)
        di = (v - E - 1j * w1 * L * i) / L
    else:
        ed, eq = _injection(t, pert)
        vg = complex(g[3] + ed, g[4] + eq)
        Rg = g[1]
        Lg = g[2]
        Lt = L + Lg
        di = (v - vg - (Rg + 1j * w1 * Lt) * i) / Lt
        E = vg + (Rg + 1j * w1 * Lg) * i + Lg * di

    S = E * i.conjugate()
    P = S.real
    Q = S.imag
    Ec = E * rot.conjugate()

    u = p[P_REF] - P
    Eref = (p[E_SET] + p[K_Q] * (p[Q_REF] - x[X_QF]) + p[K_P] * (p[P_REF] - x[X_PF])
            + x[X_PI])
    e = Eref - Ec
    z1 = complex(x[Z1_D], x[Z1_Q])
    dz2 = (e + p[A_A] * z1 - Ra * z2) / L
    dff = p[A_F] * (Ec - ff)

    dx[I_D] = di.real
    dx[I_Q] = di.imag
    dx[DTHETA] = (p[T_D] / p[M_]) * u + (1.0 - p[K_M] * p[T_D] / p[M_]) * x[X_PSL]
    dx[X_PSL] = (u - p[K_M] * x[X_PSL]) / p[M_]
    dx[Z1_D] = e.real
    dx[Z1_Q] = e.imag
    dx[Z2_D] = dz2.real
    dx[Z2_Q] = dz2.imag
    dx[FF_D] = dff.real
    dx[FF_Q] = dff.imag
    dx[X_QF] = p[A_Q] * (Q - x[X_QF])
    dx[X_PF] = p[A_P] * (P - x[X_PF])
    dx[X_PI] = p[K_PI] * (p[P_REF] - x[X_PF])

    y[0] = i.real
    y[1] = i.imag
    y[2] = P
    y[3] = Q
    y[4] = E.real
    y[5] = E.imag
    y[6] = Eref
    y[7] = th


@njit(cache=True, nogil=True)
def rk4_step(t, x, dt, p, g, pert, out):
    n = x.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    y = np.empty(N_OUT)
    _eval(t, x, p, g, pert, k1, y)
    for j in range(n):
        tmp[j] = x[j] + 0.5 * dt * k1[j]
    _eval(t + 0.5 * dt, tmp, p, g, pert, k2, y)
    for j in range(n):
        tmp[j] = x[j] + 0.5 * dt * k2[j]
    _eval(t + 0.5 * dt, tmp, p, g, pert, k3, y)
    for j in range(n):
        tmp[j] = x[j] + dt * k3[j]
    _eval(t + dt, tmp, p, g, pert, k4, y)
    for j in range(n):
        out[j] = x[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])


@njit(cache=True, nogil=True)
def integrate(x, t0, dt, nsteps, p, g, pert, decim, phase, rec):
    """
    Advance x in place by nsteps RK4 steps from t0.

    Outputs at local steps k with (k + phase) % decim == 0 are written into
    ``rec`` (rows: t followed by the N_OUT outputs). Returns the number of
    completed steps; fewer than nsteps means the state diverged.

    """
    n = x.shape[0]
    nxt = np.empty(n)
    dx = np.empty(n)
    y = np.empty(N_OUT)
    r = 0
    for k in range(nsteps + 1):
        t = t0 + k * dt
        if decim > 0 and (k + phase) % decim == 0:
            _eval(t, x, p, g, pert, dx, y)
            rec[r, 0] = t
            for j in range(N_OUT):
                rec[r, j + 1] = y[j]
            r += 1
        if k == nsteps:
            break
        rk4_step(t, x, dt, p, g, pert, nxt)
        ok = True
        for j in range(n):
            if not (abs(nxt[j]) <= DIVERGENCE):
                ok = False
        if not ok:
            return k
        for j in range(n):
            x[j] = nxt[j]
    return nsteps


@njit(cache=True, nogil=True)
def project(x, t0, dt, nsteps, p, g, pert, omega, nper, acc):
    """
    Integrate nsteps while accumulating single-bin DFT sums of i_d, i_q.

    The run is cut into ``nper`` equal blocks; acc[b, 0:2] holds
    sum(i_d e^{-jwt}), sum(i_q e^{-jwt}) for block b (rectangle rule, which is
    exact for an integer number of samples per period). Returns completed steps.
    """
    n = x.shape[0]
    nxt = np.empty(n)
    per = nsteps // nper
    for k in range(nsteps):
        t = t0 + k * dt
        b = k // per
        ph = complex(math.cos(omega * (t - pert[3])), -math.sin(omega * (t - pert[3])))
        acc[b, 0] += x[I_D] * ph
        acc[b, 1] += x[I_Q] * ph
        rk4_step(t, x, dt, p, g, pert, nxt)
        for j in range(n):
            if not (abs(nxt[j]) <= DIVERGENCE):
                return k
        for j in range(n):
            x[j] = nxt[j]
    return nsteps


@njit(cache=True, nogil=True)
def rhs(t, x, p, g, pert):
    dx = np.empty(x.shape[0])
    y = np.empty(N_OUT)
    _eval(t, x, p, g, pert, dx, y)
    return dx


@njit(cache=True, nogil=True)
def outputs(t, x, p, g, pert):
    dx = np.empty(x.shape[0])
    y = np.empty(N_OUT)
    _eval(t, x, p, g, pert, dx, y)
    return y

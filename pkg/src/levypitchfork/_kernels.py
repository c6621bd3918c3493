"""Compiled inner loops shared by the integrators and ensemble drivers.

Every kernel advances the scalar model one grid cell at a time with the
same split step: the drift sub-step uses the closed-form flow of
dx = (beta x - x^3) dt, then the cell's noise increment is added.  For the
cubic drift the flow over a cell of length h is

    x -> x * exp(beta h) / sqrt(1 + k x^2),   k = expm1(2 beta h) / beta,

and the integral of x(s)^2 along that sub-flow is log1p(k x^2) / 2, which
gives the exact per-cell contribution to the log of the linearized
cocycle.
"""

import math

import numpy as np
from numba import njit

_BIG = 1e300


def flow_constants(beta, h, cubic=True):
    """Return (exp(beta h), k) for the closed-form drift flow over one cell."""
    e1 = math.exp(beta * h)
    if not cubic:
        return e1, 0.0
    if beta == 0.0:
        return e1, 2.0 * h
    return e1, math.expm1(2.0 * beta * h) / beta


@njit(cache=True, nogil=True)
def drift_flow(x, e1, k):
    xx = x * x
    if xx > _BIG:
        if k > 0.0:
            return math.copysign(e1 / math.sqrt(k), x)
        return x * e1
    return x * e1 / math.sqrt(1.0 + k * xx)


@njit(cache=True, nogil=True)
def tamed_drift(x, beta, h, cubic):
    b = beta * x - cubic * x * x * x
    return x + h * b / (1.0 + h * abs(b))


@njit(cache=True, nogil=True)
def cell_log_cocycle(x, beta_h, k):
    # beta*h - 3 * integral of x(s)^2 over the drift sub-flow
    xx = x * x
    if k == 0.0:
        return beta_h
    if xx > _BIG:
        return beta_h - 1.5 * (math.log(k) + 2.0 * math.log(abs(x)))
    return beta_h - 1.5 * math.log1p(k * xx)


@njit(cache=True, nogil=True)
def _advance(x, tamed, e1, k, beta, h, cubic):
    if tamed:
        return tamed_drift(x, beta, h, cubic)
    return drift_flow(x, e1, k)


@njit(cache=True, nogil=True)
def integrate_states(x0, sigma, dL, tamed, e1, k, beta, h, cubic):
    n = dL.shape[0]
    out = np.empty(n + 1)
    x = x0
    out[0] = x
    for i in range(n):
        x = _advance(x, tamed, e1, k, beta, h, cubic) + sigma * dL[i]
        out[i + 1] = x
    return out


@njit(cache=True, nogil=True)
def pullback_pair(lo, hi, sigma, past, n, e1, k):
    """Advance two points from -n*h to 0.

    ``past`` holds cell increments in reverse time order: past[0] is the
    cell just before time 0.
    """
    for i in range(n - 1, -1, -1):
        inc = sigma * past[i]
        lo = drift_flow(lo, e1, k) + inc
        hi = drift_flow(hi, e1, k) + inc
    return lo, hi


@njit(cache=True, nogil=True)
def forward_stats(a0, sigma, dL, n, checkpoints, e1, k, beta_h):
    """Track state, log-cocycle and running max |state| at checkpoint nodes."""
    m = checkpoints.shape[0]
    a_out = np.empty(m)
    log_out = np.empty(m)
    max_out = np.empty(m)
    a = a0
    logc = 0.0
    runmax = abs(a0)
    j = 0
    while j < m and checkpoints[j] == 0:
        a_out[j] = a
        log_out[j] = 0.0
        max_out[j] = runmax
        j += 1
    for i in range(n):
        if j >= m:
            break
        logc += cell_log_cocycle(a, beta_h, k)
        a = drift_flow(a, e1, k) + sigma * dL[i]
        if abs(a) > runmax:
            runmax = abs(a)
        while j < m and checkpoints[j] == i + 1:
            a_out[j] = a
            log_out[j] = logc
            max_out[j] = runmax
            j += 1
    return a_out, log_out, max_out


@njit(cache=True, nogil=True)
def forward_pair(x0, a0, sigma, dL, n, checkpoints, gap_from, e1, k):
    """Advance two points on common noise.

    Returns both states at the checkpoint nodes and the largest gap |x - a|
    seen at nodes with index >= gap_from.
    """
    m = checkpoints.shape[0]
    x_out = np.empty(m)
    a_out = np.empty(m)
    x = x0
    a = a0
    maxgap = abs(x - a) if gap_from <= 0 else 0.0
    j = 0
    while j < m and checkpoints[j] == 0:
        x_out[j] = x
        a_out[j] = a
        j += 1
    for i in range(n):
        inc = sigma * dL[i]
        x = drift_flow(x, e1, k) + inc
        a = drift_flow(a, e1, k) + inc
        if i + 1 >= gap_from:
            g = abs(x - a)
            if g > maxgap:
                maxgap = g
        while j < m and checkpoints[j] == i + 1:
            x_out[j] = x
            a_out[j] = a
            j += 1
    return x_out, a_out, maxgap


@njit(cache=True, nogil=True)
def cocycle_increments(a0, sigma, dL, e1, k, beta_h, out):
    """Write per-cell log-cocycle increments into ``out``; return final state."""
    a = a0
    for i in range(dL.shape[0]):
        out[i] = cell_log_cocycle(a, beta_h, k)
        a = drift_flow(a, e1, k) + sigma * dL[i]
    return a


@njit(cache=True, nogil=True)
def trajectory_log_cocycle(states, upto, beta_h, k):
    total = 0.0
    for i in range(upto):
        total += cell_log_cocycle(states[i], beta_h, k)
    return total


@njit(cache=True, nogil=True)
def gth_banded(rates, bw):
    """Log of the stationary vector of a banded generator by GTH elimination.

    ``rates[i, d]`` is the jump rate from state i to state i + d - bw.  The
    elimination never subtracts, so every entry is positive (finite log)
    whenever the chain is irreducible.  The array is overwritten.
    """
    n = rates.shape[0]
    for kk in range(n - 1, 0, -1):
        lo = max(0, kk - bw)
        s = 0.0
        for j in range(lo, kk):
            s += rates[kk, j - kk + bw]
        for i in range(lo, kk):
            rates[i, kk - i + bw] /= s
        for i in range(lo, kk):
            f = rates[i, kk - i + bw]
            if f == 0.0:
                continue
            for j in range(lo, kk):
                if j != i:
                    rates[i, j - i + bw] += f * rates[kk, j - kk + bw]
    # back-substitution in log space so deep tails stay representable
    lp = np.empty(n)
    lp[0] = 0.0
    for kk in range(1, n):
        lo = max(0, kk - bw)
        m = -np.inf
        for i in range(lo, kk):
            r = rates[i, kk - i + bw]
            if r > 0.0:
                v = lp[i] + math.log(r)
                if v > m:
                    m = v
        acc = 0.0
        for i in range(lo, kk):
            r = rates[i, kk - i + bw]
            if r > 0.0:
                acc += math.exp(lp[i] + math.log(r) - m)
        lp[kk] = m + math.log(acc) if acc > 0.0 else -np.inf
    m = lp.max()
    total = 0.0
    for i in range(n):
        total += math.exp(lp[i] - m)
    shift = m + math.log(total)
    for i in range(n):
        lp[i] -= shift
    return lp

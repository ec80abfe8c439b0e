"""JIT-compiled inner loops for the online policies.

The dual update is inherently sequential (each decision depends on the
price left by the previous step), so the hot loops live here as numba
kernels over pre-generated arrival arrays.  Call ``warmup()`` once before
timing anything; compiled code is cached on disk afterwards.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# Stepsize schedule tags shared with algorithms.py.
SCHED_CONST = 0
SCHED_INV_T = 1       # 1 / (mu * t), t = 1-based step within the run
SCHED_INV_T1 = 2      # 1 / (mu * (t + 1))

DYKSTRA_TOL = 1e-12
DYKSTRA_MAX_ITERS = 4000


@njit(cache=True)
def proj_orthant_ball0(v, radius):
    """Exact projection onto {y >= 0, ||y|| <= radius} (clip then scale)."""
    w = np.maximum(v, 0.0)
    nw = np.sqrt(np.sum(w * w))
    if nw > radius:
        w *= radius / nw
    return w


@njit(cache=True)
def proj_capped_ball(v, radius0, center, radius_c):
    """Exact projection onto {y >= 0, ||y|| <= radius0} ∩ B(center, radius_c).

    Dykstra alternation between the two sets (each has a closed-form
    projector); radius0 may be inf to drop the origin ball.  Converges to
    the Euclidean projection, tolerance DYKSTRA_TOL on iterate movement.
    """
    x = v.copy()
    p = np.zeros_like(v)
    q = np.zeros_like(v)
    for _ in range(DYKSTRA_MAX_ITERS):
        s = proj_orthant_ball0(x + p, radius0)
        p_new = x + p - s
        w = s + q - center
        nw = np.sqrt(np.sum(w * w))
        if nw > radius_c:
            xn = center + w * (radius_c / nw)
        else:
            xn = s + q
        q_new = s + q - xn
        # The iterate can sit still while the correction terms rotate, so
        # convergence requires every tracked quantity to settle.
        move = 0.0
        for i in range(v.shape[0]):
            for dm in (abs(xn[i] - x[i]), abs(p_new[i] - p[i]), abs(q_new[i] - q[i])):
                if dm > move:
                    move = dm
        x = xn
        p = p_new
        q = q_new
        if move < DYKSTRA_TOL:
            break
    return x


@njit(cache=True)
def subgradient_loop(rewards, requests, d, y, sched, alpha, mu, t_global0,
                     log_ts, log_ys):
    """One pass of the projected-subgradient policy over an arrival block.

    Decides x_t = 1{c_t >= <a_t, y>}, updates y with stepsize per ``sched``
    (local 1-based step for the inverse-time rules), and snapshots y into
    ``log_ys`` at the 1-based global times ``log_ts`` (t_global0 = steps
    already consumed before this block).  Returns (decisions, revenue,
    consumption); y is updated in place.
    """
    T = rewards.shape[0]
    m = d.shape[0]
    x = np.zeros(T)
    rev = 0.0
    cons = np.zeros(m)
    li = 0
    while li < log_ts.shape[0] and log_ts[li] <= t_global0:
        li += 1
    for t in range(T):
        if sched == SCHED_CONST:
            at = alpha
        elif sched == SCHED_INV_T:
            at = 1.0 / (mu * (t + 1.0))
        else:
            at = 1.0 / (mu * (t + 2.0))
        price = 0.0
        for i in range(m):
            price += requests[t, i] * y[i]
        if rewards[t] >= price:
            x[t] = 1.0
            rev += rewards[t]
            for i in range(m):
                cons[i] += requests[t, i]
                v = y[i] - at * (d[i] - requests[t, i])
                y[i] = v if v > 0.0 else 0.0
        else:
            for i in range(m):
                v = y[i] - at * d[i]
                y[i] = v if v > 0.0 else 0.0
        if li < log_ts.shape[0] and log_ts[li] == t_global0 + t + 1:
            for i in range(m):
                log_ys[li, i] = y[i]
            li += 1
    return x, rev, cons


@njit(cache=True)
def assg_loop(rewards, requests, d, y0, inner_counts, eta1, d1, radius):
    """Shrinking-ball stochastic subgradient rounds.

    Round k runs inner_counts[k] projected steps onto
    {y >= 0, ||y|| <= radius} ∩ B(center_k, D_k) with stepsize eta_k,
    outputs the mean of the post-update iterates, then halves eta and D.
    Consumes sum(inner_counts) arrivals in order; returns the final round
    average.
    """
    m = d.shape[0]
    center = y0.copy()
    eta = eta1
    dk = d1
    pos = 0
    for k in range(inner_counts.shape[0]):
        tk = inner_counts[k]
        y = center.copy()
        ysum = np.zeros(m)
        for _ in range(tk):
            price = 0.0
            for i in range(m):
                price += requests[pos, i] * y[i]
            xx = 1.0 if rewards[pos] >= price else 0.0
            v = np.empty(m)
            for i in range(m):
                v[i] = y[i] - eta * (d[i] - requests[pos, i] * xx)
            y = proj_capped_ball(v, radius, center, dk)
            ysum += y
            pos += 1
        center = ysum / tk
        eta *= 0.5
        dk *= 0.5
    return center


_warm = False


def warmup():
    """Compile (or load from cache) every kernel on toy inputs."""
    global _warm
    if _warm:
        return
    c = np.array([0.5, 0.1])
    a = np.array([[1.0], [1.0]])
    d = np.array([0.5])
    subgradient_loop(c, a, d, np.zeros(1), SCHED_CONST, 0.1, 1.0, 0,
                     np.array([1], dtype=np.int64), np.zeros((1, 1)))
    subgradient_loop(c, a, d, np.zeros(1), SCHED_INV_T, 0.0, 1.0, 0,
                     np.empty(0, dtype=np.int64), np.zeros((0, 1)))
    assg_loop(c, a, d, np.zeros(1), np.array([2], dtype=np.int64), 0.1, 1.0, 3.0)
    proj_capped_ball(np.array([-1.0, 2.0]), np.inf, np.zeros(2), 1.0)
    _warm = True

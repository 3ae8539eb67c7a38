"""Hot event loop for the exclusion dynamics, JIT-compiled with numba.

The kernel consumes pre-drawn randomness (one exponential, one uniform site
pick and one uniform direction coin per clock ring) so that all stochastic
state lives in the caller's numpy generator and trajectories are bit
reproducible regardless of snapshot boundaries or buffer refills.

Rejection dynamics: rings arrive at constant total rate 2K (K = particle
count, conserved); each ring picks a uniform particle, proposes a move right
with probability (1 + F(x/n)/n)/2, left otherwise, and moves only if the
target site is empty.  Per directed bond this reproduces the rate
(1 +/- F(x/n)/n) * eta(x) * (1 - eta(x +/- 1)).

Return codes: 0 = reached t_end, 1 = randomness buffers exhausted,
2 = origin flip buffer full (pending event not yet executed).
"""
from __future__ import annotations

import numpy as np
from numba import njit

__all__ = ["advance", "dynkin_state"]


@njit(cache=True)
def advance(
    eta,            # uint8[n] occupation
    positions,      # int64[K] site of each particle slot
    p_right,        # float64[n] right-jump probability per site
    t_end,          # micro time to advance to
    clock,          # float64[2]: [0] absolute time of pending ring, [1] drift accumulation mark
    idx,            # int64[1] consumed index into the randomness buffers
    stats,          # int64[1] executed ring count
    exps,           # float64[B] Exp(1) draws (next waiting time after each ring)
    picks,          # float64[B] U[0,1) particle picks
    coins,          # float64[B] U[0,1) direction coins
    flips,          # float64[cap] origin flip times (micro), filled in order
    nflips,         # int64[1] number of recorded flips
    use_drift_sum,  # bool: maintain the generator-sum accumulator
    lap,            # float64[n] second-difference coefficients of the test function
    c1,             # float64[n] bond coefficient on eta_b (1 - eta_{b+1})
    c2,             # float64[n] bond coefficient on eta_{b+1} (1 - eta_b)
    acc,            # float64[2]: [0] integral of S over micro time, [1] current S
):
    n = eta.size
    K = positions.size
    rate = 2.0 * K
    i = idx[0]
    t_next = clock[0]
    m = nflips[0]
    cap = flips.size
    B = exps.size
    count = stats[0]
    a_int = acc[0]
    s_cur = acc[1]
    t_mark = clock[1]

    while t_next <= t_end:
        if i >= B:
            idx[0] = i
            clock[0] = t_next
            nflips[0] = m
            stats[0] = count
            acc[0] = a_int
            acc[1] = s_cur
            clock[1] = t_mark
            return 1
        u = picks[i] * K
        j = int(u)
        if j == K:
            j = K - 1
        x = positions[j]
        if coins[i] < p_right[x]:
            y = x + 1
            if y == n:
                y = 0
        else:
            y = x - 1
            if y < 0:
                y = n - 1
        if eta[y] == 0:
            if x == 0 or y == 0:
                if m >= cap:
                    # leave the pending ring unconsumed; caller grows the buffer
                    idx[0] = i
                    clock[0] = t_next
                    nflips[0] = m
                    stats[0] = count
                    acc[0] = a_int
                    acc[1] = s_cur
                    clock[1] = t_mark
                    return 2
                flips[m] = t_next
                m += 1
            if use_drift_sum:
                a_int += s_cur * (t_next - t_mark)
                t_mark = t_next
                if y == x + 1 or (x == n - 1 and y == 0):
                    b0 = x - 1
                    if b0 < 0:
                        b0 = n - 1
                    b1 = x
                    b2 = y
                else:
                    b0 = y - 1
                    if b0 < 0:
                        b0 = n - 1
                    b1 = y
                    b2 = x
                old = 0.0
                for b in (b0, b1, b2):
                    bn = b + 1
                    if bn == n:
                        bn = 0
                    old += c1[b] * eta[b] * (1 - eta[bn]) + c2[b] * eta[bn] * (1 - eta[b])
                eta[x] = 0
                eta[y] = 1
                new = 0.0
                for b in (b0, b1, b2):
                    bn = b + 1
                    if bn == n:
                        bn = 0
                    new += c1[b] * eta[b] * (1 - eta[bn]) + c2[b] * eta[bn] * (1 - eta[b])
                s_cur += (new - old) + (lap[y] - lap[x])
            else:
                eta[x] = 0
                eta[y] = 1
            positions[j] = y
        count += 1
        t_next = t_next + exps[i] / rate
        i += 1

    if use_drift_sum:
        a_int += s_cur * (t_end - t_mark)
        t_mark = t_end
    idx[0] = i
    clock[0] = t_next
    nflips[0] = m
    stats[0] = count
    acc[0] = a_int
    acc[1] = s_cur
    clock[1] = t_mark
    return 0


def dynkin_state(eta: np.ndarray, lap: np.ndarray, c1: np.ndarray, c2: np.ndarray) -> float:
    """Current value of the generator sum S maintained by the kernel."""
    e = eta.astype(np.float64)
    en = np.roll(e, -1)
    return float(np.dot(e, lap) + np.sum(c1 * e * (1.0 - en) + c2 * en * (1.0 - e)))


# ---------------------------------------------------------------------------
# RK4 steppers for the density equation and its backward evolution
# ---------------------------------------------------------------------------


@njit(cache=True)
def _flux_rhs(rho, f_iface, out, flux, m):
    for j in range(m):
        jn = j + 1 if j + 1 < m else 0
        mid = 0.5 * (rho[j] + rho[jn])
        flux[j] = (rho[jn] - rho[j]) * m - 2.0 * mid * (1.0 - mid) * f_iface[j]
    for j in range(m):
        jp = j - 1 if j > 0 else m - 1
        out[j] = (flux[j] - flux[jp]) * m


@njit(cache=True)
def hydro_run(rho, f_iface, dt, n_steps, store_times, stored, guard_lo, guard_hi):
    """Advance the density in place, recording at store_times (linear blend).

    Returns (blowup_step, grad_bound, min_gap, mass_drift); blowup_step is
    -1 when the run stayed inside the guard band.
    """
    m = rho.size
    flux = np.empty(m)
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    tmp = np.empty(m)

    mass0 = 0.0
    for j in range(m):
        mass0 += rho[j]
    mass0 /= m

    grad_bound = 0.0
    min_gap = 1.0
    for j in range(m):
        jn = j + 1 if j + 1 < m else 0
        d = abs(rho[jn] - rho[j]) * m
        if d > grad_bound:
            grad_bound = d
        gap = rho[j] if rho[j] < 1.0 - rho[j] else 1.0 - rho[j]
        if gap < min_gap:
            min_gap = gap
    mass_drift = 0.0

    next_store = 1
    n_stores = store_times.size
    t = 0.0
    for step in range(n_steps):
        _flux_rhs(rho, f_iface, k1, flux, m)
        for j in range(m):
            tmp[j] = rho[j] + 0.5 * dt * k1[j]
        _flux_rhs(tmp, f_iface, k2, flux, m)
        for j in range(m):
            tmp[j] = rho[j] + 0.5 * dt * k2[j]
        _flux_rhs(tmp, f_iface, k3, flux, m)
        for j in range(m):
            tmp[j] = rho[j] + dt * k3[j]
        _flux_rhs(tmp, f_iface, k4, flux, m)
        for j in range(m):
            tmp[j] = rho[j] + (dt / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
        t_new = t + dt
        while next_store < n_stores and store_times[next_store] <= t_new + 1e-12:
            w = (store_times[next_store] - t) / dt
            for j in range(m):
                stored[next_store, j] = (1.0 - w) * rho[j] + w * tmp[j]
            next_store += 1
        for j in range(m):
            rho[j] = tmp[j]
        t = t_new
        lo = rho[0]
        hi = rho[0]
        for j in range(1, m):
            if rho[j] < lo:
                lo = rho[j]
            if rho[j] > hi:
                hi = rho[j]
        if lo < guard_lo or hi > guard_hi:
            return step, grad_bound, min_gap, mass_drift
        if step % 64 == 0 or step == n_steps - 1:
            mass = 0.0
            gb = 0.0
            for j in range(m):
                mass += rho[j]
                jn = j + 1 if j + 1 < m else 0
                d = abs(rho[jn] - rho[j]) * m
                if d > gb:
                    gb = d
            mass = mass / m
            if abs(mass - mass0) > mass_drift:
                mass_drift = abs(mass - mass0)
            if gb > grad_bound:
                grad_bound = gb
            gap = lo if lo < 1.0 - hi else 1.0 - hi
            if gap < min_gap:
                min_gap = gap
    return -1, grad_bound, min_gap, mass_drift


@njit(cache=True)
def _blend_rho(rho_stored, rho_dt, s, coef_out, f_sites, m):
    """coef_out = 2 (1 - 2 rho(s, .)) F(.), with rho linearly interpolated."""
    pos = s / rho_dt
    n_rows = rho_stored.shape[0]
    k = int(pos)
    if k > n_rows - 2:
        k = n_rows - 2
    if k < 0:
        k = 0
    w = pos - k
    if w < 0.0:
        w = 0.0
    if w > 1.0:
        w = 1.0
    for j in range(m):
        r = (1.0 - w) * rho_stored[k, j] + w * rho_stored[k + 1, j]
        coef_out[j] = 2.0 * (1.0 - 2.0 * r) * f_sites[j]


@njit(cache=True)
def _operator_rhs(v, coef, out, m):
    for j in range(m):
        jn = j + 1 if j + 1 < m else 0
        jp = j - 1 if j > 0 else m - 1
        out[j] = (v[jn] + v[jp] - 2.0 * v[j]) * m * m + coef[j] * (v[jn] - v[jp]) * 0.5 * m


@njit(cache=True)
def backward_run(v, f_sites, rho_stored, rho_dt, t, dt, n_steps, store_times, values):
    """Integrate d v / d tau = L_{t - tau} v from tau = 0 (terminal) to tau = t.

    store_times are physical times s in ascending order; values[k] receives
    the solution at s = store_times[k] by linear blending between steps.
    The caller has already written the terminal slice into values[-1].
    """
    m = v.size
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    tmp = np.empty(m)
    ca = np.empty(m)
    cb = np.empty(m)
    cc = np.empty(m)
    next_store = store_times.size - 2
    tau = 0.0
    for _ in range(n_steps):
        _blend_rho(rho_stored, rho_dt, t - tau, ca, f_sites, m)
        _blend_rho(rho_stored, rho_dt, t - tau - 0.5 * dt, cb, f_sites, m)
        s_end = t - tau - dt
        if s_end < 0.0:
            s_end = 0.0
        _blend_rho(rho_stored, rho_dt, s_end, cc, f_sites, m)
        _operator_rhs(v, ca, k1, m)
        for j in range(m):
            tmp[j] = v[j] + 0.5 * dt * k1[j]
        _operator_rhs(tmp, cb, k2, m)
        for j in range(m):
            tmp[j] = v[j] + 0.5 * dt * k2[j]
        _operator_rhs(tmp, cb, k3, m)
        for j in range(m):
            tmp[j] = v[j] + dt * k3[j]
        _operator_rhs(tmp, cc, k4, m)
        for j in range(m):
            tmp[j] = v[j] + (dt / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
        tau_new = tau + dt
        while next_store >= 0 and t - store_times[next_store] <= tau_new + 1e-12:
            w = (t - store_times[next_store] - tau) / dt
            for j in range(m):
                values[next_store, j] = (1.0 - w) * v[j] + w * tmp[j]
            next_store -= 1
        for j in range(m):
            v[j] = tmp[j]
        tau = tau_new
    return next_store


"""Compiled single-path integrators.

Each kernel draws Gaussian increments from ``gw`` and bridge uniforms from
``gu`` so that every representation consumes the same Brownian path for a
given (seed, path index).  Return value: (steps taken, side, final state)
with side -1 lower exit, +1 upper exit, 0 censored.
"""

from __future__ import annotations

import math

import numba

BRIDGE_CUTOFF = 50.0


@numba.njit(cache=True, nogil=True)
def logit_path(gw, gu, y0, gamma, drift, u, dt, nmax, bridge):
    """Exact Gaussian steps of Y = logit(Pi) between barriers -gamma and gamma."""
    y = y0
    sq = abs(u) * math.sqrt(dt)
    step = drift * dt
    inv = 2.0 / (u * u * dt)
    for k in range(nmax):
        yn = y + step + sq * gw.standard_normal()
        if yn >= gamma:
            return k + 1, 1, yn
        if yn <= -gamma:
            return k + 1, -1, yn
        if bridge:
            # Brownian-bridge crossing probability per barrier; written out
            # inline because a helper call costs ~50% throughput
            a_up = inv * (gamma - y) * (gamma - yn)
            a_lo = inv * (y + gamma) * (yn + gamma)
            if a_up < BRIDGE_CUTOFF or a_lo < BRIDGE_CUTOFF:
                v = gu.random()
                p_up = math.exp(-a_up)
                if v < p_up:
                    return k + 1, 1, yn
                if v < p_up + math.exp(-a_lo):
                    return k + 1, -1, yn
        y = yn
    return nmax, 0, y


@numba.njit(cache=True, nogil=True)
def strongx_path(gw, gu, p, delta, theta, u, dt, nmax, bridge):
    """Raw observation X with the posterior read off the likelihood ratio.

    X(t) = theta u t + W(t), L = exp(u X - u^2 t / 2), Pi = p L / (p L + 1 - p).
    The bridge test runs in log-odds coordinates where X is Brownian.
    """
    x = 0.0
    sq = math.sqrt(dt)
    lo, hi = delta, 1.0 - delta
    y0 = math.log(p) - math.log1p(-p)
    gamma = math.log(hi) - math.log(lo) if delta > 0.0 else math.inf
    inv = 2.0 / (u * u * dt)
    y = y0
    pi = p
    for k in range(nmax):
        x += theta * u * dt + sq * gw.standard_normal()
        t = (k + 1) * dt
        ell = u * x - 0.5 * u * u * t
        if ell > 700.0:
            pi = 1.0
        else:
            L = math.exp(ell)
            pi = p * L / (p * L + 1.0 - p)
        if pi >= hi:
            return k + 1, 1, pi
        if pi <= lo:
            return k + 1, -1, pi
        if bridge:
            yn = y0 + ell
            a_up = inv * (gamma - y) * (gamma - yn)
            a_lo = inv * (y + gamma) * (yn + gamma)
            if a_up < BRIDGE_CUTOFF or a_lo < BRIDGE_CUTOFF:
                v = gu.random()
                p_up = math.exp(-a_up)
                if v < p_up:
                    return k + 1, 1, pi
                if v < p_up + math.exp(-a_lo):
                    return k + 1, -1, pi
            y = yn
    return nmax, 0, pi


@numba.njit(cache=True, nogil=True)
def pi_euler_path(gw, p, delta, theta, u, dt, nmax, milstein):
    """Posterior SDE dPi = u Pi (1 - Pi) dB with dB = dX - u Pi dt.

    Euler-Maruyama, optionally with the Milstein correction
    (1/2) s s' (dB^2 - dt) where s = u Pi (1 - Pi).
    """
    pi = p
    sq = math.sqrt(dt)
    lo, hi = delta, 1.0 - delta
    for k in range(nmax):
        dx = theta * u * dt + sq * gw.standard_normal()
        db = dx - u * pi * dt
        s = u * pi * (1.0 - pi)
        nxt = pi + s * db
        if milstein:
            nxt += 0.5 * s * u * (1.0 - 2.0 * pi) * (db * db - dt)
        pi = nxt
        if pi >= hi:
            return k + 1, 1, pi
        if pi <= lo:
            return k + 1, -1, pi
    return nmax, 0, pi

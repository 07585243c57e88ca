"""Independent reference computations used by the tests.

Nothing here imports the package: every value is rebuilt from first
principles with plain floats so that it can serve as an oracle.
"""

from __future__ import annotations

import math


def bisect(f, lo: float, hi: float, tol: float = 1e-12, max_iter: int = 400) -> float:
    flo = f(lo)
    if flo == 0.0:
        return lo
    if flo * f(hi) > 0.0:
        raise ValueError("root not bracketed")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or hi - lo < tol:
            return mid
        if (fm > 0.0) == (flo > 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def psi(p: float) -> float:
    return (1.0 - 2.0 * p) * math.log(p / (1.0 - p))


def psi_prime(p: float) -> float:
    return -2.0 * math.log(p / (1.0 - p)) + (1.0 - 2.0 * p) / (p * (1.0 - p))


def classic_boundary(M: float, tol: float = 1e-12) -> float:
    """Smallest root of 1 = 2 M Psi'(pi) on (0, 1/2)."""
    return bisect(lambda p: 1.0 - 2.0 * M * psi_prime(p), 1e-12, 0.5 - 1e-15, tol)


def quadratic_M(a: float, b: float, c: float) -> float:
    return (4.0 * a * c - b * b) / (4.0 * c)


def mean_exit_time(A: float, pi: float, u: float) -> float:
    return 2.0 / (u * u) * (psi(pi) - psi(A))


def upper_exit_probs(A: float, pi: float) -> tuple[float, float]:
    """P(upper | theta = 1), P(upper | theta = 0) via the martingale 1/Pi and 1/(1 - Pi)."""
    # under theta = 1 the likelihood ratio reweights the mixture exit law
    q = (pi - A) / (1.0 - 2.0 * A)  # unconditional P(upper), Pi a martingale
    return q * (1.0 - A) / pi, q * A / (1.0 - pi)


def exit_density_sine_series(A: float, pi: float, u: float, theta: int, t: float, n_terms: int = 4000) -> float:
    """Exit-time density from the spectral expansion of the killed semigroup.

    In time s = u^2 t the log-odds has unit volatility and drift mu = theta - 1/2;
    started at distance x from the lower barrier of an interval of width w,
    f_s(s) = sum_n (1/w) e^{-mu x} sin(k x) k (1 - (-1)^n e^{mu w}) e^{-(mu^2 + k^2) s / 2}
    with k = n pi / w.
    """
    G = math.log((1.0 - A) / A)
    y = math.log(pi / (1.0 - pi))
    x, w, mu, s = y + G, 2.0 * G, theta - 0.5, u * u * t
    total = 0.0
    for n in range(1, n_terms + 1):
        k = n * math.pi / w
        total += math.sin(k * x) * k * (1.0 - (-1.0) ** n * math.exp(mu * w)) * math.exp(-(mu * mu + k * k) * s / 2.0)
    return u * u * math.exp(-mu * x) * total / w

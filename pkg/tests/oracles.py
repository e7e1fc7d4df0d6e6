"""Closed-form reference values, written independently of the package.

All processes are standard Brownian motion with generator Delta/2 unless
noted.  Nothing here imports isop.
"""
import math

import numpy as np
from scipy.special import j0, j1, jn_zeros


def interval_survival(t, width, modes=200):
    """P_0(T > t) for the interval (-w/2, w/2) started at its midpoint."""
    k = np.arange(modes)
    m = 2 * k + 1
    terms = 4.0 / (m * np.pi) * (-1.0) ** k * np.exp(-(m * np.pi / width) ** 2 * t / 2)
    return float(terms.sum())


def rectangle_survival(t, a, b):
    return interval_survival(t, a) * interval_survival(t, b)


def disk_survival(t, R=1.0, modes=60):
    """P_0(T > t) for the disk of radius R started at its center (t >= 1e-2 R^2 at 60 modes)."""
    z = jn_zeros(0, modes)
    return float(np.sum(2.0 / (z * j1(z)) * np.exp(-z * z * t / (2 * R * R))))


def disk_eigenvalue(R=1.0):
    return float(jn_zeros(0, 1)[0] ** 2 / (2 * R * R))


def rectangle_eigenvalue(a, b):
    return math.pi**2 / 2 * (1 / a**2 + 1 / b**2)


def annulus_harmonic(r1, r2, x):
    """Probability of hitting the inner circle first (planar annulus)."""
    return math.log(r2 / x) / math.log(r2 / r1)


def ball_exit_time(R, x_norm, d):
    return (R * R - x_norm * x_norm) / d


def ball_heat_content(R, t):
    """Expected volume swept by the ball B_R along a 3D path up to t (Wiener sausage of a ball)."""
    return 2 * math.pi * R * t + 4 * R * R * math.sqrt(2 * math.pi * t) + 4 * math.pi * R**3 / 3


def strip_carleman(M, r0, x0, b):
    """Width bound for the constant-width strip of width M, clamped to 1."""
    if b <= x0:
        return 1.0
    return min(1.0, 3 * math.sqrt(M / r0) / math.sqrt(math.expm1(2 * math.pi * (b - x0) / M)))


def ball_eigenvalue_3d(R=1.0):
    return math.pi**2 / (2 * R * R)

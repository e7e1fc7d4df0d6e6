"""Brownian exit statistics on simple domains, checked against closed forms.

Run:  python3 demos/harmonic_and_kac.py
Takes about ten seconds on one core.
"""
import numpy as np
from scipy.special import jn_zeros

from isop.estimators import expected_exit_time, harmonic_measure, kac_eigenvalue
from isop.geometry.domains import Annulus, Ball, Rectangle
from isop.stochastic import SimConfig

cfg = SimConfig(seed=11)

# Harmonic measure of the inner circle of an annulus, seen from |x| = 1.
# Walk-on-spheres samples the exit point exactly, so only MC error remains.
A = Annulus(0.5, 2.0)
est = harmonic_measure(A, "inner", [1.0, 0.0], n=20_000, cfg=cfg)
exact = np.log(2.0 / 1.0) / np.log(2.0 / 0.5)
print(f"annulus inner harmonic measure  {est.mean:.4f} +- {est.stderr:.4f}   exact {exact:.4f}")

# Mean exit time from the unit ball in R^3 started at the center: R^2 / d.
est = expected_exit_time(Ball(1.0, [0.0, 0.0, 0.0]), [0.0, 0.0, 0.0], n=20_000, cfg=cfg)
print(f"ball exit time                  {est.mean:.4f} +- {est.stderr:.4f}   exact {1/3:.4f}")

# Survival decay rate gives the principal eigenvalue of -Delta/2.
# Step simulation with dt=1e-3 biases survival up slightly, so the rate comes out a bit low.
for name, D, exact in [
    ("unit disk", Ball(1.0, [0.0, 0.0]), jn_zeros(0, 1)[0] ** 2 / 2),
    ("unit square", Rectangle([-0.5, -0.5], [0.5, 0.5]), np.pi**2),
]:
    t_grid = np.linspace(0.3, 1.3, 6) / exact * 3
    est = kac_eigenvalue(D, np.zeros(2), t_grid, n=20_000, cfg=cfg)
    print(f"{name:12s} eigenvalue          {est.mean:.3f} +- {est.stderr:.3f}   exact {exact:.3f}")

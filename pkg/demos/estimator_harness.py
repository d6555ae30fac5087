"""The two-point estimator on an affine channel, where it is exactly unbiased.

Run: python demos/estimator_harness.py
"""
import numpy as np

from izosga.checks import estimator_statistics

for mu in (1e-3, 1e-1, 1.0):
    mean, se, exact, msq, bound = estimator_statistics(samples=50_000, mu=mu)
    z = np.abs(mean - exact) / se
    print(f"mu = {mu:g}: max |z| = {z.max():.2f}, E||D||^2 = {msq:.3f} (bound {bound:.1f})")
print("exact gradient ", np.round(exact, 4))
print("sample average ", np.round(mean, 4))

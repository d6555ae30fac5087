"""Compose effective channels through an ideal and a varactor IRS.

Run: python demos/channel_and_irs.py
"""
import numpy as np

from izosga.config import load_scenario
from izosga.checks import varactor_phase_coverage
from izosga.irs import VaractorCircuit, reflection_varactor

loaded = load_scenario("desk_scale.toml")
env = loaded.environment()
rng = np.random.default_rng(0)
omega = env.sample(rng)
print("G", omega.G.shape, "h_r", omega.h_r.shape, "h_d", omega.h_d.shape)

# a perfect mirror versus an absorbing surface
mirror = np.concatenate([np.ones(64), np.zeros(64)])
absorber = np.zeros(128)
for name, theta in (("mirror", mirror), ("absorber", absorber)):
    H = env.channel(theta, omega)
    print(f"{name:9s} mean |h_k|^2 = {np.mean(np.sum(np.abs(H) ** 2, axis=1)):.4f}")

# the varactor element law: phase swept by capacitance
c_pf = np.linspace(0.2, 2.0, 7)
gamma = reflection_varactor(c_pf * 1e-12, VaractorCircuit())
for c, g in zip(c_pf, gamma):
    print(f"C = {c:.2f} pF   |Gamma| = {abs(g):.3f}   arg = {np.degrees(np.angle(g)):7.1f} deg")
span, monotone, lo, hi = varactor_phase_coverage()
print(f"phase coverage {span:.1f} deg, monotone: {monotone}")

"""How the WMMSE iteration budget controls oracle quality.

Run: python demos/wmmse_budgets.py
"""
import numpy as np

from izosga.config import load_scenario
from izosga.oracle import OracleBudget, oracle_error_estimate, wmmse
from izosga.optimizer import stack_realizations

loaded = load_scenario("desk_scale.toml")
env = loaded.environment()
rng = np.random.default_rng(1)
omega = stack_realizations(env.sample(rng) for _ in range(200))
theta = env.box.uniform(rng)
H = env.channel(np.broadcast_to(theta, (200, env.dim)), omega)

reference, _ = wmmse(H, env.scenario, OracleBudget(200))
for budget in (1, 2, 3, 5, 10, 20, 50):
    W, trace = wmmse(H, env.scenario, OracleBudget(budget))
    gap = oracle_error_estimate(W, H, env.scenario, reference)
    print(f"budget {budget:3d}: mean sum rate {trace.final_sumrate.mean():.3f} bits, mean value gap {gap.mean():.4f}")

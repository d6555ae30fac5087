"""A short iZoSGA run on the desk scenario against the random-IRS baseline.

Run: python demos/short_training_run.py   (about a minute)
"""
import numpy as np

from izosga.config import load_scenario
from izosga.optimizer import OptimizerConfig, evaluate_fixed, izosga_runs, random_thetas

env = load_scenario("desk_scale.toml").environment()
config = OptimizerConfig(iterations=1500, step_size=0.01, smoothing=1e-3, budget_schedule=5, warm_start=False)
seeds = [0, 1]
runs = izosga_runs(env, config, seeds)
baseline = evaluate_fixed(env, random_thetas(env, [10, 11]), 5, config.iterations, [10, 11])

window = 75
for run in runs:
    c = run.sumrate_curve
    print(f"seed {run.seed}: first {c[:window].mean():.3f} -> last {c[-window:].mean():.3f} bits,"
          f" returned iterate t* = {run.selected_iteration}")
print(f"random IRS baseline: {baseline[:, -window:].mean():.3f} bits")
d = runs[0].diagnostics
print(f"empirical B_F {d.empirical_BF:.3f}, L_H0 {d.empirical_LH0:.3f}, E||D||^2 {d.mean_sq_grad:.2f}"
      f" <= bound {d.lemma3_bound:.3g}")
